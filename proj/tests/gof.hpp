#pragma once

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/poisson.hpp>

#include <cstddef>
#include <map>
#include <vector>

namespace gof {

// p-value of the chi-square goodness-of-fit of counts against Poisson(mean),
// bins merged so that every expected count is at least 5.
inline double poisson_gof(const std::vector<std::size_t>& counts, double mean) {
  std::map<std::size_t, double> observed;
  for (std::size_t k : counts) observed[k] += 1.0;
  const double n = static_cast<double>(counts.size());
  boost::math::poisson_distribution<double> pois(mean);
  std::vector<double> obs, expct;
  double o = 0.0, e = 0.0, covered = 0.0;
  for (std::size_t k = 0;; ++k) {
    const double pk = boost::math::pdf(pois, static_cast<double>(k));
    o += observed.count(k) ? observed[k] : 0.0;
    e += n * pk;
    covered += pk;
    const double tail = 1.0 - covered;
    if (e >= 5.0 && n * tail >= 5.0) {
      obs.push_back(o);
      expct.push_back(e);
      o = e = 0.0;
    } else if (n * tail < 5.0) {
      // Close with the remaining tail.
      double rest = 0.0;
      for (const auto& [kk, c] : observed) if (kk > k) rest += c;
      obs.push_back(o + rest);
      expct.push_back(e + n * tail);
      break;
    }
  }
  double stat = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    stat += (obs[i] - expct[i]) * (obs[i] - expct[i]) / expct[i];
  }
  boost::math::chi_squared_distribution<double> chi(static_cast<double>(obs.size() - 1));
  return boost::math::cdf(boost::math::complement(chi, stat));
}

}  // namespace gof
