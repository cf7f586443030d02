#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "neuromfg/errors.hpp"

namespace neuromfg {

// Doubles rendered with 17 significant digits so they round-trip exactly.
inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header)
      : out_(path, std::ios::binary | std::ios::trunc), width_(header.size()) {
    if (!out_) throw Error("cannot open " + path + " for writing");
    write_fields(header);
  }

  void row(const std::vector<double>& values) {
    std::vector<std::string> fields;
    fields.reserve(values.size());
    for (double v : values) fields.push_back(format_double(v));
    write_fields(fields);
  }

  void row_fields(const std::vector<std::string>& fields) {
    write_fields(fields);
  }

 private:
  void write_fields(const std::vector<std::string>& fields) {
    if (fields.size() != width_) throw Error("csv row width mismatch");
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << fields[i];
    }
    out_ << '\n';
    if (!out_) throw Error("csv write failed");
  }

  std::ofstream out_;
  std::size_t width_;
};

}  // namespace neuromfg
