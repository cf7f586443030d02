#pragma once

// Block-parallel loops whose results do not depend on the worker count:
// work is cut into fixed-size blocks and callers merge per-block results in
// block order.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace neuromfg {

// NEUROMFG_THREADS wins over `configured`; 0 or absent means all cores.
std::size_t worker_count(std::optional<std::size_t> configured = std::nullopt);

inline std::size_t block_count(std::size_t n_items, std::size_t block_size) {
  return (n_items + block_size - 1) / block_size;
}

// Calls fn(block, begin, end) for every block of [0, n_items). Exceptions
// are rethrown after all workers stop; the one from the lowest block wins.
template <class Fn>
void for_each_block(std::size_t n_items, std::size_t block_size,
                    std::size_t workers, Fn&& fn) {
  const std::size_t n_blocks = block_count(n_items, block_size);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  std::exception_ptr error;
  std::size_t error_block = n_blocks;

  auto work = [&] {
    for (;;) {
      const std::size_t b = next.fetch_add(1);
      if (b >= n_blocks || failed.load()) return;
      try {
        fn(b, b * block_size, std::min(n_items, (b + 1) * block_size));
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (b < error_block) {
          error_block = b;
          error = std::current_exception();
        }
        failed.store(true);
      }
    }
  };

  workers = std::max<std::size_t>(1, std::min(workers, n_blocks));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace neuromfg
