#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <thread>
#include <vector>

#include "foreco/linalg.hpp"

namespace foreco {

/// Worker count from FORECO_NUM_THREADS, else the hardware concurrency.
inline unsigned default_threads() {
  if (const char* env = std::getenv("FORECO_NUM_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, count) on a strided schedule. Each worker stops at
/// its first failure; the returned vector holds the exception of every failed
/// index, so the lowest failing index is always present.
template <class Fn>
std::vector<std::exception_ptr> parallel_for(Index count, unsigned threads, Fn&& fn) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(std::max<Index>(count, 0)));
  if (count <= 0) return errors;
  if (threads == 0) threads = default_threads();
  threads = static_cast<unsigned>(std::min<Index>(threads, count));
  auto work = [&](unsigned t) {
    for (Index i = t; i < count; i += threads) {
      try {
        fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
        return;
      }
    }
  };
  if (threads <= 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
    for (auto& th : pool) th.join();
  }
  return errors;
}

}  // namespace foreco
