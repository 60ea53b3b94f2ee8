// Deterministic thread helpers.
//
// Work is split into contiguous blocks, one per thread, and every task
// writes only its own output slot, so results are bitwise identical for
// any thread count. Thread count resolution: explicit request, then the
// CENSDR_THREADS environment variable, then hardware concurrency.

#pragma once

#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace censdr {

inline int resolve_threads(int requested) {
  if (requested < 0)
    throw std::invalid_argument("thread count must be nonnegative");
  if (requested > 0) return requested;
  if (const char* env = std::getenv("CENSDR_THREADS")) {
    try {
      const int v = std::stoi(env);
      if (v > 0) return v;
    } catch (const std::exception&) {
      // fall through to hardware default on malformed values
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// Calls fn(i) for i in [begin, end); fn must only touch state owned by
// index i. Exceptions from workers are rethrown on the caller.
inline void parallel_for(long begin, long end, int nthreads,
                         const std::function<void(long)>& fn) {
  const long total = end - begin;
  if (total <= 0) return;
  if (nthreads <= 1 || total == 1) {
    for (long i = begin; i < end; ++i) fn(i);
    return;
  }
  const int workers = static_cast<int>(
      std::min<long>(total, static_cast<long>(nthreads)));
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const long chunk = (total + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const long lo = begin + static_cast<long>(w) * chunk;
    const long hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, w, &fn, &errors] {
      try {
        for (long i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace censdr
