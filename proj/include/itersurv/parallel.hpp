#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace itersurv {

// Worker count: the request if nonzero, else all cores; ITERSURV_THREADS caps it.
inline unsigned worker_count(unsigned requested = 0) {
  unsigned n = requested != 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("ITERSURV_THREADS")) {
    try {
      const long cap = std::stol(env);
      if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
    } catch (const std::exception&) {
      // malformed value: ignore the cap
    }
  }
  return std::max(1u, n);
}

// Splits [0, n) into contiguous blocks, one per worker, and calls
// block(worker, begin, end). Worker exceptions are rethrown after joining.
template <class Block>
void parallel_blocks(std::uint64_t n, unsigned threads, Block&& block) {
  threads = static_cast<unsigned>(std::min<std::uint64_t>(std::max(1u, threads), std::max<std::uint64_t>(n, 1)));
  if (threads == 1) {
    block(0u, std::uint64_t{0}, n);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned w = 0; w < threads; ++w) {
    const std::uint64_t begin = n * w / threads;
    const std::uint64_t end = n * (w + 1) / threads;
    pool.emplace_back([&, w, begin, end] {
      try {
        block(w, begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// Sum of fn(state, i) over [0, n); `make_state()` builds per-worker scratch.
// Integer sums do not depend on the split.
template <class MakeState, class Fn>
std::uint64_t parallel_sum(std::uint64_t n, unsigned threads, MakeState&& make_state, Fn&& fn) {
  threads = std::max(1u, threads);
  std::vector<std::uint64_t> partial(threads, 0);
  parallel_blocks(n, threads, [&](unsigned w, std::uint64_t begin, std::uint64_t end) {
    auto state = make_state();
    std::uint64_t total = 0;
    for (std::uint64_t i = begin; i < end; ++i) total += fn(state, i);
    partial[w] = total;
  });
  std::uint64_t total = 0;
  for (auto p : partial) total += p;
  return total;
}

}  // namespace itersurv
