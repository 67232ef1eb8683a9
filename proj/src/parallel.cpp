#include "projlab/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace projlab {

namespace {
std::atomic<unsigned> g_override{0};
}

unsigned worker_count() {
  if (unsigned n = g_override.load(); n > 0) return n;
  if (const char* env = std::getenv("PROJLAB_WORKERS")) {
    try {
      int n = std::stoi(env);
      if (n > 0) return static_cast<unsigned>(n);
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void set_worker_count(unsigned n) { g_override.store(n); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  if (n == 0) return;
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_count(), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n);
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

double blocked_sum(std::size_t n, std::size_t block,
                   const std::function<double(std::size_t, std::size_t)>& partial) {
  if (n == 0) return 0.0;
  block = std::max<std::size_t>(block, 1);
  const std::size_t blocks = (n + block - 1) / block;
  std::vector<double> sums(blocks, 0.0);
  parallel_for(blocks, [&](std::size_t b) {
    sums[b] = partial(b * block, std::min(n, (b + 1) * block));
  });
  double total = 0.0;
  for (double s : sums) total += s;
  return total;
}

}  // namespace projlab
