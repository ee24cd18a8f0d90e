#include "fraclat/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace fraclat {
namespace {

int initial_thread_count() {
  if (const char* env = std::getenv("FRACLAT_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception&) {
    }
  }
  return 1;
}

std::atomic<int>& thread_setting() {
  static std::atomic<int> n{initial_thread_count()};
  return n;
}

thread_local bool t_inside_worker = false;

}  // namespace

int thread_count() { return thread_setting().load(); }

void set_thread_count(int n) { thread_setting().store(std::max(1, n)); }

void parallel_for_blocks(std::size_t n_blocks, const std::function<void(std::size_t)>& body) {
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(thread_count()), n_blocks);
  if (workers <= 1 || t_inside_worker) {
    for (std::size_t b = 0; b < n_blocks; ++b) body(b);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    t_inside_worker = true;
    for (;;) {
      const std::size_t b = next.fetch_add(1);
      if (b >= n_blocks) break;
      try {
        body(b);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n_blocks);
      }
    }
    t_inside_worker = false;
  };

  {
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace fraclat
