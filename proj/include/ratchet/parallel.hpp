#pragma once

#include <condition_variable>
#include <exception>
#include <cstddef>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace ratchet {

/// Fixed-size worker pool running index-parallel loops. Work items must only
/// write to their own output slot; with that discipline results do not depend
/// on the number of workers.
class ThreadPool {
 public:
  explicit ThreadPool(int threads);
  ~ThreadPool();
  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  int size() const { return threads_; }

  // Calls body(begin, end) over contiguous chunks covering [0, n).
  void for_chunks(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

 private:
  void worker_loop(int id);

  int threads_;
  std::vector<std::thread> workers_;
  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable done_;
  const std::function<void(std::size_t, std::size_t)>* job_ = nullptr;
  std::size_t job_size_ = 0;
  std::size_t generation_ = 0;
  int pending_ = 0;
  bool stopping_ = false;
  std::exception_ptr worker_failure_;
};

// Process-wide worker count; 0 or unset falls back to RATCHET_QSD_THREADS, then 1.
void set_thread_count(int threads);
int thread_count();
ThreadPool& default_pool();

namespace detail {
// Set while a thread executes a parallel_for body; nested loops run serially.
inline thread_local bool in_parallel_region = false;
}  // namespace detail

template <typename F>
void parallel_for(std::size_t n, F&& f) {
  if (n == 0) return;
  ThreadPool& pool = default_pool();
  if (detail::in_parallel_region || pool.size() <= 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  const std::function<void(std::size_t, std::size_t)> body = [&f](std::size_t b, std::size_t e) {
    const bool outer = detail::in_parallel_region;
    detail::in_parallel_region = true;
    try {
      for (std::size_t i = b; i < e; ++i) f(i);
    } catch (...) {
      detail::in_parallel_region = outer;
      throw;
    }
    detail::in_parallel_region = outer;
  };
  pool.for_chunks(n, body);
}

}  // namespace ratchet
