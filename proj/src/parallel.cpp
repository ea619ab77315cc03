#include "ratchet/parallel.hpp"

#include <cstdlib>
#include <exception>
#include <memory>
#include <string>
#include <utility>

namespace ratchet {

ThreadPool::ThreadPool(int threads) : threads_(threads < 1 ? 1 : threads) {
  // The calling thread takes chunk 0, so only threads_ - 1 workers are spawned.
  for (int id = 1; id < threads_; ++id) workers_.emplace_back([this, id] { worker_loop(id); });
}

ThreadPool::~ThreadPool() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  wake_.notify_all();
  for (auto& w : workers_) w.join();
}

namespace {

std::pair<std::size_t, std::size_t> chunk_bounds(std::size_t n, int parts, int id) {
  const std::size_t p = static_cast<std::size_t>(parts);
  const std::size_t i = static_cast<std::size_t>(id);
  return {n * i / p, n * (i + 1) / p};
}

}  // namespace

void ThreadPool::worker_loop(int id) {
  std::size_t seen = 0;
  for (;;) {
    const std::function<void(std::size_t, std::size_t)>* job;
    std::size_t n;
    {
      std::unique_lock lock(mutex_);
      wake_.wait(lock, [&] { return stopping_ || generation_ != seen; });
      if (stopping_) return;
      seen = generation_;
      job = job_;
      n = job_size_;
    }
    const auto [b, e] = chunk_bounds(n, threads_, id);
    std::exception_ptr failure;
    try {
      if (b < e) (*job)(b, e);
    } catch (...) {
      failure = std::current_exception();
    }
    {
      std::lock_guard lock(mutex_);
      if (failure && !worker_failure_) worker_failure_ = failure;
      if (--pending_ == 0) done_.notify_one();
    }
  }
}

void ThreadPool::for_chunks(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
  {
    std::lock_guard lock(mutex_);
    job_ = &body;
    job_size_ = n;
    pending_ = threads_ - 1;
    ++generation_;
  }
  wake_.notify_all();
  std::exception_ptr failure;
  try {
    const auto [b, e] = chunk_bounds(n, threads_, 0);
    if (b < e) body(b, e);
  } catch (...) {
    failure = std::current_exception();
  }
  std::unique_lock lock(mutex_);
  done_.wait(lock, [&] { return pending_ == 0; });
  job_ = nullptr;
  if (!failure) failure = std::exchange(worker_failure_, nullptr);
  worker_failure_ = nullptr;
  if (failure) std::rethrow_exception(failure);
}

namespace {

int g_requested = 0;
std::unique_ptr<ThreadPool> g_pool;
std::mutex g_pool_mutex;

int resolve_threads() {
  if (g_requested > 0) return g_requested;
  if (const char* env = std::getenv("RATCHET_QSD_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 1;
}

}  // namespace

void set_thread_count(int threads) {
  std::lock_guard lock(g_pool_mutex);
  g_requested = threads;
  g_pool.reset();
}

int thread_count() {
  std::lock_guard lock(g_pool_mutex);
  return resolve_threads();
}

ThreadPool& default_pool() {
  std::lock_guard lock(g_pool_mutex);
  if (!g_pool) g_pool = std::make_unique<ThreadPool>(resolve_threads());
  return *g_pool;
}

}  // namespace ratchet
