#include "scorehub/worker_pool.hpp"

#include <algorithm>
#include <atomic>
#include <exception>

#include "scorehub/error.hpp"

namespace scorehub {

WorkerPool::WorkerPool(std::string name, std::size_t threads, std::size_t queue_capacity)
    : name_(std::move(name)), capacity_(queue_capacity) {
  if (threads == 0 || queue_capacity == 0) {
    throw Error(ErrorCode::kInvalidParams,
                "worker pool '" + name_ + "' needs at least one thread and queue slot");
  }
  threads_.reserve(threads);
  for (std::size_t i = 0; i < threads; ++i) threads_.emplace_back([this] { run(); });
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  ready_.notify_all();
  for (auto& t : threads_) t.join();
}

std::size_t WorkerPool::queued() const {
  std::lock_guard lock(mutex_);
  return queue_.size();
}

void WorkerPool::enqueue(std::function<void()> task) {
  {
    std::lock_guard lock(mutex_);
    if (stopping_) {
      throw Error(ErrorCode::kLoadShed, "worker pool '" + name_ + "' is shutting down");
    }
    if (queue_.size() >= capacity_) {
      throw Error(ErrorCode::kLoadShed, "worker pool '" + name_ + "' queue is full");
    }
    queue_.push_back(std::move(task));
  }
  ready_.notify_one();
}

void WorkerPool::run() {
  for (;;) {
    std::function<void()> task;
    {
      std::unique_lock lock(mutex_);
      ready_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) return;
      task = std::move(queue_.front());
      queue_.pop_front();
    }
    try {
      task();
    } catch (...) {
      // packaged_task stores exceptions in its future; anything else is
      // dropped so the worker survives.
    }
  }
}

void parallel_for(WorkerPool* pool, std::size_t n,
                  const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto drain = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  if (pool == nullptr || n == 1) {
    drain();
  } else {
    std::size_t tasks = std::min(pool->size(), n);
    std::vector<std::future<void>> pending;
    pending.reserve(tasks);
    try {
      for (std::size_t t = 0; t < tasks; ++t) pending.push_back(pool->submit(drain));
    } catch (...) {
      // Whatever was submitted still has to finish before `next` goes away.
      next = n;
      for (auto& f : pending) f.wait();
      throw;
    }
    for (auto& f : pending) f.get();
  }
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace scorehub
