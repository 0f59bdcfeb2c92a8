#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

namespace scorehub {

// Fixed-size thread pool with a bounded queue. A task that throws only
// fails its own future; the worker keeps running.
class WorkerPool {
 public:
  WorkerPool(std::string name, std::size_t threads, std::size_t queue_capacity = 4096);
  // Finishes queued work, then joins.
  ~WorkerPool();
  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  // Throws kLoadShed when the queue is full.
  template <typename F>
  auto submit(F&& fn) -> std::future<std::invoke_result_t<std::decay_t<F>>> {
    using R = std::invoke_result_t<std::decay_t<F>>;
    auto task = std::make_shared<std::packaged_task<R()>>(std::forward<F>(fn));
    auto future = task->get_future();
    enqueue([task] { (*task)(); });
    return future;
  }

  const std::string& name() const { return name_; }
  std::size_t size() const { return threads_.size(); }
  std::size_t queue_capacity() const { return capacity_; }
  std::size_t queued() const;

 private:
  void enqueue(std::function<void()> task);
  void run();

  std::string name_;
  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::condition_variable ready_;
  std::deque<std::function<void()>> queue_;
  bool stopping_ = false;
  std::vector<std::thread> threads_;
};

// Runs fn(i) for every i in [0, n) on at most pool->size() tasks and waits.
// Without a pool the loop runs on the calling thread. The first exception
// escaping fn is rethrown after every index has been attempted.
void parallel_for(WorkerPool* pool, std::size_t n,
                  const std::function<void(std::size_t)>& fn);

}  // namespace scorehub
