#ifndef DQR_PARALLEL_HPP_
#define DQR_PARALLEL_HPP_

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace dqr {

//! Runs body(i) for i in [begin, end) on up to `threads` workers.
//!
//! Work items must write to disjoint state. The first exception thrown by any
//! worker is rethrown on the calling thread after all workers join. With
//! threads <= 1 the loop runs inline, which keeps single-threaded runs
//! bit-reproducible.
inline void parallel_for(int begin, int end, int threads,
                         const std::function<void(int)>& body) {
  if (end <= begin) return;
  const int span = end - begin;
  if (threads <= 1 || span == 1) {
    for (int i = begin; i < end; ++i) body(i);
    return;
  }
  const int worker_count = std::min(threads, span);
  std::atomic<int> next(begin);
  std::exception_ptr first_error;
  std::mutex error_lock;
  std::vector<std::thread> workers;
  workers.reserve(worker_count);
  for (int w = 0; w < worker_count; ++w) {
    workers.emplace_back([&]() {
      while (true) {
        const int i = next.fetch_add(1);
        if (i >= end) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> guard(error_lock);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& worker : workers) worker.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace dqr

#endif  // DQR_PARALLEL_HPP_
