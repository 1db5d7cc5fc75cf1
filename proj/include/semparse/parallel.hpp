#ifndef SEMPARSE_PARALLEL_HPP
#define SEMPARSE_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace semparse {

// Runs fn(task) for task in [0, tasks) on up to `threads` workers. Task
// results must go to task-owned storage; the first exception is rethrown.
template <typename Fn>
void parallel_for(std::size_t tasks, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, tasks));
  if (threads == 1) {
    for (std::size_t t = 0; t < tasks; ++t) fn(t);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks; t = next++) {
      try {
        fn(t);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace semparse

#endif
