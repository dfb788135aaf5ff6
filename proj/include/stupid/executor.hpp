#pragma once

// Runs one function per rank, either round-robin on the calling thread or on
// persistent worker threads. Each call to run() is a full barrier.

#include <barrier>
#include <exception>
#include <functional>
#include <memory>
#include <thread>
#include <vector>

namespace stupid {

class PhaseExecutor {
public:
  PhaseExecutor(int ranks, bool threaded) : ranks_(ranks), threaded_(threaded && ranks > 1)
  {
    if (!threaded_) return;
    errors_.resize(static_cast<std::size_t>(ranks_));
    sync_ = std::make_unique<std::barrier<>>(ranks_ + 1);
    for (int r = 0; r < ranks_; ++r) threads_.emplace_back([this, r] { loop(r); });
  }

  ~PhaseExecutor()
  {
    if (!threaded_) return;
    task_ = nullptr;
    stop_ = true;
    sync_->arrive_and_wait();
    for (auto& t : threads_) t.join();
  }

  PhaseExecutor(const PhaseExecutor&) = delete;
  PhaseExecutor& operator=(const PhaseExecutor&) = delete;

  int ranks() const noexcept { return ranks_; }
  bool threaded() const noexcept { return threaded_; }

  /// Calls fn(rank) for every rank and returns once all have finished. The
  /// first exception (lowest rank) is rethrown.
  void run(const std::function<void(int)>& fn)
  {
    if (!threaded_) {
      for (int r = 0; r < ranks_; ++r) fn(r);
      return;
    }
    task_ = &fn;
    sync_->arrive_and_wait(); // start
    sync_->arrive_and_wait(); // done
    task_ = nullptr;
    for (auto& e : errors_) {
      if (e) {
        auto first = e;
        for (auto& x : errors_) x = nullptr;
        std::rethrow_exception(first);
      }
    }
  }

private:
  void loop(int rank)
  {
    while (true) {
      sync_->arrive_and_wait();
      if (stop_) return;
      try {
        (*task_)(rank);
      } catch (...) {
        errors_[static_cast<std::size_t>(rank)] = std::current_exception();
      }
      sync_->arrive_and_wait();
    }
  }

  int ranks_;
  bool threaded_;
  bool stop_ = false;
  const std::function<void(int)>* task_ = nullptr;
  std::unique_ptr<std::barrier<>> sync_;
  std::vector<std::thread> threads_;
  std::vector<std::exception_ptr> errors_;
};

} // namespace stupid
