#pragma once

#include <atomic>
#include <memory>

namespace sdg::parallel {

// Shared cancellation flag. Copies observe the same state; requesting twice
// is harmless.
class CancelToken {
 public:
  CancelToken() : flag_(std::make_shared<std::atomic<bool>>(false)) {}

  void request() const noexcept { flag_->store(true, std::memory_order_release); }
  bool requested() const noexcept { return flag_->load(std::memory_order_acquire); }

 private:
  std::shared_ptr<std::atomic<bool>> flag_;
};

}  // namespace sdg::parallel
