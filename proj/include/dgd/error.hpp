// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace dgd {

// Raised for any precondition violation on a public operation.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when training produces a non-finite loss.
class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(const std::string& what, std::string last_good_checkpoint)
      : std::runtime_error(what), last_good_checkpoint_(std::move(last_good_checkpoint)) {}

  const std::string& last_good_checkpoint() const noexcept { return last_good_checkpoint_; }

 private:
  std::string last_good_checkpoint_;
};

}  // namespace dgd
