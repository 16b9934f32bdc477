#pragma once

#include <stdexcept>
#include <string>

namespace rotir {

// An iterative computation produced a non-finite value. The message carries
// the frame index where the failure happened.
struct numerical_failure : std::runtime_error {
  explicit numerical_failure(const std::string& what) : std::runtime_error(what) {}
};

// File read/write problem; the message carries the path.
struct io_failure : std::runtime_error {
  explicit io_failure(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rotir
