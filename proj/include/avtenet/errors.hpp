#pragma once

#include <stdexcept>
#include <string>

namespace avtenet {

// Error taxonomy mapped onto CLI exit codes by the driver:
//   usage_error -> 2, io_error -> 3, empty_data_error -> 4,
//   numeric_error -> 5, checkpoint_mismatch_error -> 6.
// Contract violations inside the library (bad axis, shape mismatch, ...)
// throw std::invalid_argument and indicate a programming error.

struct usage_error : std::runtime_error {
  explicit usage_error(const std::string& m) : std::runtime_error(m) {}
};

struct io_error : std::runtime_error {
  explicit io_error(const std::string& m) : std::runtime_error(m) {}
};

struct empty_data_error : std::runtime_error {
  explicit empty_data_error(const std::string& m) : std::runtime_error(m) {}
};

struct numeric_error : std::runtime_error {
  explicit numeric_error(const std::string& m) : std::runtime_error(m) {}
};

struct checkpoint_mismatch_error : std::runtime_error {
  explicit checkpoint_mismatch_error(const std::string& m) : std::runtime_error(m) {}
};

}  // namespace avtenet
