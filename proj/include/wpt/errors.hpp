#pragma once

#include <stdexcept>
#include <string>

namespace wpt {

// Invalid configuration, file, or argument. CLI maps this to exit code 2.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure during a computation (non-finite state, singular
// system, measurement that never settles). CLI maps this to exit code 1.
class NumericsError : public std::runtime_error {
 public:
  explicit NumericsError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace wpt
