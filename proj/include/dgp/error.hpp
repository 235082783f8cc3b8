#pragma once

#include <stdexcept>
#include <string>

namespace dgp {

// Rejected input: bad shapes, malformed files, invalid configuration.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values or failed numerical checks.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

[[noreturn]] inline void reject(const std::string& what) { throw ValidationError(what); }

inline void require(bool cond, const std::string& what) {
  if (!cond) reject(what);
}

}  // namespace detail
}  // namespace dgp
