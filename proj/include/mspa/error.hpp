#pragma once

#include <stdexcept>
#include <string>

namespace mspa {

// Bad input data, unresolved ids, malformed files. Maps to CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Completion or encoder backend failure. `retryable` marks transport-level
// failures (timeouts, refused connections) as opposed to bad responses.
class BackendError : public std::runtime_error {
 public:
  BackendError(const std::string& what, bool retryable, int attempts)
      : std::runtime_error(what), retryable_(retryable), attempts_(attempts) {}

  bool retryable() const { return retryable_; }
  int attempts() const { return attempts_; }

 private:
  bool retryable_;
  int attempts_;
};

// Invalid configuration or command-line usage. Maps to CLI exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mspa
