#pragma once

#include <stdexcept>
#include <string>

namespace apr {

// Error classes map onto distinct CLI exit codes (see cli/commands.hpp).

// Invalid configuration: bad values, missing keys, unsupported options.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad or missing input data: corpus files, bundles, vocabularies, checkpoints.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Failures while running: non-finite loss, unwritable outputs, unreachable
// pretrained weights. `retryable` is set when the same call may succeed later.
class RuntimeFailure : public std::runtime_error {
 public:
  explicit RuntimeFailure(const std::string& what, bool retryable = false)
      : std::runtime_error(what), retryable_(retryable) {}

  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

}  // namespace apr
