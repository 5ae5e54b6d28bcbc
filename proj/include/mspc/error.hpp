#pragma once

#include <stdexcept>
#include <string>

namespace mspc {

/// Raised when a caller breaks an operation's precondition (shape mismatch,
/// non-scalar loss, invalid grid side, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Invalid user-facing configuration (config files, dataset parameters).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A loss or parameter became non-finite during training.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, std::string snapshot_path)
      : std::runtime_error(what), snapshot_path_(std::move(snapshot_path)) {}

  const std::string& snapshot_path() const noexcept { return snapshot_path_; }

 private:
  std::string snapshot_path_;
};

/// File-system or codec failure; the message always names the file.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define MSPC_REQUIRE(cond, msg)                      \
  do {                                               \
    if (!(cond)) throw ::mspc::ContractViolation(msg); \
  } while (0)

}  // namespace mspc
