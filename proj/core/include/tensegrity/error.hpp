#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tensegrity {

enum class ErrorKind {
  InvalidParameter,
  NonConvergence,
  Slip,
  Divergence,
  InvalidCommand,
  DegenerateSupport,
  InvalidPolicy,
  NoStepAvailable,
  Config,
  Protocol,
};

std::string_view to_string(ErrorKind kind);

/// Base exception for every recoverable failure in the library. The kind is
/// machine-readable and maps onto CLI exit codes and protocol rejections.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace tensegrity
