#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rnnpb {

enum class ErrorKind {
  Argument,
  Format,
  Parse,
  DimensionMismatch,
  NumericInput,
  NumericOverflow,
  Domain,
  Version,
  UnknownLabel,
  Io,
};

std::string_view to_string(ErrorKind kind);

/// Every failure surfaced by the library carries a kind so that callers
/// (the CLI in particular) can map it onto an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace rnnpb
