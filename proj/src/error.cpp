#include "rnnpb/error.hpp"

namespace rnnpb {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Argument: return "argument";
    case ErrorKind::Format: return "format";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::DimensionMismatch: return "dimension-mismatch";
    case ErrorKind::NumericInput: return "numeric-input";
    case ErrorKind::NumericOverflow: return "numeric-overflow";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Version: return "version";
    case ErrorKind::UnknownLabel: return "unknown-label";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

}  // namespace rnnpb
