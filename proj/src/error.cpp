#include "densctl/error.hpp"

namespace densctl {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::DimensionMismatch: return "dimension-mismatch";
    case ErrorKind::NonFinite: return "non-finite";
    case ErrorKind::Format: return "format";
    case ErrorKind::Io: return "io";
    case ErrorKind::Starvation: return "starvation";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::State: return "state";
  }
  return "unknown";
}

}  // namespace densctl
