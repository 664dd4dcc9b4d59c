#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace densctl {

enum class ErrorKind {
  InvalidArgument,
  DimensionMismatch,
  NonFinite,
  Format,
  Io,
  Starvation,
  Divergence,
  State,
};

std::string_view to_string(ErrorKind kind);

/// Typed error carried by every failing operation. The CLI maps the kind onto
/// its exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const char* what) {
  if (!cond) fail(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace densctl
