#pragma once

#include <stdexcept>
#include <string>

namespace metsize {

enum class ErrorKind {
  InvalidArgument,
  DecompositionFailure,
  ModelDegenerate,
  DegenerateStatistic,
  Parse,
  Validation,
  Io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorKind::InvalidArgument, what);
}

}  // namespace metsize
