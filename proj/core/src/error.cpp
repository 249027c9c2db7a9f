#include "metsize/error.hpp"

namespace metsize {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::DecompositionFailure: return "decomposition failure";
    case ErrorKind::ModelDegenerate: return "model degenerate";
    case ErrorKind::DegenerateStatistic: return "degenerate statistic";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Validation: return "validation error";
    case ErrorKind::Io: return "I/O error";
  }
  return "error";
}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace metsize
