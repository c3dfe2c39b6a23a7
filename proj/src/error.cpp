#include "stokeslab/error.hpp"

namespace stokeslab {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::invariant_violation: return "invariant_violation";
    case ErrorKind::geometry: return "geometry";
    case ErrorKind::mesh: return "mesh";
    case ErrorKind::solver: return "solver";
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace stokeslab
