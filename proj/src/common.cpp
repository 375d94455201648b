#include "fsdp/common.hpp"

namespace fsdp {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_input: return "invalid-input";
    case ErrorKind::geometry: return "geometry";
    case ErrorKind::projection: return "projection";
    case ErrorKind::fit: return "fit";
    case ErrorKind::model_degenerate: return "model-degenerate";
    case ErrorKind::solver: return "solver";
    case ErrorKind::no_feasible_gap: return "no-feasible-gap";
    case ErrorKind::degenerate_speed: return "degenerate-speed";
    case ErrorKind::linearization: return "linearization";
    case ErrorKind::infeasible_corridor: return "infeasible-corridor";
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind) {}

void raise(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace fsdp
