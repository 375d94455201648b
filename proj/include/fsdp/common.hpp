#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fsdp {

enum class ErrorKind {
  invalid_input,
  geometry,
  projection,
  fit,
  model_degenerate,
  solver,
  no_feasible_gap,
  degenerate_speed,
  linearization,
  infeasible_corridor,
  config,
  io,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type for the library; `kind()` tells callers which
/// fallback applies.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void raise(ErrorKind kind, const std::string& what);

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

/// Wraps x into [0, period).
inline double wrap_periodic(double x, double period) {
  double r = std::fmod(x, period);
  if (r < 0.0) r += period;
  if (r >= period) r -= period;
  return r;
}

/// Signed shortest difference b - a on a loop of length `period`, in (-period/2, period/2].
inline double periodic_delta(double a, double b, double period) {
  double d = wrap_periodic(b - a, period);
  if (d > 0.5 * period) d -= period;
  return d;
}

}  // namespace fsdp
