#pragma once

#include <vector>

#include "fsdp/track.hpp"

namespace fsdp {

/// Curvature varying linearly from `kappa_start` to `kappa_end` over `length`.
struct CurvaturePiece {
  double length = 0.0;
  double kappa_start = 0.0;
  double kappa_end = 0.0;
};

struct TrackBuildOptions {
  double spacing = 0.1;
  double d_left = 1.2;
  double d_right = 1.2;
  double v_max = 7.0;
  double a_lat = 5.0;
  double a_long = 4.0;
  bool closed = false;
  double x0 = 0.0;
  double y0 = 0.0;
  double psi0 = 0.0;
};

/// Integrates a piecewise-linear curvature profile into a raceline. Heading
/// is exact; positions use fine RK4 sub-steps.
Raceline build_from_curvature(const std::vector<CurvaturePiece>& pieces, const TrackBuildOptions& opt);

/// Speed profile from lateral and longitudinal acceleration limits.
std::vector<double> speed_profile(const std::vector<double>& kappa, double spacing, bool closed,
                                  double v_max, double a_lat, double a_long);

Raceline make_straight(double length, TrackBuildOptions opt = {});
Raceline make_circle(double radius, TrackBuildOptions opt = {});
/// Open S-bend: left arc, clothoid reversal, right arc.
Raceline make_s_curve(TrackBuildOptions opt = {});
/// Closed oval with a double lane-shift chicane on both straights (~101 m).
Raceline make_oval_chicane(TrackBuildOptions opt = {});

}  // namespace fsdp
