#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <vector>

#include "fsdp/predictor.hpp"
#include "fsdp/qp.hpp"
#include "fsdp/track.hpp"

namespace fsdp {

enum class Side { left, right };

const char* to_string(Side side);

struct KeyPoint {
  double s = 0.0;
  double d = 0.0;
};

/// k[0] and k[4] sit on the racing line; k[1..3] pass the opponent.
struct KeyPointSet {
  std::array<KeyPoint, 5> k{};
  Side side = Side::left;
};

struct KeyPointOptions {
  double margin = 0.5;       // lateral distance kept from the predicted opponent
  double edge_margin = 0.0;  // subtracted from the track bounds
  double lead_time = 1.0;    // lead-in / lead-out as seconds of travel at ego speed
  double lead_floor = 0.0;   // minimum lead-in / lead-out [m]
  // Lead distances are at least this fraction of the interval length; a
  // single quintic sags on plateaus much longer than its ramps.
  double lead_per_interval = 1.0;
  // Kept whenever it still leaves `margin`, so replanning does not flip sides.
  std::optional<Side> preferred;
};

/// Raises no_feasible_gap when neither side leaves `margin` between the
/// opponent and the (reduced) track bound at k2..k4.
KeyPointSet choose_key_points(const CollisionInterval& interval, const OpponentEstimate& est, const Raceline& track,
                              double ego_v, const KeyPointOptions& opt = {});

/// Time-stamped samples of the piecewise-linear evasion path.
struct RoughPath {
  std::vector<double> t, s, d;
  double speed = 0.0;
  double duration() const { return t.empty() ? 0.0 : t.back(); }
};

RoughPath interpolate_rough(const KeyPointSet& kps, double ds, double ego_v);

using Coeffs6 = Eigen::Matrix<double, 6, 1>;

/// Per-axis quintics in the natural basis 1, t, ..., t^5 with t in [0, T].
struct QuinticTraj {
  Coeffs6 coeffs_s = Coeffs6::Zero();
  Coeffs6 coeffs_d = Coeffs6::Zero();
  double T = 0.0;

  /// Derivative `order` (0..5) of a coefficient vector at t.
  static double eval(const Coeffs6& c, double t, int order = 0);
};

/// Weighted least-squares quintic through samples (t_i, p_i) with position
/// and velocity pinned at both ends; trapezoid weights, solved with the QP
/// solver. Velocity targets come from one-sided differences.
/// `end_slopes` overrides the one-sided differences when the exact
/// derivatives of the target are known.
Coeffs6 fit_quintic_axis(const std::vector<double>& t, const std::vector<double>& p, double T,
                         const QpSettings& settings = {},
                         std::optional<std::pair<double, double>> end_slopes = std::nullopt);

/// Raises solver when the QP does not solve.
QuinticTraj fit_quintic(const RoughPath& rough, const QpSettings& settings = {});

/// Kinematic-bicycle quantities of a Frenet path point (s, n and their first
/// two time derivatives), through the exact Frenet-to-Cartesian map.
struct FlatPoint {
  double x = 0.0, y = 0.0;
  double psi = 0.0;    // Cartesian heading
  double theta = 0.0;  // heading error to the centerline
  double v = 0.0;
  double a_t = 0.0;
  double delta = 0.0;
};

FlatPoint flat_point(const Raceline& track, double s, double sd, double sdd, double n, double nd, double ndd,
                     double wheelbase);

struct FlatOptions {
  double wheelbase = 0.33;
  double delta_max = 0.4;
  double v_min = 0.05;
  double t0 = 0.0;  // time of the first reference sample on the quintic clock
};

/// References at t0 + k dt, k = 0..N. States carry N + 1 entries (index 0 is
/// the current step), inputs N entries. Outside [0, T] the path continues on
/// the racing line at the endpoint speed.
struct FlatReferences {
  std::vector<Eigen::Vector3d> x_ref;  // s, n, theta
  std::vector<Eigen::Vector2d> u_ref;  // v, delta
  std::vector<double> a_t;
  std::vector<double> x, y;  // Cartesian positions of x_ref
  double dt = 0.0;
  bool saturated = false;
};

/// Raises degenerate_speed when v drops below v_min at any sample.
FlatReferences extract_flat_references(const QuinticTraj& traj, const Raceline& track, int N, double dt,
                                       const FlatOptions& opt = {});

/// Racing-line references at the given speeds, starting from s0.
FlatReferences racing_line_references(const Raceline& track, double s0, const std::vector<double>& speeds,
                                      double dt, double wheelbase);

}  // namespace fsdp
