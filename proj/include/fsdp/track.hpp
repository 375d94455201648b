#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fsdp {

/// One row of a raceline table.
struct Waypoint {
  double s = 0.0;        // arc length [m]
  double x = 0.0;        // [m]
  double y = 0.0;        // [m]
  double psi = 0.0;      // heading [rad]
  double kappa = 0.0;    // curvature [1/m]
  double d_left = 0.0;   // lateral room toward +n [m]
  double d_right = 0.0;  // lateral room toward -n [m]
  double v_ref = 0.0;    // reference speed [m/s]
};

struct TrackSample {
  double x = 0.0;
  double y = 0.0;
  double psi = 0.0;
  double kappa = 0.0;
  double d_left = 0.0;
  double d_right = 0.0;
  double v_ref = 0.0;
  double dkappa_ds = 0.0;  // slope of kappa on the containing segment
};

/// Track-relative pose. n > 0 lies on the d_left side of the centerline.
struct FrenetPose {
  double s = 0.0;
  double n = 0.0;
  double theta = 0.0;
};

struct CartesianPose {
  double x = 0.0;
  double y = 0.0;
  double psi = 0.0;
};

/// Arc-length parameterized racing line with lateral bounds and a speed
/// profile. Fields are linearly interpolated between waypoints. Closed
/// tracks wrap s modulo length(); the segment after the last waypoint runs
/// back to the first one.
///
/// Immutable after construction, so concurrent readers are fine.
class Raceline {
 public:
  Raceline(std::vector<Waypoint> waypoints, bool closed, double total_length);

  /// Builds a closed or open raceline. For closed tracks the closing segment
  /// length is the chord from the last waypoint back to the first.
  static Raceline from_waypoints(std::vector<Waypoint> waypoints, bool closed);

  /// Parses a delimiter-separated table with a one-line header. Columns
  /// `x,y,d_left,d_right,v_ref` are required; `s`, `psi` and `kappa` are
  /// computed when absent. A final row repeating the first position marks a
  /// closed track unless `closed` says otherwise.
  static Raceline parse(std::string_view text, std::optional<bool> closed = std::nullopt);
  static Raceline load(const std::filesystem::path& path, std::optional<bool> closed = std::nullopt);

  /// Full table, closed tracks repeat the first row at s = length().
  std::string to_text() const;
  void save(const std::filesystem::path& path) const;

  const std::vector<Waypoint>& waypoints() const { return waypoints_; }
  double length() const { return length_; }
  bool closed() const { return closed_; }
  double mean_spacing() const { return length_ / static_cast<double>(segment_count()); }

  /// Closed: s modulo length. Open: s unchanged.
  double wrap(double s) const;

  TrackSample sample(double s) const;

  CartesianPose frenet_to_cartesian(const FrenetPose& pose) const;

  /// Local projection onto the centerline within [hint_s - window, hint_s + window].
  FrenetPose cartesian_to_frenet(double x, double y, double psi, double hint_s,
                                 double window = 20.0) const;

  /// Signed forward distance from a to b; for closed tracks the shortest one.
  double delta_s(double a, double b) const;

 private:
  std::size_t segment_count() const;
  /// Returns the segment index containing the wrapped s and the fraction along it.
  std::pair<std::size_t, double> locate(double s) const;
  double segment_start(std::size_t i) const;
  double segment_end(std::size_t i) const;
  const Waypoint& segment_tail(std::size_t i) const;

  std::vector<Waypoint> waypoints_;
  bool closed_ = false;
  double length_ = 0.0;
};

}  // namespace fsdp
