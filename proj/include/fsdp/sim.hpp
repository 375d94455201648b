#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "fsdp/planner.hpp"
#include "fsdp/predictor.hpp"
#include "fsdp/selection.hpp"
#include "fsdp/track.hpp"

namespace fsdp {

struct VehicleParams {
  double width = 0.3;
  double length = 0.5;
  double wheelbase = 0.33;
  double v_max = 7.0;
  double delta_max = 0.4;
  double delta_rate_max = 3.2;  // [rad/s]
  double a_max = 4.0;
  double a_min = -6.0;
  double speed_tau = 0.2;  // speed-command tracking time constant [s]
};

/// Rear-axle pose, speed, and the actuator values applied in the last step.
struct VehicleState {
  double x = 0.0, y = 0.0, psi = 0.0, v = 0.0;
  double delta = 0.0;
  double a = 0.0;
  FrenetPose frenet;
};

/// Either a speed command (tracked through a first-order lag) or an
/// acceleration, plus a steering command.
struct VehicleInput {
  double value = 0.0;
  double delta = 0.0;
  bool is_speed = true;
};

/// Rate- and range-limits the commands, then integrates the kinematic
/// bicycle with RK4 at constant (a, delta). Frenet fields are left as is.
VehicleState step_vehicle(const VehicleState& state, const VehicleInput& input, double dt,
                          const VehicleParams& params);

/// Ornstein-Uhlenbeck lateral offset of the opponent's tracked line.
struct OpponentNoise {
  double offset = 0.0;
  double stddev = 0.0;
  double corr_time = 1.0;

  void step(double dt, std::mt19937_64& rng);
};

/// Pure pursuit toward the racing line shifted by the noise offset, speed
/// S_max * v_ref(s). Uses state.frenet.s.
VehicleInput opponent_policy(const VehicleState& state, const Raceline& track, double s_max,
                             const OpponentNoise& noise, const VehicleParams& params);

/// Oriented rectangles around the geometric centres, each grown by `inflation`.
bool footprints_overlap(const VehicleState& a, const VehicleState& b, const VehicleParams& params,
                        double inflation);

struct EpisodeConfig {
  double s_max = 0.5;
  double dt = 0.01;
  double max_time = 60.0;
  double opp_noise_std = 0.05;
  double opp_noise_corr = 1.0;
  double perception_std = 0.03;
  std::uint64_t seed = 0;
  double s_c = 0.75;
  double planner_hz = 20.0;
  double start_gap = 2.25;  // ego behind the opponent [m]
  bool opponent = true;
  double warmup_max = 40.0;  // opponent-only data collection before the race [s]
  double rejoin_tol = 0.1;
  double opp_start_s = 0.0;
  double crash_inflation = 0.02;
  std::optional<FrenetPose> ego_start;  // overrides the start behind the opponent
  double ego_v0 = -1.0;                 // < 0: match the opponent's speed

  /// Raises config on inconsistent values.
  void validate() const;
};

struct EpisodeSetup {
  PlannerConfig planner{};
  SelectionConfig selection{};  // n_target and delta_s; ranges come from the track
  OpponentFitOptions fit{};
  VehicleParams vehicle{};
};

enum class Outcome { overtake, crash, timeout };

const char* to_string(Outcome outcome);

struct EpisodeResult {
  Outcome outcome = Outcome::timeout;
  double l = 0.0;               // path length over the maneuver [m]
  double T = 0.0;               // maneuver duration [s]
  double jerk_avg = 0.0;        // mean |da|/dt over the maneuver [m/s^3]
  double steer_rate_avg = 0.0;  // mean |d delta|/dt over the maneuver [rad/s]
  double compute_mean_ms = 0.0;
  double compute_std_ms = 0.0;
  std::vector<double> plan_ms;  // every plan_cycle wall time
  int overtake_cycles = 0;
  int fallback_cycles = 0;
  double sim_time = 0.0;
  double max_abs_n = 0.0;
  bool bound_violation = false;
  std::size_t max_buffer = 0;  // largest curated buffer seen at a lap boundary
  std::vector<double> lap_times;  // ego laps completed in the race phase
  std::string detail;
};

/// Warm-up lap of the opponent alone, a fit on the curated data, then the
/// race from `start_gap` behind with the planner at its cadence. Selection
/// and refit run once per opponent lap. Each planner tick writes one JSON
/// line to `log` when given.
EpisodeResult run_episode(const Raceline& track, const EpisodeConfig& cfg, const EpisodeSetup& setup,
                          std::ostream* log = nullptr);

/// N_ot / (N_ot + N_c); timeouts count for neither. Empty when no episode
/// ended in an overtake or a crash.
std::optional<double> compute_success_rate(const std::vector<EpisodeResult>& results);

}  // namespace fsdp
