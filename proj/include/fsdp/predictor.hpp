#pragma once

#include <optional>
#include <vector>

#include "fsdp/gp.hpp"
#include "fsdp/selection.hpp"

namespace fsdp {

/// Opponent models s -> d and s -> v. Without fitted models the estimate
/// answers with constants (used while the buffer is too small or degenerate).
struct OpponentEstimate {
  std::optional<SgpModel> sgp_d;
  std::optional<SgpModel> sgp_v;
  double const_d = 0.0;
  double const_v = 0.0;
  double track_length = 0.0;  // > 0 wraps query positions
  int last_update_lap = -1;

  bool has_models() const { return sgp_d.has_value() && sgp_v.has_value(); }
  Posterior lateral(double s) const;
  double speed(double s) const;
};

struct OpponentFitOptions {
  int num_inducing = 40;
  int iters = 200;
  std::uint64_t seed = 0;
};

/// Fits both opponent models on the curated buffers, warm-starting from
/// `previous` when it carries models. Falls back to the buffer means when a
/// fit is impossible (fewer than two points or all inputs identical).
OpponentEstimate fit_opponent(const std::vector<Observation>& lateral, const std::vector<Observation>& speed,
                              double track_length, const OpponentFitOptions& opts,
                              const OpponentEstimate* previous = nullptr);

struct PredictorConfig {
  double dt = 0.05;
  int horizon = 80;
  double s_c = 0.75;  // 1.5 x vehicle length
  double v_max = 7.0;
};

struct EgoKinematics {
  double s = 0.0;
  double v = 0.0;
  double a = 0.0;  // held constant over the rollout
};

/// Paired rollouts; index 0 is the initial state. Positions are unwrapped:
/// the opponent starts at ego.s plus the shortest signed gap on the loop.
struct Rollout {
  double dt = 0.0;
  std::vector<double> s_ego, v_ego, s_opp, v_opp;
};

Rollout forward_simulate(const EgoKinematics& ego, double opp_s, const OpponentEstimate& est,
                         const PredictorConfig& cfg);

struct CollisionInterval {
  bool exists = false;
  double c_start = 0.0;  // unwrapped ego arc length
  double c_end = 0.0;
  int k_start = -1;
  int k_end = -1;
};

CollisionInterval find_collision_interval(const Rollout& rollout, const PredictorConfig& cfg);

/// Posterior of the lateral model at s (delegates to sgp_d).
Posterior opponent_lateral(const OpponentEstimate& est, double s);

}  // namespace fsdp
