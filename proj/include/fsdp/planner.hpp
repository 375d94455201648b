#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>

#include "fsdp/mpc.hpp"
#include "fsdp/predictor.hpp"
#include "fsdp/seed.hpp"
#include "fsdp/track.hpp"

namespace fsdp {

enum class PlanMode { racing, overtake, trailing };

const char* to_string(PlanMode mode);

struct PlannerConfig {
  PredictorConfig predictor{};
  KeyPointOptions keypoints{
      .margin = 0.6, .edge_margin = 0.15, .lead_time = 1.0, .lead_floor = 1.5, .lead_per_interval = 1.0, .preferred = {}};
  CorridorOptions corridor{.margin = 0.35, .edge_margin = 0.15, .lambda_sigma = 0.0};
  MpcConfig mpc{};
  double seed_ds = 0.1;
  double seed_v_min = 1.0;     // floor for the seed's constant speed [m/s]
  double flat_v_min = 0.05;    // degenerate-speed floor for flat references
  double trailing_gap = 1.5;   // bumper-to-centre standoff kept while trailing [m]
  double trailing_gain = 1.5;  // speed per metre of gap error [1/s]
  double brake = 6.0;          // deceleration used for the stopping-distance cap [m/s^2]
};

/// Everything the planner sees in one cycle. Poses are Frenet with s wrapped
/// to the track; the opponent pose is the perceived one.
struct WorldSnapshot {
  Eigen::Vector3d ego = Eigen::Vector3d::Zero();  // s, n, theta
  double ego_v = 0.0;
  double ego_a = 0.0;
  Eigen::Vector2d u_prev = Eigen::Vector2d::Zero();  // last applied (v, delta)
  bool opponent = false;
  double opp_s = 0.0;
  double opp_n = 0.0;
  double opp_v = 0.0;
  const OpponentEstimate* estimate = nullptr;
};

/// Wall times of one cycle [ms]. total covers the whole call.
struct StageTimes {
  double predict = 0.0;
  double seed = 0.0;
  double mpc = 0.0;
  double total = 0.0;
};

struct PlanResult {
  PlanMode mode = PlanMode::racing;
  Eigen::Vector2d command = Eigen::Vector2d::Zero();  // (v, delta) to apply now
  FlatReferences refs;
  Corridor corridor;
  std::optional<MpcSolution> mpc;
  CollisionInterval interval;
  std::optional<KeyPointSet> keypoints;
  std::optional<QuinticTraj> seed;
  double seed_t0 = 0.0;
  StageTimes times;
  std::string fallback;  // why trailing was chosen
};

/// Predictor -> seed -> MPC per cycle, with racing-line pass-through when no
/// collision is predicted and trailing when a stage fails. Keeps the last
/// overtaking side and MPC warm start across cycles; one per episode.
class Planner {
 public:
  Planner(const Raceline& track, PlannerConfig cfg = {});

  PlanResult plan_cycle(const WorldSnapshot& world);

  const PlannerConfig& config() const { return cfg_; }

 private:
  void racing(const WorldSnapshot& world, PlanResult& out);
  void overtake(const WorldSnapshot& world, PlanResult& out);
  void trailing(const WorldSnapshot& world, PlanResult& out);
  Eigen::Vector2d fallback_command(const WorldSnapshot& world, double v_target) const;

  const Raceline* track_;
  PlannerConfig cfg_;
  MpcSolver mpc_;
  std::optional<Side> side_;
};

}  // namespace fsdp
