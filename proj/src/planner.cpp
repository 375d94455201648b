#include "fsdp/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "fsdp/common.hpp"

namespace fsdp {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t) { return std::chrono::duration<double, std::milli>(Clock::now() - t).count(); }

}  // namespace

const char* to_string(PlanMode mode) {
  switch (mode) {
    case PlanMode::racing: return "racing";
    case PlanMode::overtake: return "overtake";
    case PlanMode::trailing: return "trailing";
  }
  return "?";
}

Planner::Planner(const Raceline& track, PlannerConfig cfg)
    : track_(&track), cfg_(std::move(cfg)), mpc_(track, cfg_.mpc) {}

PlanResult Planner::plan_cycle(const WorldSnapshot& world) {
  const auto start = Clock::now();
  PlanResult out;
  if (!world.opponent || world.estimate == nullptr) {
    side_.reset();
    racing(world, out);
    out.times.total = ms_since(start);
    return out;
  }

  const auto t_pred = Clock::now();
  const Rollout roll =
      forward_simulate({world.ego[0], world.ego_v, world.ego_a}, world.opp_s, *world.estimate, cfg_.predictor);
  out.interval = find_collision_interval(roll, cfg_.predictor);
  out.times.predict = ms_since(t_pred);

  if (!out.interval.exists) {
    side_.reset();
    racing(world, out);
  } else {
    try {
      overtake(world, out);
    } catch (const Error& e) {
      out.fallback = std::string(to_string(e.kind())) + ": " + e.what();
      side_.reset();
      trailing(world, out);
    }
  }
  out.times.total = ms_since(start);
  return out;
}

void Planner::racing(const WorldSnapshot& world, PlanResult& out) {
  const MpcConfig& m = cfg_.mpc;
  out.mode = PlanMode::racing;
  std::vector<double> speeds;
  double s = world.ego[0], v = world.u_prev[0];
  for (int k = 0; k < m.N; ++k) {
    const double target = std::min(track_->sample(s).v_ref, m.u_max[0]);
    v = std::clamp(target, std::max(v + m.du_min[0], m.u_min[0]), std::min(v + m.du_max[0], m.u_max[0]));
    speeds.push_back(v);
    s += v * m.dt;
  }
  out.refs = racing_line_references(*track_, world.ego[0], speeds, m.dt, m.wheelbase);
  std::vector<double> s_refs;
  for (std::size_t k = 1; k < out.refs.x_ref.size(); ++k) s_refs.push_back(out.refs.x_ref[k][0]);
  out.corridor = build_corridor(s_refs, CollisionInterval{}, OpponentEstimate{}, *track_, Side::left, cfg_.corridor);
  const auto t_mpc = Clock::now();
  out.mpc = mpc_.solve(world.ego, out.refs, out.corridor, world.u_prev);
  out.times.mpc = ms_since(t_mpc);
  out.command = out.mpc->solved() ? out.mpc->U[0] : fallback_command(world, speeds.front());
}

void Planner::overtake(const WorldSnapshot& world, PlanResult& out) {
  const MpcConfig& m = cfg_.mpc;
  const OpponentEstimate& est = *world.estimate;
  out.mode = PlanMode::overtake;
  const auto t_seed = Clock::now();

  // Constant seed speed: current speed, floored, capped by the slowest
  // reference speed over the coming stretch.
  double v_cap = m.u_max[0];
  const double reach = out.interval.c_end + std::max(world.ego_v, cfg_.seed_v_min) * 2.0 + cfg_.keypoints.lead_floor;
  for (double s = world.ego[0]; s <= reach; s += 0.5) v_cap = std::min(v_cap, track_->sample(s).v_ref);
  const double v_seed = std::max(std::min(world.ego_v, v_cap), cfg_.seed_v_min);

  KeyPointOptions kopt = cfg_.keypoints;
  kopt.preferred = side_;
  out.keypoints = choose_key_points(out.interval, est, *track_, v_seed, kopt);
  side_ = out.keypoints->side;
  const RoughPath rough = interpolate_rough(*out.keypoints, cfg_.seed_ds, v_seed);
  out.seed = fit_quintic(rough);
  out.seed_t0 = (world.ego[0] - out.keypoints->k[0].s) / v_seed;
  out.refs = extract_flat_references(*out.seed, *track_, m.N, m.dt,
                                     {.wheelbase = m.wheelbase, .delta_max = m.u_max[1], .v_min = cfg_.flat_v_min,
                                      .t0 = out.seed_t0});
  std::vector<double> s_refs;
  for (std::size_t k = 1; k < out.refs.x_ref.size(); ++k) s_refs.push_back(out.refs.x_ref[k][0]);
  out.corridor = build_corridor(s_refs, out.interval, est, *track_, out.keypoints->side, cfg_.corridor);
  out.times.seed = ms_since(t_seed);

  const auto t_mpc = Clock::now();
  out.mpc = mpc_.solve(world.ego, out.refs, out.corridor, world.u_prev);
  out.times.mpc = ms_since(t_mpc);
  if (!out.mpc->solved()) raise(ErrorKind::solver, std::string("mpc: ") + to_string(out.mpc->status));
  out.command = out.mpc->U[0];
}

void Planner::trailing(const WorldSnapshot& world, PlanResult& out) {
  const MpcConfig& m = cfg_.mpc;
  const double s_c = cfg_.predictor.s_c;
  out.mode = PlanMode::trailing;
  const double gap = track_->closed() ? periodic_delta(world.ego[0], world.opp_s, track_->length())
                                      : world.opp_s - world.ego[0];
  const double v_line = std::min(track_->sample(world.ego[0]).v_ref, m.u_max[0]);
  double target = v_line;
  if (gap > 0.0) {
    const double want = s_c + cfg_.trailing_gap;
    const double v_stop = std::sqrt(std::max(0.0, world.opp_v * world.opp_v + 2.0 * cfg_.brake * (gap - s_c)));
    target = std::clamp(world.opp_v + cfg_.trailing_gain * (gap - want), 0.0, std::min(v_line, v_stop));
  }

  std::vector<double> speeds;
  double v = world.u_prev[0];
  for (int k = 0; k < m.N; ++k) {
    v = std::clamp(target, std::max(v + m.du_min[0], m.u_min[0]), std::min(v + m.du_max[0], m.u_max[0]));
    speeds.push_back(v);
  }
  out.refs = racing_line_references(*track_, world.ego[0], speeds, m.dt, m.wheelbase);
  std::vector<double> s_refs;
  for (std::size_t k = 1; k < out.refs.x_ref.size(); ++k) s_refs.push_back(out.refs.x_ref[k][0]);
  out.corridor = build_corridor(s_refs, CollisionInterval{}, OpponentEstimate{}, *track_, Side::left, cfg_.corridor);

  // Alongside the opponent: stay on the current side instead of merging.
  const double lateral = world.ego[1] - world.opp_n;
  if (std::abs(gap) < s_c + 0.5 && std::abs(lateral) >= cfg_.corridor.margin) {
    for (std::size_t k = 0; k < s_refs.size(); ++k) {
      if (lateral > 0.0) {
        out.corridor.lower[k] = std::max(out.corridor.lower[k], world.opp_n + cfg_.corridor.margin);
      } else {
        out.corridor.upper[k] = std::min(out.corridor.upper[k], world.opp_n - cfg_.corridor.margin);
      }
    }
  }

  const auto t_mpc = Clock::now();
  out.mpc = mpc_.solve(world.ego, out.refs, out.corridor, world.u_prev);
  out.times.mpc = ms_since(t_mpc);
  out.command = out.mpc->solved() ? out.mpc->U[0] : fallback_command(world, speeds.front());
}

Eigen::Vector2d Planner::fallback_command(const WorldSnapshot& world, double v_target) const {
  const MpcConfig& m = cfg_.mpc;
  const double kappa = track_->sample(world.ego[0]).kappa;
  const double delta = std::atan(m.wheelbase * kappa) - 1.0 * world.ego[1] - 1.5 * world.ego[2];
  Eigen::Vector2d u;
  for (int j = 0; j < 2; ++j) {
    const double want = j == 0 ? v_target : delta;
    u[j] = std::clamp(want, std::max(world.u_prev[j] + m.du_min[j], m.u_min[j]),
                      std::min(world.u_prev[j] + m.du_max[j], m.u_max[j]));
  }
  return u;
}

}  // namespace fsdp
