#include "fsdp/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "fsdp/common.hpp"
#include "json.hpp"

namespace fsdp {

namespace {

struct Deriv {
  double x, y, psi;
};

Deriv bicycle(double psi, double v, double delta, double wheelbase) {
  return {v * std::cos(psi), v * std::sin(psi), v * std::tan(delta) / wheelbase};
}

FrenetPose project(const Raceline& track, const VehicleState& s, double hint) {
  return track.cartesian_to_frenet(s.x, s.y, s.psi, hint, 5.0);
}

VehicleState place_on_line(const Raceline& track, double s, double v) {
  VehicleState st;
  const CartesianPose c = track.frenet_to_cartesian({s, 0.0, 0.0});
  st.x = c.x;
  st.y = c.y;
  st.psi = c.psi;
  st.v = v;
  st.frenet = {track.wrap(s), 0.0, 0.0};
  return st;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

const char* to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::overtake: return "overtake";
    case Outcome::crash: return "crash";
    case Outcome::timeout: return "timeout";
  }
  return "?";
}

VehicleState step_vehicle(const VehicleState& state, const VehicleInput& input, double dt,
                          const VehicleParams& p) {
  VehicleState out = state;
  const double dmax = p.delta_rate_max * dt;
  const double delta =
      std::clamp(std::clamp(input.delta, state.delta - dmax, state.delta + dmax), -p.delta_max, p.delta_max);
  double a = input.is_speed ? (input.value - state.v) / p.speed_tau : input.value;
  a = std::clamp(a, p.a_min, p.a_max);
  // Keep v inside [0, v_max] over the step.
  if (state.v + a * dt > p.v_max) a = (p.v_max - state.v) / dt;
  if (state.v + a * dt < 0.0) a = -state.v / dt;

  const double h = dt;
  const Deriv k1 = bicycle(state.psi, state.v, delta, p.wheelbase);
  const Deriv k2 = bicycle(state.psi + 0.5 * h * k1.psi, state.v + 0.5 * h * a, delta, p.wheelbase);
  const Deriv k3 = bicycle(state.psi + 0.5 * h * k2.psi, state.v + 0.5 * h * a, delta, p.wheelbase);
  const Deriv k4 = bicycle(state.psi + h * k3.psi, state.v + h * a, delta, p.wheelbase);
  out.x += h / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
  out.y += h / 6.0 * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y);
  out.psi = wrap_angle(state.psi + h / 6.0 * (k1.psi + 2.0 * k2.psi + 2.0 * k3.psi + k4.psi));
  out.v = std::clamp(state.v + a * dt, 0.0, p.v_max);
  out.delta = delta;
  out.a = a;
  return out;
}

void OpponentNoise::step(double dt, std::mt19937_64& rng) {
  if (stddev <= 0.0) {
    offset = 0.0;
    return;
  }
  std::normal_distribution<double> nd(0.0, 1.0);
  // Exact OU transition over dt.
  const double decay = std::exp(-dt / corr_time);
  offset = offset * decay + stddev * std::sqrt(1.0 - decay * decay) * nd(rng);
}

VehicleInput opponent_policy(const VehicleState& state, const Raceline& track, double s_max,
                             const OpponentNoise& noise, const VehicleParams& params) {
  const double ld = std::max(0.5, 0.5 * state.v);
  const CartesianPose target = track.frenet_to_cartesian({state.frenet.s + ld, noise.offset, 0.0});
  const double dx = target.x - state.x, dy = target.y - state.y;
  const double dist = std::max(std::hypot(dx, dy), 1e-6);
  const double alpha = wrap_angle(std::atan2(dy, dx) - state.psi);
  VehicleInput in;
  in.delta = std::atan(2.0 * params.wheelbase * std::sin(alpha) / dist);
  in.value = s_max * track.sample(state.frenet.s).v_ref;
  in.is_speed = true;
  return in;
}

bool footprints_overlap(const VehicleState& a, const VehicleState& b, const VehicleParams& p, double inflation) {
  struct Box {
    double cx, cy, c, s;
  };
  auto box = [&](const VehicleState& v) {
    const double c = std::cos(v.psi), s = std::sin(v.psi);
    return Box{v.x + 0.5 * p.wheelbase * c, v.y + 0.5 * p.wheelbase * s, c, s};
  };
  const Box A = box(a), B = box(b);
  const double hl = 0.5 * p.length + inflation, hw = 0.5 * p.width + inflation;
  const double tx = B.cx - A.cx, ty = B.cy - A.cy;
  // Separating axis test over the four box axes.
  const double axes[4][2] = {{A.c, A.s}, {-A.s, A.c}, {B.c, B.s}, {-B.s, B.c}};
  for (const auto& ax : axes) {
    const double dist = std::abs(tx * ax[0] + ty * ax[1]);
    const double ra = hl * std::abs(A.c * ax[0] + A.s * ax[1]) + hw * std::abs(-A.s * ax[0] + A.c * ax[1]);
    const double rb = hl * std::abs(B.c * ax[0] + B.s * ax[1]) + hw * std::abs(-B.s * ax[0] + B.c * ax[1]);
    if (dist > ra + rb) return false;
  }
  return true;
}

void EpisodeConfig::validate() const {
  if (!(s_max >= 0.0 && s_max <= 1.0)) raise(ErrorKind::config, "speed scaler must lie in [0, 1]");
  if (!(dt > 0.0)) raise(ErrorKind::config, "sim dt must be positive");
  if (!(max_time > 0.0)) raise(ErrorKind::config, "max_time must be positive");
  if (!(planner_hz > 0.0)) raise(ErrorKind::config, "planner cadence must be positive");
  const double ratio = 1.0 / (planner_hz * dt);
  if (std::abs(ratio - std::round(ratio)) > 1e-9 || std::round(ratio) < 1.0) {
    raise(ErrorKind::config, "planner period must be a whole number of sim steps");
  }
  if (opp_noise_std < 0.0 || perception_std < 0.0) raise(ErrorKind::config, "noise std must be >= 0");
  if (!(opp_noise_corr > 0.0)) raise(ErrorKind::config, "noise correlation time must be positive");
  if (!(s_c > 0.0)) raise(ErrorKind::config, "s_c must be positive");
  if (!ego_start && !(start_gap > s_c)) raise(ErrorKind::config, "start gap must exceed s_c");
  if (warmup_max < 0.0) raise(ErrorKind::config, "warmup_max must be >= 0");
  if (!(rejoin_tol > 0.0)) raise(ErrorKind::config, "rejoin tolerance must be positive");
}

EpisodeResult run_episode(const Raceline& track, const EpisodeConfig& cfg, const EpisodeSetup& setup,
                          std::ostream* log) {
  using nlohmann::json;
  cfg.validate();
  if (!track.closed()) raise(ErrorKind::config, "episodes need a closed track");
  const double L = track.length();
  const VehicleParams& vp = setup.vehicle;
  const int every = static_cast<int>(std::lround(1.0 / (cfg.planner_hz * cfg.dt)));
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> percept(0.0, 1.0);

  double bound = 0.0;
  for (const auto& w : track.waypoints()) bound = std::max({bound, w.d_left, w.d_right});
  SelectionConfig sel_d = setup.selection;
  sel_d.track_length = L;
  sel_d.y_min = -bound;
  sel_d.y_max = bound;
  SelectionConfig sel_v = setup.selection;
  sel_v.track_length = L;
  sel_v.y_min = 0.0;
  sel_v.y_max = vp.v_max;
  ObservationBuffer buf_d(sel_d), buf_v(sel_v);
  std::vector<Observation> in_d, in_v;
  OpponentEstimate est;
  est.track_length = L;
  OpponentFitOptions fit = setup.fit;
  EpisodeResult res;

  VehicleState opp = place_on_line(track, cfg.opp_start_s, 0.0);
  opp.v = cfg.s_max * track.sample(opp.frenet.s).v_ref;
  OpponentNoise noise{0.0, cfg.opp_noise_std, cfg.opp_noise_corr};
  int opp_lap = 0;
  double opp_travel = 0.0;

  auto observe = [&](double t) {
    const double s = track.wrap(opp.frenet.s + cfg.perception_std * percept(rng));
    in_d.push_back({s, opp.frenet.n + cfg.perception_std * percept(rng), t, opp_lap});
    in_v.push_back({s, std::max(0.0, opp.v + cfg.perception_std * percept(rng)), t, opp_lap});
  };
  auto step_opponent = [&]() {
    noise.step(cfg.dt, rng);
    const VehicleInput in = opponent_policy(opp, track, cfg.s_max, noise, vp);
    const double s_prev = opp.frenet.s;
    opp = step_vehicle(opp, in, cfg.dt, vp);
    opp.frenet = project(track, opp, s_prev);
    opp_travel += track.delta_s(s_prev, opp.frenet.s);
  };
  auto refresh_model = [&]() {
    buf_d.update(in_d, est.sgp_d ? &*est.sgp_d : nullptr);
    buf_v.update(in_v, est.sgp_v ? &*est.sgp_v : nullptr);
    in_d.clear();
    in_v.clear();
    res.max_buffer = std::max({res.max_buffer, buf_d.size(), buf_v.size()});
    fit.seed = setup.fit.seed + static_cast<std::uint64_t>(opp_lap);
    est = fit_opponent(buf_d.train(), buf_v.train(), L, fit, &est);
    est.last_update_lap = opp_lap;
  };

  // Warm-up: the opponent alone until it completes a lap.
  if (cfg.opponent) {
    const int steps = static_cast<int>(std::ceil(cfg.warmup_max / cfg.dt - 1e-9));
    for (int i = 0; i < steps && opp_travel < L; ++i) {
      if (i % every == 0) observe(i * cfg.dt);
      step_opponent();
    }
    refresh_model();
    opp_lap = 1;
    opp_travel = 0.0;
  }

  double v0 = cfg.opponent ? std::min(opp.v, track.sample(opp.frenet.s - cfg.start_gap).v_ref) : 0.0;
  if (cfg.ego_v0 >= 0.0) v0 = std::min(cfg.ego_v0, vp.v_max);
  VehicleState ego = place_on_line(track, cfg.opponent ? opp.frenet.s - cfg.start_gap : 0.0, v0);
  if (cfg.ego_start) {
    const CartesianPose c = track.frenet_to_cartesian(*cfg.ego_start);
    ego.x = c.x;
    ego.y = c.y;
    ego.psi = c.psi;
    ego.frenet = {track.wrap(cfg.ego_start->s), cfg.ego_start->n, cfg.ego_start->theta};
  }
  ego.delta = std::clamp(std::atan(vp.wheelbase * track.sample(ego.frenet.s).kappa), -vp.delta_max, vp.delta_max);
  Planner planner(track, setup.planner);
  Eigen::Vector2d u_prev(ego.v, ego.delta);
  VehicleInput command{ego.v, ego.delta, true};

  std::vector<double> xs{ego.x}, ys{ego.y}, as{ego.a}, ds{ego.delta};
  json trace = json::array();  // sim-step positions since the last record
  std::ptrdiff_t window_start = -1;
  double ego_travel = 0.0, lap_start = 0.0;
  const int steps = static_cast<int>(std::ceil(cfg.max_time / cfg.dt - 1e-9));
  int step = 0;
  bool done = false;
  for (; step < steps && !done; ++step) {
    const double t = step * cfg.dt;
    if (step % every == 0) {
      WorldSnapshot world;
      world.ego = Eigen::Vector3d(ego.frenet.s, ego.frenet.n, ego.frenet.theta);
      world.ego_v = ego.v;
      world.ego_a = ego.a;
      world.u_prev = u_prev;
      if (cfg.opponent) {
        observe(t);
        world.opponent = true;
        world.opp_s = in_d.back().x;
        world.opp_n = in_d.back().y;
        world.opp_v = in_v.back().y;
        world.estimate = &est;
      }
      const PlanResult plan = planner.plan_cycle(world);
      res.plan_ms.push_back(plan.times.total);
      if (plan.mode == PlanMode::overtake) {
        ++res.overtake_cycles;
        if (window_start < 0) window_start = static_cast<std::ptrdiff_t>(xs.size()) - 1;
      }
      if (!plan.fallback.empty()) ++res.fallback_cycles;
      command = {plan.command[0], plan.command[1], true};
      u_prev = plan.command;

      if (log) {
        json rec;
        rec["t"] = t;
        rec["mode"] = to_string(plan.mode);
        rec["ego"] = {{"s", ego.frenet.s}, {"n", ego.frenet.n}, {"theta", ego.frenet.theta}, {"v", ego.v},
                      {"x", ego.x}, {"y", ego.y}};
        if (cfg.opponent) {
          rec["opp"] = {{"s", opp.frenet.s}, {"n", opp.frenet.n}, {"v", opp.v}, {"x", opp.x}, {"y", opp.y}};
        }
        rec["times_ms"] = {{"predict", plan.times.predict}, {"seed", plan.times.seed}, {"mpc", plan.times.mpc},
                           {"total", plan.times.total}};
        rec["command"] = {plan.command[0], plan.command[1]};
        rec["trace"] = std::move(trace);
        trace = json::array();
        if (plan.interval.exists) rec["interval"] = {plan.interval.c_start, plan.interval.c_end};
        if (plan.mpc) {
          rec["mpc"] = {{"status", to_string(plan.mpc->status)},
                        {"iterations", plan.mpc->iterations},
                        {"primal_residual", plan.mpc->primal_residual},
                        {"objective", plan.mpc->objective}};
        }
        if (plan.mode == PlanMode::overtake) {
          json seed = json::array(), corridor = json::array();
          for (std::size_t k = 0; k < plan.refs.u_ref.size(); ++k) {
            seed.push_back({plan.refs.x_ref[k][0], plan.refs.x_ref[k][1], plan.refs.u_ref[k][0],
                            plan.refs.u_ref[k][1]});
            corridor.push_back({plan.corridor.lower[k], plan.corridor.upper[k]});
          }
          rec["side"] = to_string(plan.keypoints->side);
          rec["seed"] = std::move(seed);
          rec["corridor"] = std::move(corridor);
        }
        if (!plan.fallback.empty()) rec["fallback"] = plan.fallback;
        *log << rec.dump() << '\n';
      }
    }

    const double s_prev = ego.frenet.s;
    ego = step_vehicle(ego, command, cfg.dt, vp);
    ego.frenet = project(track, ego, s_prev);
    ego_travel += track.delta_s(s_prev, ego.frenet.s);
    if (ego_travel >= L) {
      res.lap_times.push_back(t + cfg.dt - lap_start);
      lap_start = t + cfg.dt;
      ego_travel -= L;
    }
    xs.push_back(ego.x);
    ys.push_back(ego.y);
    if (log) trace.push_back({ego.x, ego.y});
    as.push_back(ego.a);
    ds.push_back(ego.delta);

    if (cfg.opponent) {
      step_opponent();
      if (opp_travel >= L) {
        opp_travel -= L;
        refresh_model();
        ++opp_lap;
      }
    }

    const TrackSample ts = track.sample(ego.frenet.s);
    res.max_abs_n = std::max(res.max_abs_n, std::abs(ego.frenet.n));
    if (ego.frenet.n > ts.d_left || -ego.frenet.n > ts.d_right) {
      res.outcome = Outcome::crash;
      res.bound_violation = true;
      res.detail = "track bound at s=" + std::to_string(ego.frenet.s);
      done = true;
    } else if (cfg.opponent && footprints_overlap(ego, opp, vp, cfg.crash_inflation)) {
      res.outcome = Outcome::crash;
      res.detail = "contact at s=" + std::to_string(ego.frenet.s);
      done = true;
    } else if (cfg.opponent && periodic_delta(opp.frenet.s, ego.frenet.s, L) >= cfg.s_c &&
               std::abs(ego.frenet.n) < cfg.rejoin_tol) {
      res.outcome = Outcome::overtake;
      done = true;
    }
  }
  res.sim_time = step * cfg.dt;

  if (window_start < 0 && res.outcome == Outcome::overtake) window_start = 0;
  if (window_start >= 0) {
    const auto end = static_cast<std::ptrdiff_t>(xs.size()) - 1;
    std::vector<double> jerk, steer;
    for (std::ptrdiff_t i = window_start + 1; i <= end; ++i) {
      const auto u = static_cast<std::size_t>(i);
      res.l += std::hypot(xs[u] - xs[u - 1], ys[u] - ys[u - 1]);
      jerk.push_back(std::abs(as[u] - as[u - 1]) / cfg.dt);
      steer.push_back(std::abs(ds[u] - ds[u - 1]) / cfg.dt);
    }
    res.T = static_cast<double>(end - window_start) * cfg.dt;
    res.jerk_avg = mean_of(jerk);
    res.steer_rate_avg = mean_of(steer);
  }
  res.compute_mean_ms = mean_of(res.plan_ms);
  double var = 0.0;
  for (double x : res.plan_ms) var += (x - res.compute_mean_ms) * (x - res.compute_mean_ms);
  res.compute_std_ms = res.plan_ms.size() > 1 ? std::sqrt(var / static_cast<double>(res.plan_ms.size() - 1)) : 0.0;

  if (log) {
    json end;
    end["event"] = "end";
    end["outcome"] = to_string(res.outcome);
    end["l"] = res.l;
    end["T"] = res.T;
    end["jerk_avg"] = res.jerk_avg;
    end["steer_rate_avg"] = res.steer_rate_avg;
    end["detail"] = res.detail;
    end["t"] = res.sim_time;
    end["ego"] = {{"s", ego.frenet.s}, {"n", ego.frenet.n}, {"v", ego.v}, {"x", ego.x}, {"y", ego.y}};
    end["trace"] = std::move(trace);
    *log << end.dump() << '\n';
  }
  return res;
}

std::optional<double> compute_success_rate(const std::vector<EpisodeResult>& results) {
  int ot = 0, crash = 0;
  for (const auto& r : results) {
    if (r.outcome == Outcome::overtake) ++ot;
    if (r.outcome == Outcome::crash) ++crash;
  }
  if (ot + crash == 0) return std::nullopt;
  return static_cast<double>(ot) / static_cast<double>(ot + crash);
}

}  // namespace fsdp
