#include "fsdp/predictor.hpp"

#include <algorithm>
#include <cmath>

#include "fsdp/common.hpp"

namespace fsdp {

namespace {

double wrap_query(const OpponentEstimate& est, double s) {
  return est.track_length > 0.0 ? wrap_periodic(s, est.track_length) : s;
}

// Advances s, v over dt with constant a, stopping the acceleration once v
// reaches 0 or v_max.
void advance(double& s, double& v, double a, double dt, double v_max) {
  const double v_next = v + a * dt;
  if (v_next >= 0.0 && v_next <= v_max) {
    s += v * dt + 0.5 * a * dt * dt;
    v = v_next;
    return;
  }
  const double bound = v_next < 0.0 ? 0.0 : v_max;
  const double tb = (bound - v) / a;
  s += v * tb + 0.5 * a * tb * tb + bound * (dt - tb);
  v = bound;
}

std::optional<SgpModel> try_fit(const std::vector<Observation>& obs, const OpponentFitOptions& opts,
                                const std::optional<SgpModel>& previous) {
  if (obs.size() < 2) return std::nullopt;
  Eigen::VectorXd x(static_cast<Eigen::Index>(obs.size())), y(x.size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    x[static_cast<Eigen::Index>(i)] = obs[i].x;
    y[static_cast<Eigen::Index>(i)] = obs[i].y;
  }
  SgpFitOptions o;
  o.num_inducing = opts.num_inducing;
  o.iters = opts.iters;
  o.seed = opts.seed;
  if (previous && previous->inducing().size() == std::min<Eigen::Index>(opts.num_inducing, x.size())) {
    o.kernel = previous->kernel();
    o.noise_variance = previous->noise_variance();
    o.inducing = previous->inducing();
  }
  try {
    return fit_sgp(x, y, o);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::fit || e.kind() == ErrorKind::model_degenerate) return std::nullopt;
    throw;
  }
}

double mean_y(const std::vector<Observation>& obs) {
  if (obs.empty()) return 0.0;
  double s = 0.0;
  for (const auto& o : obs) s += o.y;
  return s / static_cast<double>(obs.size());
}

}  // namespace

Posterior OpponentEstimate::lateral(double s) const {
  if (sgp_d) return sgp_d->predict(wrap_query(*this, s));
  return {const_d, 0.0};
}

double OpponentEstimate::speed(double s) const {
  if (sgp_v) return sgp_v->predict(wrap_query(*this, s)).mean;
  return const_v;
}

OpponentEstimate fit_opponent(const std::vector<Observation>& lateral, const std::vector<Observation>& speed,
                              double track_length, const OpponentFitOptions& opts, const OpponentEstimate* previous) {
  OpponentEstimate est;
  est.track_length = track_length;
  est.const_d = mean_y(lateral);
  est.const_v = mean_y(speed);
  est.sgp_d = try_fit(lateral, opts, previous ? previous->sgp_d : std::nullopt);
  est.sgp_v = try_fit(speed, opts, previous ? previous->sgp_v : std::nullopt);
  if (!est.sgp_d || !est.sgp_v) {
    est.sgp_d.reset();
    est.sgp_v.reset();
  }
  return est;
}

Rollout forward_simulate(const EgoKinematics& ego, double opp_s, const OpponentEstimate& est,
                         const PredictorConfig& cfg) {
  Rollout r;
  r.dt = cfg.dt;
  const auto n = static_cast<std::size_t>(cfg.horizon) + 1;
  r.s_ego.resize(n);
  r.v_ego.resize(n);
  r.s_opp.resize(n);
  r.v_opp.resize(n);
  double se = ego.s, ve = std::clamp(ego.v, 0.0, cfg.v_max);
  double so = est.track_length > 0.0 ? ego.s + periodic_delta(ego.s, opp_s, est.track_length) : opp_s;
  double vo = std::clamp(est.speed(so), 0.0, cfg.v_max);
  r.s_ego[0] = se;
  r.v_ego[0] = ve;
  r.s_opp[0] = so;
  r.v_opp[0] = vo;
  for (std::size_t k = 1; k < n; ++k) {
    advance(se, ve, ego.a, cfg.dt, cfg.v_max);
    so += vo * cfg.dt;
    vo = std::clamp(est.speed(so), 0.0, cfg.v_max);
    r.s_ego[k] = se;
    r.v_ego[k] = ve;
    r.s_opp[k] = so;
    r.v_opp[k] = vo;
  }
  return r;
}

CollisionInterval find_collision_interval(const Rollout& r, const PredictorConfig& cfg) {
  CollisionInterval ci;
  const auto n = static_cast<int>(r.s_ego.size());
  for (int k = 0; k < n; ++k) {
    const double gap = std::abs(r.s_opp[static_cast<std::size_t>(k)] - r.s_ego[static_cast<std::size_t>(k)]);
    if (!ci.exists) {
      if (gap < cfg.s_c) {
        ci.exists = true;
        ci.k_start = k;
        ci.c_start = r.s_ego[static_cast<std::size_t>(k)];
      }
    } else if (gap >= cfg.s_c) {
      ci.k_end = k;
      ci.c_end = r.s_ego[static_cast<std::size_t>(k)];
      if (!(ci.c_end > ci.c_start)) ci = CollisionInterval{};
      return ci;
    }
  }
  if (ci.exists) {
    ci.k_end = n - 1;
    ci.c_end = r.s_ego.back();
    // A stationary ego never enters the span; there is nothing to plan around.
    if (!(ci.c_end > ci.c_start)) ci = CollisionInterval{};
  }
  return ci;
}

Posterior opponent_lateral(const OpponentEstimate& est, double s) { return est.lateral(s); }

}  // namespace fsdp
