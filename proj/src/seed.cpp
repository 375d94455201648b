#include "fsdp/seed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fsdp/common.hpp"

namespace fsdp {

const char* to_string(Side side) { return side == Side::left ? "left" : "right"; }

KeyPointSet choose_key_points(const CollisionInterval& interval, const OpponentEstimate& est, const Raceline& track,
                              double ego_v, const KeyPointOptions& opt) {
  if (!interval.exists) raise(ErrorKind::invalid_input, "key points need a collision interval");
  if (!(interval.c_end > interval.c_start)) raise(ErrorKind::invalid_input, "empty collision interval");
  const double lead = std::max({std::max(ego_v, 0.0) * opt.lead_time, opt.lead_floor,
                                opt.lead_per_interval * (interval.c_end - interval.c_start)});
  if (!(lead > 0.0)) raise(ErrorKind::invalid_input, "lead distance must be positive");

  KeyPointSet kps;
  const double mid[3] = {interval.c_start, 0.5 * (interval.c_start + interval.c_end), interval.c_end};
  double d_opp[3], lim_l[3], lim_r[3];
  double clear_l = std::numeric_limits<double>::infinity(), clear_r = clear_l;
  for (int i = 0; i < 3; ++i) {
    const TrackSample ts = track.sample(mid[i]);
    d_opp[i] = est.lateral(mid[i]).mean;
    lim_l[i] = ts.d_left - opt.edge_margin;
    lim_r[i] = ts.d_right - opt.edge_margin;
    clear_l = std::min(clear_l, lim_l[i] - d_opp[i]);
    clear_r = std::min(clear_r, lim_r[i] + d_opp[i]);
  }
  kps.side = clear_l >= clear_r ? Side::left : Side::right;
  if (opt.preferred && (*opt.preferred == Side::left ? clear_l : clear_r) >= opt.margin) kps.side = *opt.preferred;
  const double best = std::max(clear_l, clear_r);
  if (!(best >= opt.margin)) {
    raise(ErrorKind::no_feasible_gap,
          "no side leaves " + std::to_string(opt.margin) + " m beside the opponent (best " + std::to_string(best) + ")");
  }
  const double sign = kps.side == Side::left ? 1.0 : -1.0;
  kps.k[0] = {interval.c_start - lead, 0.0};
  for (int i = 0; i < 3; ++i) {
    kps.k[static_cast<std::size_t>(i + 1)] = {mid[i], std::clamp(d_opp[i] + sign * opt.margin, -lim_r[i], lim_l[i])};
  }
  kps.k[4] = {interval.c_end + lead, 0.0};
  return kps;
}

RoughPath interpolate_rough(const KeyPointSet& kps, double ds, double ego_v) {
  if (!(ds > 0.0)) raise(ErrorKind::invalid_input, "sample step must be positive");
  if (!(ego_v > 0.0)) raise(ErrorKind::invalid_input, "rough path speed must be positive");
  for (std::size_t i = 1; i < kps.k.size(); ++i) {
    if (!(kps.k[i].s > kps.k[i - 1].s)) raise(ErrorKind::invalid_input, "key points must increase in s");
  }
  const double s0 = kps.k.front().s, s1 = kps.k.back().s;
  const int segs = std::max(5, static_cast<int>(std::ceil((s1 - s0) / ds - 1e-9)));
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(segs) + 4);
  for (int i = 0; i <= segs; ++i) grid.push_back(i == segs ? s1 : s0 + (s1 - s0) * i / segs);
  // Key points are always samples so the corners survive.
  for (std::size_t i = 1; i + 1 < kps.k.size(); ++i) grid.push_back(kps.k[i].s);
  std::sort(grid.begin(), grid.end());
  const double tol = 1e-9 * std::max(1.0, std::abs(s1 - s0));
  grid.erase(std::unique(grid.begin(), grid.end(), [&](double a, double b) { return b - a <= tol; }), grid.end());

  RoughPath r;
  r.speed = ego_v;
  std::size_t seg = 0;
  for (double s : grid) {
    while (seg + 2 < kps.k.size() && s > kps.k[seg + 1].s) ++seg;
    const KeyPoint& a = kps.k[seg];
    const KeyPoint& b = kps.k[seg + 1];
    const double f = std::clamp((s - a.s) / (b.s - a.s), 0.0, 1.0);
    r.s.push_back(s);
    r.d.push_back(a.d + f * (b.d - a.d));
    r.t.push_back((s - s0) / ego_v);
  }
  return r;
}

double QuinticTraj::eval(const Coeffs6& c, double t, int order) {
  double out = 0.0;
  for (int j = 5; j >= order; --j) {
    double f = 1.0;
    for (int m = 0; m < order; ++m) f *= j - m;
    out = out * t + f * c[j];
  }
  return out;
}

Coeffs6 fit_quintic_axis(const std::vector<double>& t, const std::vector<double>& p, double T,
                         const QpSettings& settings, std::optional<std::pair<double, double>> end_slopes) {
  const std::size_t n = t.size();
  if (n < 6 || p.size() != n) raise(ErrorKind::invalid_input, "quintic fit needs at least 6 samples");
  if (!(T > 0.0)) raise(ErrorKind::invalid_input, "quintic duration must be positive");

  // Fit in tau = t / T for conditioning, then rescale.
  Eigen::MatrixXd phi(static_cast<Eigen::Index>(n), 6);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const double tau = t[i] / T;
    double b = 1.0;
    for (int j = 0; j < 6; ++j, b *= tau) phi(r, j) = b;
    y[r] = p[i];
    if (i > 0) w[r] += 0.5 * (t[i] - t[i - 1]);
    if (i + 1 < n) w[r] += 0.5 * (t[i + 1] - t[i]);
  }
  if (!(w.minCoeff() > 0.0)) raise(ErrorKind::invalid_input, "sample times must increase");
  w /= w.sum();

  QpProblem qp;
  qp.H = 2.0 * phi.transpose() * w.asDiagonal() * phi;
  qp.H = 0.5 * (qp.H + qp.H.transpose()).eval();
  qp.g = -2.0 * phi.transpose() * w.asDiagonal() * y;
  qp.A = Eigen::MatrixXd::Zero(4, 6);
  qp.A(0, 0) = 1.0;
  qp.A(1, 1) = 1.0 / T;
  for (int j = 0; j < 6; ++j) {
    qp.A(2, j) = 1.0;
    qp.A(3, j) = j / T;
  }
  if (!end_slopes) end_slopes = {(p[1] - p[0]) / (t[1] - t[0]), (p[n - 1] - p[n - 2]) / (t[n - 1] - t[n - 2])};
  const Eigen::Vector4d target(p.front(), end_slopes->first, p.back(), end_slopes->second);
  qp.l = target;
  qp.u = target;
  const QpSolution sol = solve_qp(qp, settings);
  if (sol.status != QpStatus::solved) {
    raise(ErrorKind::solver, std::string("quintic fit: ") + to_string(sol.status));
  }
  Coeffs6 c;
  double scale = 1.0;
  for (int j = 0; j < 6; ++j, scale /= T) c[j] = sol.x[j] * scale;
  return c;
}

QuinticTraj fit_quintic(const RoughPath& rough, const QpSettings& settings) {
  QuinticTraj q;
  q.T = rough.duration();
  q.coeffs_s = fit_quintic_axis(rough.t, rough.s, q.T, settings);
  q.coeffs_d = fit_quintic_axis(rough.t, rough.d, q.T, settings);
  return q;
}

FlatPoint flat_point(const Raceline& track, double s, double sd, double sdd, double n, double nd, double ndd,
                     double wheelbase) {
  const TrackSample c = track.sample(s);
  const double k = c.kappa, dk = c.dkappa_ds;
  const double scale = 1.0 - k * n;
  if (!(scale > 0.0)) raise(ErrorKind::geometry, "lateral offset folds over the centerline at s=" + std::to_string(s));
  // Velocity and acceleration in the moving tangent/normal frame.
  const double vt = scale * sd;
  const double vn = nd;
  const double at = scale * sdd - (dk * sd * n + k * nd) * sd - vn * k * sd;
  const double an = ndd + vt * k * sd;

  FlatPoint f;
  f.v = std::hypot(vt, vn);
  f.theta = std::atan2(vn, vt);
  f.psi = wrap_angle(c.psi + f.theta);
  f.x = c.x - n * std::sin(c.psi);
  f.y = c.y + n * std::cos(c.psi);
  if (f.v > 0.0) {
    f.a_t = (vt * at + vn * an) / f.v;
    f.delta = std::atan(wheelbase * (vt * an - vn * at) / (f.v * f.v * f.v));
  }
  return f;
}

FlatReferences extract_flat_references(const QuinticTraj& traj, const Raceline& track, int N, double dt,
                                       const FlatOptions& opt) {
  if (N < 1 || !(dt > 0.0)) raise(ErrorKind::invalid_input, "reference horizon must be positive");
  if (!(opt.wheelbase > 0.0)) raise(ErrorKind::invalid_input, "wheelbase must be positive");
  const Coeffs6& cs = traj.coeffs_s;
  const Coeffs6& cd = traj.coeffs_d;
  FlatReferences r;
  r.dt = dt;
  for (int k = 0; k <= N; ++k) {
    const double t = opt.t0 + k * dt;
    double s, sd, sdd = 0.0, n, nd = 0.0, ndd = 0.0;
    if (t < 0.0) {
      sd = QuinticTraj::eval(cs, 0.0, 1);
      s = QuinticTraj::eval(cs, 0.0) + sd * t;
      n = QuinticTraj::eval(cd, 0.0);
    } else if (t > traj.T) {
      sd = QuinticTraj::eval(cs, traj.T, 1);
      s = QuinticTraj::eval(cs, traj.T) + sd * (t - traj.T);
      n = QuinticTraj::eval(cd, traj.T);
    } else {
      s = QuinticTraj::eval(cs, t);
      sd = QuinticTraj::eval(cs, t, 1);
      sdd = QuinticTraj::eval(cs, t, 2);
      n = QuinticTraj::eval(cd, t);
      nd = QuinticTraj::eval(cd, t, 1);
      ndd = QuinticTraj::eval(cd, t, 2);
    }
    FlatPoint f = flat_point(track, s, sd, sdd, n, nd, ndd, opt.wheelbase);
    if (!(f.v >= opt.v_min)) {
      raise(ErrorKind::degenerate_speed, "reference speed " + std::to_string(f.v) + " below floor at t=" +
                                             std::to_string(t));
    }
    if (std::abs(f.delta) > opt.delta_max) {
      f.delta = std::copysign(opt.delta_max, f.delta);
      r.saturated = true;
    }
    r.x_ref.emplace_back(s, n, f.theta);
    r.x.push_back(f.x);
    r.y.push_back(f.y);
    if (k < N) {
      r.u_ref.emplace_back(f.v, f.delta);
      r.a_t.push_back(f.a_t);
    }
  }
  return r;
}

FlatReferences racing_line_references(const Raceline& track, double s0, const std::vector<double>& speeds,
                                      double dt, double wheelbase) {
  FlatReferences r;
  r.dt = dt;
  double s = s0;
  for (std::size_t k = 0; k <= speeds.size(); ++k) {
    const TrackSample c = track.sample(s);
    r.x_ref.emplace_back(s, 0.0, 0.0);
    r.x.push_back(c.x);
    r.y.push_back(c.y);
    if (k == speeds.size()) break;
    r.u_ref.emplace_back(speeds[k], std::atan(wheelbase * c.kappa));
    r.a_t.push_back(k + 1 < speeds.size() ? (speeds[k + 1] - speeds[k]) / dt : 0.0);
    s += speeds[k] * dt;
  }
  return r;
}

}  // namespace fsdp
