#include "fsdp/track_builders.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fsdp/common.hpp"

namespace fsdp {

namespace {

struct Profile {
  std::vector<CurvaturePiece> pieces;
  double psi0 = 0.0;

  double total() const {
    double t = 0.0;
    for (const auto& p : pieces) t += p.length;
    return t;
  }
  double kappa(double s) const {
    for (const auto& p : pieces) {
      if (s <= p.length) return p.kappa_start + (p.kappa_end - p.kappa_start) * (s / p.length);
      s -= p.length;
    }
    return pieces.back().kappa_end;
  }
  double heading(double s) const {
    double psi = psi0;
    for (const auto& p : pieces) {
      const double l = std::min(s, p.length);
      psi += p.kappa_start * l + 0.5 * (p.kappa_end - p.kappa_start) / p.length * l * l;
      s -= l;
      if (s <= 0.0) break;
    }
    return psi;
  }
};

}  // namespace

std::vector<double> speed_profile(const std::vector<double>& kappa, double spacing, bool closed,
                                  double v_max, double a_lat, double a_long) {
  const std::size_t n = kappa.size();
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double k = std::abs(kappa[i]);
    v[i] = k > 1e-9 ? std::min(v_max, std::sqrt(a_lat / k)) : v_max;
  }
  const int passes = closed ? 2 : 1;
  for (int p = 0; p < passes; ++p) {
    for (std::size_t i = 1; i <= n - (closed ? 0 : 1); ++i) {
      const std::size_t cur = i % n, prev = i - 1;
      v[cur] = std::min(v[cur], std::sqrt(v[prev] * v[prev] + 2.0 * a_long * spacing));
    }
    for (std::size_t i = n - (closed ? 0 : 1); i-- > 0;) {
      const std::size_t next = (i + 1) % n;
      v[i] = std::min(v[i], std::sqrt(v[next] * v[next] + 2.0 * a_long * spacing));
    }
  }
  return v;
}

Raceline build_from_curvature(const std::vector<CurvaturePiece>& pieces, const TrackBuildOptions& opt) {
  if (pieces.empty()) raise(ErrorKind::invalid_input, "no curvature pieces");
  Profile prof{pieces, opt.psi0};
  const double total = prof.total();
  const auto count = static_cast<std::size_t>(std::llround(total / opt.spacing));
  const double h = total / static_cast<double>(count);
  const std::size_t rows = opt.closed ? count : count + 1;

  std::vector<double> breaks{0.0};
  for (const auto& p : pieces) breaks.push_back(breaks.back() + p.length);

  // Heading is exact and smooth inside a piece, so integrate cos/sin with
  // Simpson sub-steps that never straddle a curvature break.
  auto advance = [&](double a, double b, double& x, double& y) {
    std::vector<double> pts{a};
    for (double br : breaks) {
      if (br > a && br < b) pts.push_back(br);
    }
    pts.push_back(b);
    constexpr int sub = 16;
    for (std::size_t j = 0; j + 1 < pts.size(); ++j) {
      const double dh = (pts[j + 1] - pts[j]) / sub;
      for (int k = 0; k < sub; ++k) {
        const double s0 = pts[j] + k * dh;
        const double p0 = prof.heading(s0), pm = prof.heading(s0 + 0.5 * dh), p1 = prof.heading(s0 + dh);
        x += dh / 6.0 * (std::cos(p0) + 4.0 * std::cos(pm) + std::cos(p1));
        y += dh / 6.0 * (std::sin(p0) + 4.0 * std::sin(pm) + std::sin(p1));
      }
    }
  };

  std::vector<Waypoint> w(rows);
  double x = opt.x0, y = opt.y0;
  for (std::size_t i = 0; i < rows; ++i) {
    const double s = h * static_cast<double>(i);
    if (i > 0) advance(s - h, s, x, y);
    w[i] = Waypoint{s, x, y, wrap_angle(prof.heading(s)), prof.kappa(s), opt.d_left, opt.d_right, 0.0};
  }
  std::vector<double> kap(rows);
  for (std::size_t i = 0; i < rows; ++i) kap[i] = w[i].kappa;
  auto v = speed_profile(kap, h, opt.closed, opt.v_max, opt.a_lat, opt.a_long);
  for (std::size_t i = 0; i < rows; ++i) w[i].v_ref = v[i];
  if (opt.closed) return Raceline(std::move(w), true, total);
  return Raceline(std::move(w), false, w.back().s);
}

Raceline make_straight(double length, TrackBuildOptions opt) {
  opt.closed = false;
  return build_from_curvature({{length, 0.0, 0.0}}, opt);
}

Raceline make_circle(double radius, TrackBuildOptions opt) {
  opt.closed = true;
  const double k = 1.0 / radius;
  return build_from_curvature({{2.0 * std::numbers::pi * radius, k, k}}, opt);
}

Raceline make_s_curve(TrackBuildOptions opt) {
  opt.closed = false;
  return build_from_curvature({{5.0, 0.0, 0.0},
                               {6.0, 0.0, 0.15},
                               {8.0, 0.15, 0.15},
                               {10.0, 0.15, -0.15},
                               {8.0, -0.15, -0.15},
                               {6.0, -0.15, 0.0},
                               {5.0, 0.0, 0.0}},
                              opt);
}

Raceline make_oval_chicane(TrackBuildOptions opt) {
  opt.closed = true;
  const double r = 6.0;
  const double kc = 1.0 / 8.0;
  // Curvature changes through short ramps so heading and offset stay
  // consistent under linear interpolation.
  const std::vector<CurvaturePiece> left = {{0.5, 0.0, kc}, {1.5, kc, kc}, {0.5, kc, 0.0}};
  const std::vector<CurvaturePiece> right = {{0.5, 0.0, -kc}, {1.5, -kc, -kc}, {0.5, -kc, 0.0}};
  // Lane shift out and back: left, hold, right, gap, right, hold, left.
  std::vector<CurvaturePiece> straight = {{8.0, 0.0, 0.0}};
  for (const auto* part : {&left, &right, &right, &left}) {
    straight.insert(straight.end(), part->begin(), part->end());
    straight.push_back({1.5, 0.0, 0.0});
  }
  straight.back().length = 8.0;
  std::vector<CurvaturePiece> pieces;
  for (int half = 0; half < 2; ++half) {
    pieces.insert(pieces.end(), straight.begin(), straight.end());
    pieces.push_back({1.0, 0.0, 1.0 / r});
    pieces.push_back({std::numbers::pi * r - 1.0, 1.0 / r, 1.0 / r});
    pieces.push_back({1.0, 1.0 / r, 0.0});
  }
  return build_from_curvature(pieces, opt);
}

}  // namespace fsdp
