#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "fsdp/common.hpp"
#include "fsdp/seed.hpp"
#include "fsdp/track_builders.hpp"
#include "support/flatness_oracle.hpp"
#include "support/quintic_oracle.hpp"

namespace fsdp {
namespace {

OpponentEstimate fixed_opponent(double d) {
  OpponentEstimate est;
  est.const_d = d;
  est.const_v = 0.0;
  return est;
}

CollisionInterval interval(double a, double b) { return {true, a, b, 0, 1}; }

using testing::kkt_quintic_oracle;
using testing::quintic_fit_objective;

TEST(KeyPoints, OpponentNearLeftEdgeForcesRight) {
  const Raceline track = make_straight(60.0);  // half-width 1.2
  const KeyPointSet k = choose_key_points(interval(20.0, 23.0), fixed_opponent(0.8), track, 3.0, {.margin = 0.5});
  EXPECT_EQ(k.side, Side::right);
  EXPECT_DOUBLE_EQ(k.k[0].d, 0.0);
  EXPECT_DOUBLE_EQ(k.k[4].d, 0.0);
  for (int i = 1; i <= 3; ++i) {
    EXPECT_LE(k.k[i].d, 0.3 + 1e-12);
    EXPECT_GE(std::abs(k.k[i].d - 0.8), 0.5 - 1e-12);
    EXPECT_GE(k.k[i].d, -1.2);
  }
  EXPECT_DOUBLE_EQ(k.k[1].s, 20.0);
  EXPECT_DOUBLE_EQ(k.k[2].s, 21.5);
  EXPECT_DOUBLE_EQ(k.k[3].s, 23.0);
  EXPECT_DOUBLE_EQ(k.k[0].s, 17.0);  // lead-in = 3 m/s * 1 s
  EXPECT_DOUBLE_EQ(k.k[4].s, 26.0);
}

TEST(KeyPoints, TieGoesLeftAndNarrowTrackFails) {
  const Raceline track = make_straight(60.0);
  EXPECT_EQ(choose_key_points(interval(10.0, 11.0), fixed_opponent(0.0), track, 2.0).side, Side::left);
  const Raceline narrow = make_straight(60.0, {.d_left = 0.4, .d_right = 0.4});
  try {
    choose_key_points(interval(10.0, 11.0), fixed_opponent(0.0), narrow, 2.0, {.margin = 0.5});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::no_feasible_gap);
  }
}

TEST(KeyPoints, LeadDistancesAreSpeedScaledWithFloor) {
  const Raceline track = make_straight(60.0);
  const KeyPointSet a = choose_key_points(interval(10.0, 11.0), fixed_opponent(0.0), track, 0.2, {.lead_floor = 1.5});
  EXPECT_DOUBLE_EQ(a.k[0].s, 8.5);
  const KeyPointSet b = choose_key_points(interval(10.0, 18.0), fixed_opponent(0.0), track, 2.0);
  EXPECT_DOUBLE_EQ(b.k[0].s, 2.0);  // interval length wins
}

TEST(RoughPath, LinearInterpolationAndTiming) {
  KeyPointSet k;
  k.k = {KeyPoint{0.0, 0.0}, {2.0, 0.6}, {3.0, 0.6}, {4.0, 0.4}, {6.0, 0.0}};
  const RoughPath r = interpolate_rough(k, 0.1, 2.5);
  ASSERT_GE(r.t.size(), 6u);
  for (std::size_t i = 0; i < r.s.size(); ++i) {
    if (std::abs(r.s[i] - 1.0) < 1e-9) EXPECT_NEAR(r.d[i], 0.3, 1e-12);
    if (std::abs(r.s[i] - 3.5) < 1e-9) EXPECT_NEAR(r.d[i], 0.5, 1e-12);
    EXPECT_NEAR(r.t[i], r.s[i] / 2.5, 1e-12);
  }
  EXPECT_NEAR(r.s.back() - r.s.front(), 2.5 * r.duration(), 1e-9);

  KeyPointSet flat = k;
  for (auto& p : flat.k) p.d = 0.0;
  for (double d : interpolate_rough(flat, 0.1, 1.0).d) EXPECT_EQ(d, 0.0);
}

TEST(QuinticFit, RecoversQuinticInput) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double T = 1.0 + 2.0 * (u(rng) + 1.0);
    Coeffs6 c;
    for (int j = 0; j < 6; ++j) c[j] = u(rng) / std::pow(T, j);
    std::vector<double> t, p;
    for (int i = 0; i <= 60; ++i) {
      t.push_back(T * i / 60.0);
      p.push_back(QuinticTraj::eval(c, t.back()));
    }
    const Coeffs6 fit = fit_quintic_axis(t, p, T, {}, std::pair{QuinticTraj::eval(c, 0.0, 1), QuinticTraj::eval(c, T, 1)});
    EXPECT_LT((fit - c).lpNorm<Eigen::Infinity>(), 1e-8) << "trial " << trial;
  }
}

TEST(QuinticFit, LineStaysLine) {
  std::vector<double> t, p;
  for (int i = 0; i <= 30; ++i) {
    t.push_back(0.1 * i);
    p.push_back(2.0 - 0.7 * t.back());
  }
  const Coeffs6 c = fit_quintic_axis(t, p, 3.0);
  EXPECT_NEAR(c[0], 2.0, 1e-9);
  EXPECT_NEAR(c[1], -0.7, 1e-9);
  for (int j = 2; j < 6; ++j) EXPECT_NEAR(c[j], 0.0, 1e-9);
}

TEST(QuinticFit, MatchesConstrainedLeastSquaresOracle) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    KeyPointSet k;
    double s = 0.0;
    k.k[0] = {0.0, 0.0};
    for (int i = 1; i < 5; ++i) {
      s += 0.5 + 3.0 * u(rng);
      k.k[static_cast<std::size_t>(i)] = {s, i == 4 ? 0.0 : 1.6 * u(rng) - 0.8};
    }
    const RoughPath r = interpolate_rough(k, 0.05 + 0.1 * u(rng), 1.0 + 4.0 * u(rng));
    const QuinticTraj q = fit_quintic(r);
    const std::size_t n = r.t.size();
    const Coeffs6 oracle = kkt_quintic_oracle(r.t, r.d, (r.d[1] - r.d[0]) / (r.t[1] - r.t[0]),
                                      (r.d[n - 1] - r.d[n - 2]) / (r.t[n - 1] - r.t[n - 2]));
    const double j_fit = quintic_fit_objective(r.t, r.d, q.coeffs_d);
    const double j_oracle = quintic_fit_objective(r.t, r.d, oracle);
    EXPECT_LT(j_fit - j_oracle, 1e-6) << "trial " << trial;
    // Endpoint constraints.
    EXPECT_NEAR(QuinticTraj::eval(q.coeffs_d, 0.0), r.d.front(), 1e-8);
    EXPECT_NEAR(QuinticTraj::eval(q.coeffs_d, q.T), r.d.back(), 1e-8);
    EXPECT_NEAR(QuinticTraj::eval(q.coeffs_d, 0.0, 1), (r.d[1] - r.d[0]) / (r.t[1] - r.t[0]), 1e-8);
    EXPECT_NEAR(QuinticTraj::eval(q.coeffs_d, q.T, 1), (r.d[n - 1] - r.d[n - 2]) / (r.t[n - 1] - r.t[n - 2]), 1e-8);
    EXPECT_NEAR(QuinticTraj::eval(q.coeffs_s, q.T), r.s.back(), 1e-8);
    EXPECT_NEAR(QuinticTraj::eval(q.coeffs_s, 0.3 * q.T, 1), r.speed, 1e-8);
  }
}

void check_against_finite_differences(const Raceline& track, const testing::ExactGeometry& geo, double s_lo,
                                      double s_hi, int trials, std::uint64_t seed) {
  const auto errors = testing::flatness_fd_errors(track, geo, s_lo, s_hi, trials, seed);
  for (std::size_t i = 0; i < errors.size(); ++i) {
    EXPECT_LT(errors[i].v, 1e-4) << "sample " << i;
    EXPECT_LT(errors[i].a_t, 1e-4) << "sample " << i;
    EXPECT_LT(errors[i].delta, 1e-4) << "sample " << i;
    EXPECT_LT(errors[i].psi, 1e-4) << "sample " << i;
  }
  EXPECT_GE(static_cast<int>(errors.size()), trials / 2);
}

TEST(Flatness, CircleMatchesFiniteDifferences) {
  const double R = 8.0;
  const Raceline track = make_circle(R);
  check_against_finite_differences(track, {[R](double s) { return s / R; }, 0.0}, 1.0, 40.0, 50, 31);
}

TEST(Flatness, ClothoidMatchesFiniteDifferences) {
  // Straight 5 m, then curvature ramps 0 -> 0.15 over 6 m.
  const Raceline track = make_s_curve();
  auto psi = [](double s) {
    if (s <= 5.0) return 0.0;
    const double u = std::min(s, 11.0) - 5.0;
    double p = 0.15 / 6.0 * 0.5 * u * u;
    if (s > 11.0) p += 0.15 * (s - 11.0);
    return p;
  };
  check_against_finite_differences(track, {psi, 0.0}, 5.0, 11.0, 50, 8);
}

TEST(Flatness, CircleSteeringIsExact) {
  const Raceline track = make_circle(5.0);
  for (double v : {0.5, 2.0, 6.0}) {
    for (double s : {0.3, 7.7, 20.1}) {
      const FlatPoint f = flat_point(track, s, v, 0.0, 0.0, 0.0, 0.0, 0.33);
      EXPECT_NEAR(f.delta, std::atan(0.33 / 5.0), 1e-9);
      EXPECT_NEAR(f.v, v, 1e-12);
      EXPECT_NEAR(f.a_t, 0.0, 1e-12);
      EXPECT_NEAR(f.theta, 0.0, 1e-12);
    }
  }
}

TEST(Flatness, StraightConstantSpeed) {
  const Raceline track = make_straight(50.0);
  QuinticTraj q;
  q.T = 3.0;
  q.coeffs_s << 1.0, 4.0, 0, 0, 0, 0;
  q.coeffs_d << 0.2, 0, 0, 0, 0, 0;
  const FlatReferences r = extract_flat_references(q, track, 20, 0.05);
  ASSERT_EQ(r.x_ref.size(), 21u);
  ASSERT_EQ(r.u_ref.size(), 20u);
  for (std::size_t k = 0; k < r.u_ref.size(); ++k) {
    EXPECT_NEAR(r.x_ref[k][2], 0.0, 1e-12);
    EXPECT_NEAR(r.a_t[k], 0.0, 1e-12);
    EXPECT_NEAR(r.u_ref[k][1], 0.0, 1e-12);
    EXPECT_NEAR(r.u_ref[k][0], 4.0, 1e-12);
  }
  EXPECT_FALSE(r.saturated);
}

TEST(Flatness, DegenerateSpeedAndSaturation) {
  const Raceline track = make_straight(50.0);
  QuinticTraj q;
  q.T = 2.0;
  q.coeffs_s << 1.0, 0.01, 0, 0, 0, 0;
  try {
    extract_flat_references(q, track, 10, 0.05);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate_speed);
  }
  // Tight lateral swing: steering beyond the limit is clipped and flagged.
  q.coeffs_s << 1.0, 2.0, 0, 0, 0, 0;
  q.coeffs_d << 0.0, 0.0, 3.0, 0, 0, 0;
  const FlatReferences r = extract_flat_references(q, track, 10, 0.05, {.delta_max = 0.05});
  EXPECT_TRUE(r.saturated);
  for (const auto& u : r.u_ref) EXPECT_LE(std::abs(u[1]), 0.05);
}

// Seeds built from the full pipeline keep clearance, stay inside the bounds
// and integrate back to their own positions.
TEST(SeedPipeline, ClearanceBoundsAndFlatnessConsistency) {
  const Raceline track = make_oval_chicane();
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double margin = 0.5;
  for (int trial = 0; trial < 30; ++trial) {
    const double d_opp = 0.6 * u(rng) - 0.3;
    const double c0 = 5.0 + 80.0 * u(rng);
    const double len = 0.5 + 9.5 * u(rng);
    const double v = 1.0 + 5.0 * u(rng);
    const KeyPointSet k = choose_key_points(interval(c0, c0 + len), fixed_opponent(d_opp), track, v,
                                            {.margin = margin, .edge_margin = 0.15, .lead_floor = 1.5});
    const RoughPath r = interpolate_rough(k, 0.1, v);
    const QuinticTraj q = fit_quintic(r);
    for (double t = 0.0; t <= q.T; t += 0.01) {
      const double s = QuinticTraj::eval(q.coeffs_s, t);
      const double d = QuinticTraj::eval(q.coeffs_d, t);
      const TrackSample ts = track.sample(s);
      EXPECT_LE(d, ts.d_left);
      EXPECT_GE(d, -ts.d_right);
      if (s >= c0 && s <= c0 + len) EXPECT_GE(std::abs(d - d_opp), 0.8 * margin) << "trial " << trial << " s=" << s;
    }

    const int N = 40;
    const double dt = 0.05;
    const double t0 = q.T * u(rng) * 0.5;
    const FlatReferences f = extract_flat_references(q, track, N, dt, {.delta_max = 1.0, .t0 = t0});
    // Midpoint-rule integration of the flat speed and heading.
    double x = f.x[0], y = f.y[0];
    for (int j = 0; j < N; ++j) {
      const int sub = 50;
      for (int m = 0; m < sub; ++m) {
        const double tt = t0 + (j + (m + 0.5) / sub) * dt;
        const double tc = std::clamp(tt, 0.0, q.T);
        double sd = QuinticTraj::eval(q.coeffs_s, tc, 1), sdd = 0.0, nd = 0.0, ndd = 0.0;
        double s = QuinticTraj::eval(q.coeffs_s, tc) + sd * (tt - tc), n = QuinticTraj::eval(q.coeffs_d, tc);
        if (tt == tc) {
          sdd = QuinticTraj::eval(q.coeffs_s, tt, 2);
          nd = QuinticTraj::eval(q.coeffs_d, tt, 1);
          ndd = QuinticTraj::eval(q.coeffs_d, tt, 2);
        }
        const FlatPoint p = flat_point(track, s, sd, sdd, n, nd, ndd, 0.33);
        x += p.v * std::cos(p.psi) * dt / sub;
        y += p.v * std::sin(p.psi) * dt / sub;
      }
      EXPECT_LT(std::hypot(x - f.x[j + 1], y - f.y[j + 1]), 1e-3) << "trial " << trial << " step " << j;
    }
  }
}

TEST(RacingLineReferences, FollowCentrelineCurvature) {
  const Raceline track = make_circle(4.0);
  const FlatReferences r = racing_line_references(track, 2.0, std::vector<double>(10, 3.0), 0.05, 0.33);
  ASSERT_EQ(r.x_ref.size(), 11u);
  for (std::size_t k = 0; k < 10; ++k) {
    EXPECT_NEAR(r.u_ref[k][1], std::atan(0.33 / 4.0), 1e-9);
    EXPECT_NEAR(r.x_ref[k + 1][0] - r.x_ref[k][0], 0.15, 1e-12);
  }
}

}  // namespace
}  // namespace fsdp
