#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fsdp/common.hpp"
#include "fsdp/track.hpp"
#include "fsdp/track_builders.hpp"

namespace fsdp {
namespace {

TEST(Raceline, StraightSample) {
  const Raceline track = make_straight(20.0);
  const TrackSample p = track.sample(3.0);
  EXPECT_NEAR(p.x, 3.0, 1e-12);
  EXPECT_NEAR(p.y, 0.0, 1e-12);
  EXPECT_NEAR(p.psi, 0.0, 1e-12);
  EXPECT_NEAR(p.kappa, 0.0, 1e-12);
}

TEST(Raceline, CircleCurvatureIsConstant) {
  const Raceline track = make_circle(5.0);
  for (double s = 0.0; s < track.length(); s += 0.37) {
    EXPECT_NEAR(track.sample(s).kappa, 0.2, 1e-9) << "s=" << s;
  }
}

TEST(Raceline, ClosedTrackWrapsPeriodically) {
  const Raceline track = make_oval_chicane();
  ASSERT_TRUE(track.closed());
  for (double s : {0.0, 1.0, 17.3, 55.0}) {
    const TrackSample a = track.sample(s);
    const double shifted = s + track.length();
    const TrackSample b = track.sample(shifted);
    const TrackSample bw = track.sample(track.wrap(shifted));
    const TrackSample c = track.sample(s - 2.0 * track.length());
    // Exact after wrapping; the shifted argument itself carries one rounding.
    EXPECT_EQ(b.x, bw.x);
    EXPECT_EQ(b.y, bw.y);
    EXPECT_EQ(b.psi, bw.psi);
    EXPECT_NEAR(a.x, b.x, 1e-12);
    EXPECT_NEAR(a.y, b.y, 1e-12);
    EXPECT_NEAR(a.psi, b.psi, 1e-12);
    EXPECT_NEAR(a.kappa, b.kappa, 1e-12);
    EXPECT_NEAR(a.x, c.x, 1e-12);
  }
  // Geometry at s = 0 and s = length coincides.
  const TrackSample start = track.sample(0.0);
  const TrackSample end = track.sample(std::nextafter(track.length(), 0.0));
  EXPECT_NEAR(start.x, end.x, 1e-6);
  EXPECT_NEAR(start.y, end.y, 1e-6);
}

TEST(Raceline, EmptyRacelineRejected) {
  EXPECT_THROW(Raceline::from_waypoints({}, false), Error);
  try {
    Raceline::parse("x,y,d_left,d_right,v_ref\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_input);
  }
}

TEST(Raceline, FrenetToCartesianOnStraight) {
  const Raceline track = make_straight(20.0);
  const CartesianPose c = track.frenet_to_cartesian({2.0, 0.5, 0.0});
  EXPECT_NEAR(c.x, 2.0, 1e-12);
  EXPECT_NEAR(c.y, 0.5, 1e-12);
  EXPECT_NEAR(c.psi, 0.0, 1e-12);
}

TEST(Raceline, ZeroOffsetGivesCenterline) {
  const Raceline track = make_s_curve();
  for (double s = 0.0; s < track.length(); s += 1.3) {
    const CartesianPose c = track.frenet_to_cartesian({s, 0.0, 0.0});
    const TrackSample p = track.sample(s);
    EXPECT_NEAR(c.x, p.x, 1e-12);
    EXPECT_NEAR(c.y, p.y, 1e-12);
    EXPECT_NEAR(c.psi, p.psi, 1e-12);
  }
}

TEST(Raceline, FoldOverRejected) {
  const Raceline track = make_circle(2.0, {.d_left = 3.0, .d_right = 3.0});
  try {
    track.frenet_to_cartesian({1.0, 1.99, 0.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::geometry);
  }
  EXPECT_NO_THROW(track.frenet_to_cartesian({1.0, 1.97, 0.0}));
}

TEST(Raceline, ProjectionOfWaypointAndLeftOffset) {
  const Raceline track = make_s_curve();
  for (std::size_t i = 0; i < track.waypoints().size(); i += 37) {
    const auto& w = track.waypoints()[i];
    const FrenetPose f = track.cartesian_to_frenet(w.x, w.y, w.psi, w.s + 3.0);
    EXPECT_NEAR(f.n, 0.0, 1e-9);
    EXPECT_NEAR(f.s, w.s, 1e-9);
  }
  const Raceline straight = make_straight(20.0);
  const FrenetPose f = straight.cartesian_to_frenet(4.0, 0.3, 0.1, 0.0);
  EXPECT_NEAR(f.n, 0.3, 1e-12);
  EXPECT_NEAR(f.s, 4.0, 1e-12);
  EXPECT_NEAR(f.theta, 0.1, 1e-12);
}

TEST(Raceline, ProjectionFailsOutsideWindow) {
  const Raceline track = make_straight(100.0);
  try {
    track.cartesian_to_frenet(80.0, 0.0, 0.0, 10.0, 20.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::projection);
  }
}

// Round trip over random poses with |n| <= 0.5 * corridor half-width.
TEST(Raceline, RoundTripOnSCurve) {
  const Raceline track = make_s_curve();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> us(0.0, track.length());
  std::uniform_real_distribution<double> un(-0.6, 0.6);
  std::uniform_real_distribution<double> ut(-1.0, 1.0);
  double max_s = 0.0, max_n = 0.0, max_t = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const FrenetPose p{us(rng), un(rng), ut(rng)};
    const CartesianPose c = track.frenet_to_cartesian(p);
    const FrenetPose q = track.cartesian_to_frenet(c.x, c.y, c.psi, p.s + 2.0);
    max_s = std::max(max_s, std::abs(q.s - p.s));
    max_n = std::max(max_n, std::abs(q.n - p.n));
    max_t = std::max(max_t, std::abs(wrap_angle(q.theta - p.theta)));
  }
  EXPECT_LT(max_s, 1e-6);
  EXPECT_LT(max_n, 1e-6);
  EXPECT_LT(max_t, 1e-6);
}

TEST(Raceline, RoundTripAcrossStartLine) {
  const Raceline track = make_oval_chicane();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> us(-3.0, 3.0);
  std::uniform_real_distribution<double> un(-0.6, 0.6);
  for (int i = 0; i < 200; ++i) {
    const double s = track.wrap(us(rng));
    const double n = un(rng);
    const CartesianPose c = track.frenet_to_cartesian({s, n, 0.0});
    const FrenetPose q = track.cartesian_to_frenet(c.x, c.y, c.psi, s);
    EXPECT_NEAR(track.delta_s(s, q.s), 0.0, 1e-6);
    EXPECT_NEAR(q.n, n, 1e-6);
  }
}

TEST(RacelineIo, ParsesAndDerivesMissingColumns) {
  const Raceline circle = make_circle(5.0);
  std::string text = "x;y;d_left;d_right;v_ref\n";
  for (const auto& w : circle.waypoints()) {
    text += std::to_string(w.x) + ";" + std::to_string(w.y) + ";1.0;1.0;3.0\n";
  }
  const auto& w0 = circle.waypoints().front();
  text += std::to_string(w0.x) + ";" + std::to_string(w0.y) + ";1.0;1.0;3.0\n";
  const Raceline parsed = Raceline::parse(text);
  EXPECT_TRUE(parsed.closed());
  EXPECT_NEAR(parsed.length(), circle.length(), 1e-3);
  for (const auto& w : parsed.waypoints()) {
    EXPECT_NEAR(w.kappa, 0.2, 2e-3);
  }
  const TrackSample s = parsed.sample(1.0);
  EXPECT_NEAR(s.psi, circle.sample(1.0).psi, 2e-3);
}

TEST(RacelineIo, SaveLoadRoundTrip) {
  const Raceline track = make_oval_chicane();
  const Raceline back = Raceline::parse(track.to_text());
  ASSERT_EQ(back.waypoints().size(), track.waypoints().size());
  EXPECT_TRUE(back.closed());
  EXPECT_DOUBLE_EQ(back.length(), track.length());
  EXPECT_DOUBLE_EQ(back.sample(12.34).x, track.sample(12.34).x);
}

TEST(RacelineIo, ReportsRowNumbers) {
  const std::string text =
      "s,x,y,psi,kappa,d_left,d_right,v_ref\n"
      "0,0,0,0,0,1,1,3\n"
      "1,1,0,0,0,1,1,3\n"
      "2,2,0,0,0,-1,1,3\n";
  try {
    Raceline::parse(text);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
  }
  const std::string bad_s =
      "s,x,y,psi,kappa,d_left,d_right,v_ref\n"
      "0,0,0,0,0,1,1,3\n"
      "0,1,0,0,0,1,1,3\n";
  try {
    Raceline::parse(bad_s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(Raceline::parse("s,x,y,psi,kappa,d_left,d_right,v_ref\n0,0,0,0,0,1,1,abc\n1,1,0,0,0,1,1,3\n"), Error);
}

TEST(TrackBuilders, OvalClosesAndHasPositiveSpeed) {
  const Raceline track = make_oval_chicane();
  const auto& w = track.waypoints();
  const double gap = std::hypot(w.back().x - w.front().x, w.back().y - w.front().y);
  // The closing segment ends a curvature ramp at zero curvature, so the
  // chord and the arc agree to well below the tolerance.
  const double arc = track.length() - w.back().s;
  EXPECT_NEAR(gap, arc, 1e-7);
  for (const auto& p : w) {
    EXPECT_GT(p.v_ref, 0.0);
    EXPECT_LE(p.v_ref, 7.0 + 1e-12);
  }
}

}  // namespace
}  // namespace fsdp
