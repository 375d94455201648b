#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "fsdp/simd.hpp"

namespace fsdp::simd {
namespace {

std::vector<double> uniform(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

TEST(Simd, ScalarRbfMatchesDirectFormula) {
  const std::vector<double> a{0.0, 1.0, -2.5};
  const std::vector<double> b{0.5, 3.0};
  std::vector<double> out(6);
  scalar::rbf_cross(a.data(), 3, b.data(), 2, 1.0 / (2.0 * 0.7 * 0.7), 1.3, out.data());
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      const double r = a[i] - b[j];
      const double expect = 1.3 * std::exp(-r * r / (2.0 * 0.49));
      EXPECT_NEAR(out[i * 2 + j], expect, 1e-13 * expect);
    }
  }
}

// Odd sizes exercise the vector tail; wide input range covers underflow.
TEST(Simd, Avx2RbfMatchesScalar) {
  if (!isa_available(Isa::avx2)) GTEST_SKIP() << "no AVX2/FMA on this CPU";
  std::mt19937_64 rng(1);
  for (std::size_t nb : {1u, 3u, 4u, 7u, 64u, 203u}) {
    const auto a = uniform(rng, 37, -30.0, 30.0);
    const auto b = uniform(rng, nb, -30.0, 30.0);
    for (double ell : {0.05, 0.8, 5.0}) {
      std::vector<double> s(a.size() * nb), v(a.size() * nb);
      const double g = 1.0 / (2.0 * ell * ell);
      scalar::rbf_cross(a.data(), a.size(), b.data(), nb, g, 0.7, s.data());
      avx2::rbf_cross(a.data(), a.size(), b.data(), nb, g, 0.7, v.data());
      for (std::size_t i = 0; i < s.size(); ++i) {
        EXPECT_LE(std::abs(s[i] - v[i]), 1e-14 * std::abs(s[i]) + 1e-300) << "nb=" << nb << " i=" << i;
      }
    }
  }
}

TEST(Simd, Avx2NearestCentroidMatchesScalar) {
  if (!isa_available(Isa::avx2)) GTEST_SKIP() << "no AVX2/FMA on this CPU";
  std::mt19937_64 rng(2);
  for (std::size_t n : {1u, 5u, 8u, 401u}) {
    const auto x = uniform(rng, n, 0.0, 100.0);
    const auto c = uniform(rng, 13, 0.0, 100.0);
    std::vector<int> s(n), v(n);
    scalar::nearest_centroid(x.data(), n, c.data(), c.size(), s.data());
    avx2::nearest_centroid(x.data(), n, c.data(), c.size(), v.data());
    EXPECT_EQ(s, v);
  }
}

TEST(Simd, NearestCentroidTieGoesToLowerIndex) {
  const std::vector<double> x{1.0, 1.0, 1.0, 1.0, 1.0};
  const std::vector<double> c{0.0, 2.0, 1.0, 1.0};
  for (Isa isa : {Isa::scalar, Isa::avx2}) {
    force_isa(isa);
    std::vector<int> out(x.size());
    nearest_centroid(x.data(), x.size(), c.data(), c.size(), out.data());
    for (int o : out) EXPECT_EQ(o, 2) << to_string(active_isa());
    const std::vector<double> c2{0.0, 2.0};
    nearest_centroid(x.data(), x.size(), c2.data(), c2.size(), out.data());
    for (int o : out) EXPECT_EQ(o, 0);
  }
  force_isa(std::nullopt);
}

TEST(Simd, ForcedIsaFallsBackWhenUnavailable) {
  force_isa(Isa::scalar);
  EXPECT_EQ(active_isa(), Isa::scalar);
  force_isa(Isa::avx2);
  EXPECT_EQ(active_isa(), isa_available(Isa::avx2) ? Isa::avx2 : Isa::scalar);
  force_isa(std::nullopt);
}

}  // namespace
}  // namespace fsdp::simd
