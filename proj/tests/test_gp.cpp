#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "json.hpp"

#include "fsdp/common.hpp"
#include "fsdp/gp.hpp"
#include "fsdp/kmeans.hpp"

namespace fsdp {
namespace {

Eigen::VectorXd linspace(double a, double b, int n) { return Eigen::VectorXd::LinSpaced(n, a, b); }

Eigen::VectorXd uniform(std::mt19937_64& rng, int n, double a, double b) {
  std::uniform_real_distribution<double> u(a, b);
  Eigen::VectorXd v(n);
  for (auto& e : v) e = u(rng);
  return v;
}

Eigen::VectorXd noisy_sin(std::mt19937_64& rng, const Eigen::VectorXd& x, double noise) {
  std::normal_distribution<double> nd(0.0, noise);
  Eigen::VectorXd y(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) y[i] = std::sin(x[i]) + nd(rng);
  return y;
}

TEST(RbfKernel, BasicProperties) {
  const RbfKernel k{0.7, 1.3};
  EXPECT_DOUBLE_EQ(k(0.4, 0.4), 1.3);
  EXPECT_DOUBLE_EQ(k(0.1, 2.0), k(2.0, 0.1));
  EXPECT_LE(k(0.1, 0.3), 1.3);
  const Eigen::MatrixXd c = k.cross(linspace(0, 1, 3), linspace(-1, 2, 5));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 5; ++j) EXPECT_NEAR(c(i, j), k(0.5 * i, -1.0 + 0.75 * j), 1e-15);
}

// Analytic VFE gradient against central differences of the bound itself.
TEST(SparseGp, VfeGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::VectorXd x = uniform(rng, 40, 0.0, 10.0);
    Eigen::VectorXd y = noisy_sin(rng, x, 0.1);
    y.array() -= y.mean();
    std::uniform_real_distribution<double> u(0.0, 1.0);
    VfeParams p;
    p.kernel = {0.5 + 2.0 * u(rng), 0.3 + u(rng)};
    p.noise_variance = 0.01 + 0.2 * u(rng);
    p.inducing = uniform(rng, 7, 0.0, 10.0);
    Eigen::VectorXd g;
    vfe_bound(x, y, p, &g);
    const Eigen::VectorXd t = p.pack();
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      // Fourth-order central stencil. Random inducing sets can nearly
      // coincide, so the step stays well above the bound's round-off.
      const double h = 1e-4;
      auto f = [&](double off) {
        Eigen::VectorXd tt = t;
        tt[i] += off;
        return vfe_bound(x, y, VfeParams::unpack(tt));
      };
      const double fd = (8.0 * (f(h) - f(-h)) - (f(2 * h) - f(-2 * h))) / (12.0 * h);
      EXPECT_LT(std::abs(fd - g[i]), 1e-4 * std::max(1.0, std::abs(fd))) << "trial " << trial << " param " << i;
    }
  }
}

TEST(DenseGp, LmlGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(32);
  const Eigen::VectorXd x = uniform(rng, 30, 0.0, 6.0);
  Eigen::VectorXd y = noisy_sin(rng, x, 0.1);
  y.array() -= y.mean();
  Eigen::Vector3d t(std::log(0.9), std::log(0.8), std::log(0.05));
  Eigen::Vector3d g;
  dense_lml(x, y, {std::exp(t[0]), std::exp(t[1])}, std::exp(t[2]), &g);
  for (int i = 0; i < 3; ++i) {
    Eigen::Vector3d tp = t, tm = t;
    tp[i] += 1e-5;
    tm[i] -= 1e-5;
    const double fd = (dense_lml(x, y, {std::exp(tp[0]), std::exp(tp[1])}, std::exp(tp[2])) -
                       dense_lml(x, y, {std::exp(tm[0]), std::exp(tm[1])}, std::exp(tm[2]))) / 2e-5;
    EXPECT_LT(std::abs(fd - g[i]), 1e-4 * std::max(1.0, std::abs(fd)));
  }
}

// Inputs roughly one lengthscale apart: denser sampling pushes cond(Kzz) past
// 1/jitter and the comparison would measure the jitter instead of the formula.
TEST(SparseGp, InducingEqualsTrainingMatchesDenseGp) {
  std::mt19937_64 rng(1);
  const Eigen::VectorXd x = linspace(0.0, 58.8, 50) + uniform(rng, 50, -0.2, 0.2);
  const Eigen::VectorXd y = noisy_sin(rng, x, 0.05);
  const RbfKernel k{1.1, 0.9};
  const double noise = 0.01;
  const SgpModel sgp = SgpModel::build(x, y, {k, noise, x});
  const DenseGpModel gp = DenseGpModel::build(x, y, k, noise);
  const Eigen::VectorXd grid = linspace(-1.0, 60.0, 200);
  const PosteriorBatch a = sgp.predict(grid);
  const PosteriorBatch b = gp.predict(grid);
  EXPECT_LT((a.mean - b.mean).lpNorm<Eigen::Infinity>(), 1e-6);
  EXPECT_LT((a.variance - b.variance).lpNorm<Eigen::Infinity>(), 1e-6);
  // The bound is tight when the inducing set is the training set.
  EXPECT_NEAR(sgp.elbo(), gp.log_marginal_likelihood(), 1e-4);
}

TEST(SparseGp, SinglePointInterpolates) {
  const SgpModel m = SgpModel::build(Eigen::VectorXd::Constant(1, 2.0), Eigen::VectorXd::Constant(1, 0.7),
                                     {{1.0, 1.0}, 1e-8, Eigen::VectorXd::Constant(1, 2.0)});
  EXPECT_NEAR(m.predict(2.0).mean, 0.7, 1e-3);
}

TEST(SparseGp, RevertsToPriorFarFromData) {
  // Targets with zero mean so the prior mean is exactly 0.
  const Eigen::VectorXd x = linspace(0.0, 4.0, 21);
  Eigen::VectorXd y(21);
  for (int i = 0; i < 21; ++i) y[i] = std::sin(std::numbers::pi * x[i] / 2.0);
  y.array() -= y.mean();
  const RbfKernel k{0.5, 0.3};
  const SgpModel m = SgpModel::build(x, y, {k, 0.01, linspace(0.0, 4.0, 6)});
  const Posterior p = m.predict(4.0 + 10.0 * 0.5 + 1.0);
  EXPECT_NEAR(p.mean, 0.0, 1e-6);
  EXPECT_NEAR(p.variance, 0.3, 1e-6);
}

TEST(SparseGp, BatchEqualsLoop) {
  std::mt19937_64 rng(3);
  const Eigen::VectorXd x = uniform(rng, 80, 0.0, 10.0);
  const SgpModel m = fit_sgp(x, noisy_sin(rng, x, 0.1), {.num_inducing = 10, .iters = 30});
  const Eigen::VectorXd q = uniform(rng, 100, -2.0, 12.0);
  const PosteriorBatch b = m.predict(q);
  const Eigen::VectorXd d = m.predictive_distance(q);
  for (int i = 0; i < 100; ++i) {
    const Posterior p = m.predict(q[i]);
    EXPECT_NEAR(p.mean, b.mean[i], 1e-12);
    EXPECT_NEAR(p.variance, b.variance[i], 1e-12);
    EXPECT_NEAR(m.predictive_distance(q[i]), d[i], 1e-12);
    EXPECT_GE(b.variance[i], 0.0);
    EXPECT_LE(b.variance[i], m.kernel().signal_variance + m.noise_variance() + 1e-8);
  }
}

TEST(SparseGp, SinFitAccuracyAgainstDenseOracle) {
  std::mt19937_64 rng(4);
  const Eigen::VectorXd x = linspace(0.0, 2.0 * std::numbers::pi, 200);
  const Eigen::VectorXd y = noisy_sin(rng, x, 0.1);
  const SgpModel sgp = fit_sgp(x, y, {.num_inducing = 15});
  const DenseGpModel gp = fit_dense_gp(x, y);
  const Eigen::VectorXd grid = linspace(0.05, 2.0 * std::numbers::pi - 0.05, 157);
  const Eigen::VectorXd truth = grid.array().sin();
  const double rmse_sgp = std::sqrt((sgp.predict(grid).mean - truth).squaredNorm() / 157.0);
  const double rmse_gp = std::sqrt((gp.predict(grid).mean - truth).squaredNorm() / 157.0);
  EXPECT_LT(rmse_sgp, 0.05);
  EXPECT_LE(rmse_sgp, 1.5 * rmse_gp);
}

TEST(SparseGp, PredictiveDistance) {
  const Eigen::VectorXd x = linspace(0.0, 10.0, 30);
  const Eigen::VectorXd y = x.array().sin() * 0.2;
  const RbfKernel k{1.0, 0.04};
  const double noise = 0.003;
  const SgpModel m = SgpModel::build(x, y, {k, noise, linspace(1.0, 9.0, 5)});
  for (Eigen::Index j = 0; j < 5; ++j) EXPECT_NEAR(m.predictive_distance(m.inducing()[j]), noise, 1e-9);
  EXPECT_NEAR(m.predictive_distance(9.0 + 10.0), 0.04 + noise, 1e-6);

  const SgpModel lone = SgpModel::build(x, y, {k, noise, Eigen::VectorXd::Constant(1, 5.0)});
  double prev = lone.predictive_distance(5.0);
  for (double dx = 0.05; dx < 12.0; dx += 0.05) {
    const double d = lone.predictive_distance(5.0 + dx);
    EXPECT_GE(d, prev - 1e-15);
    prev = d;
  }
}

TEST(SparseGp, BoundNeverExceedsDenseLikelihood) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 20 + 9 * trial;
    const Eigen::VectorXd x = uniform(rng, n, 0.0, 15.0);
    const Eigen::VectorXd y = noisy_sin(rng, x, 0.2);
    std::uniform_real_distribution<double> u(0.2, 2.0);
    const RbfKernel k{u(rng), u(rng)};
    const double noise = 0.05 * u(rng);
    const SgpModel sgp = SgpModel::build(x, y, {k, noise, uniform(rng, 1 + trial % 12, 0.0, 15.0)});
    const DenseGpModel gp = DenseGpModel::build(x, y, k, noise);
    EXPECT_LE(sgp.elbo(), gp.log_marginal_likelihood() + 1e-8) << "trial " << trial;
  }
}

TEST(SparseGp, MoreInducingPointsNeverLowerTheBound) {
  std::mt19937_64 rng(6);
  const Eigen::VectorXd x = uniform(rng, 150, 0.0, 20.0);
  const Eigen::VectorXd y = noisy_sin(rng, x, 0.1);
  const SgpModel small = fit_sgp(x, y, {.num_inducing = 8, .iters = 60, .seed = 3});
  const std::vector<double> xs(x.data(), x.data() + x.size());
  const std::vector<double> z0(small.inducing().data(), small.inducing().data() + small.inducing().size());
  const auto z1 = kmeans_pp_extend(xs, z0, 5, 9);
  SgpFitOptions opts{.num_inducing = 13, .iters = 60};
  opts.kernel = small.kernel();
  opts.noise_variance = small.noise_variance();
  opts.inducing = Eigen::Map<const Eigen::VectorXd>(z1.data(), 13);
  const SgpModel big = fit_sgp(x, y, opts);
  EXPECT_GE(big.elbo(), small.elbo() - 1e-6);
}

TEST(SparseGp, PredictCostIndependentOfTrainingSize) {
  std::mt19937_64 rng(7);
  auto model_for = [&](int n) {
    const Eigen::VectorXd x = uniform(rng, n, 0.0, 50.0);
    return fit_sgp(x, noisy_sin(rng, x, 0.1), {.num_inducing = 40, .iters = 5});
  };
  const SgpModel m100 = model_for(100);
  const SgpModel m400 = model_for(400);
  auto best_time = [&](const SgpModel& m) {
    double best = 1e9;
    for (int rep = 0; rep < 30; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      double sink = 0.0;
      for (int i = 0; i < 200; ++i) sink += m.predict(0.25 * i).mean;
      const auto t1 = std::chrono::steady_clock::now();
      EXPECT_TRUE(std::isfinite(sink));
      best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    return best;
  };
  EXPECT_LT(best_time(m400), 2.0 * best_time(m100));
}

TEST(SparseGp, FitRejectsDegenerateData) {
  try {
    fit_sgp(Eigen::VectorXd::Constant(10, 3.0), Eigen::VectorXd::LinSpaced(10, 0, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::fit);
  }
  Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(10, 0, 1);
  y[3] = std::nan("");
  try {
    fit_sgp(Eigen::VectorXd::LinSpaced(10, 0, 1), y);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_input);
  }
}

TEST(DenseGp, InterpolatesWithTinyNoise) {
  const Eigen::VectorXd x = linspace(0.0, 5.0, 11);
  const Eigen::VectorXd y = x.array().cos();
  const double noise = 1e-8;
  const DenseGpModel gp = DenseGpModel::build(x, y, {0.8, 1.0}, noise);
  for (int i = 0; i < 11; ++i) {
    const Posterior p = gp.predict(x[i]);
    EXPECT_NEAR(p.mean, y[i], 1e-3);
    EXPECT_LE(p.variance, noise + 1e-6);
  }
}

TEST(DenseGp, RefusesLargeInputs) {
  const Eigen::VectorXd x = linspace(0.0, 100.0, 2001);
  EXPECT_THROW(DenseGpModel::build(x, x, {1.0, 1.0}, 0.1), Error);
}

TEST(SparseGp, SnapshotRoundTrip) {
  std::mt19937_64 rng(8);
  const Eigen::VectorXd x = uniform(rng, 60, 0.0, 10.0);
  const SgpModel m = fit_sgp(x, noisy_sin(rng, x, 0.1), {.num_inducing = 6, .iters = 20});
  const SgpModel back = SgpModel::from_json(m.to_json());
  const Eigen::VectorXd grid = linspace(-1.0, 11.0, 50);
  EXPECT_LT((m.predict(grid).mean - back.predict(grid).mean).lpNorm<Eigen::Infinity>(), 1e-10);
  EXPECT_LT((m.predict(grid).variance - back.predict(grid).variance).lpNorm<Eigen::Infinity>(), 1e-10);
  EXPECT_NEAR(m.elbo(), back.elbo(), 1e-10);
}

// Reference predictions in the golden file come from an independent numpy
// evaluation of the same snapshot (tests/data/gen_sgp_golden.py).
TEST(SparseGp, GoldenSnapshot) {
  std::ifstream in(std::string(FSDP_TEST_DATA_DIR) + "/sgp_golden.json");
  ASSERT_TRUE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  const auto j = nlohmann::json::parse(ss.str());
  const SgpModel m = SgpModel::from_json(j.at("model").dump());
  const auto xs = j.at("test_x").get<std::vector<double>>();
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto var = j.at("variance").get<std::vector<double>>();
  const auto dist = j.at("predictive_distance").get<std::vector<double>>();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Posterior p = m.predict(xs[i]);
    EXPECT_NEAR(p.mean, mean[i], 1e-8) << xs[i];
    EXPECT_NEAR(p.variance, var[i], 1e-8) << xs[i];
    EXPECT_NEAR(m.predictive_distance(xs[i]), dist[i], 1e-8) << xs[i];
  }
}

TEST(KMeans, PlusPlusInitIsDeterministicAndDistinct) {
  std::mt19937_64 rng(9);
  const Eigen::VectorXd xe = uniform(rng, 300, 0.0, 50.0);
  const std::vector<double> x(xe.data(), xe.data() + xe.size());
  const auto a = kmeans_pp_init(x, 20, 4);
  const auto b = kmeans_pp_init(x, 20, 4);
  EXPECT_EQ(a, b);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(std::adjacent_find(sorted.begin(), sorted.end()), sorted.end());
  const auto few = kmeans_pp_init({1.0, 1.0, 2.0}, 4, 0);
  EXPECT_EQ(few.size(), 4u);
}

TEST(KMeans, LloydSeparatesClustersAndKeepsEmptyCentroids) {
  const std::vector<double> x{0.0, 0.1, 0.2, 10.0, 10.1, 10.2};
  const KMeansResult r = lloyd_1d(x, {1.0, 9.0, 100.0});
  EXPECT_NEAR(r.centroids[0], 0.1, 1e-12);
  EXPECT_NEAR(r.centroids[1], 10.1, 1e-12);
  EXPECT_EQ(r.centroids[2], 100.0);
  EXPECT_EQ(r.sizes, (std::vector<std::size_t>{3, 3, 0}));
  EXPECT_LE(r.iterations, 50);
}

}  // namespace
}  // namespace fsdp
