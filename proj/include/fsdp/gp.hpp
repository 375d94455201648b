#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>

namespace fsdp {

/// k(a, b) = signal_variance * exp(-(a - b)^2 / (2 lengthscale^2))
struct RbfKernel {
  double lengthscale = 1.0;
  double signal_variance = 1.0;

  double operator()(double a, double b) const;
  /// Row-major cross-covariance, result(i, j) = k(a_i, b_j).
  Eigen::MatrixXd cross(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;
};

struct Posterior {
  double mean = 0.0;
  double variance = 0.0;  // latent f variance, clamped at 0
};

struct PosteriorBatch {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
};

/// Everything the VFE bound depends on besides the data.
struct VfeParams {
  RbfKernel kernel;
  double noise_variance = 0.1;
  Eigen::VectorXd inducing;

  /// [log l, log sf2, log noise, z_1 .. z_M]
  Eigen::VectorXd pack() const;
  static VfeParams unpack(const Eigen::VectorXd& theta);
};

/// Jitter added to the inducing covariance, relative to the signal variance.
inline constexpr double kJitter = 1e-8;

/// Titsias collapsed bound F_V for zero-mean targets y. If `grad` is given it
/// receives dF/d(pack()).
double vfe_bound(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const VfeParams& params,
                 Eigen::VectorXd* grad = nullptr);

/// VFE sparse GP with cached factorizations. Targets are centered by their
/// mean, which is added back on prediction. Immutable once built.
class SgpModel {
 public:
  SgpModel() = default;

  /// Fixed-parameter model; no optimization.
  static SgpModel build(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const VfeParams& params);

  Posterior predict(double x) const;
  PosteriorBatch predict(const Eigen::VectorXd& x) const;

  /// k(x,x) - k_xZ Kzz^-1 k_Zx + noise
  double predictive_distance(double x) const;
  Eigen::VectorXd predictive_distance(const Eigen::VectorXd& x) const;

  const VfeParams& params() const { return params_; }
  const RbfKernel& kernel() const { return params_.kernel; }
  double noise_variance() const { return params_.noise_variance; }
  const Eigen::VectorXd& inducing() const { return params_.inducing; }
  const Eigen::VectorXd& train_x() const { return x_; }
  const Eigen::VectorXd& train_y() const { return y_; }
  double y_mean() const { return y_mean_; }
  double elbo() const { return elbo_; }
  bool empty() const { return x_.size() == 0; }

  std::string to_json() const;
  static SgpModel from_json(const std::string& text);

 private:
  void factorize();

  VfeParams params_;
  Eigen::VectorXd x_, y_;
  double y_mean_ = 0.0;
  double elbo_ = 0.0;
  Eigen::MatrixXd l_;    // chol(Kzz + jitter)
  Eigen::MatrixXd lb_;   // chol(I + A A'), A = L^-1 Kzx / sigma
  Eigen::VectorXd w_;    // mean weights on k_Zx
};

struct SgpFitOptions {
  int num_inducing = 40;
  int iters = 200;
  std::uint64_t seed = 0;
  bool optimize_hyper = true;
  bool optimize_inducing = true;
  /// Warm start; defaults come from the data when absent.
  std::optional<RbfKernel> kernel;
  std::optional<double> noise_variance;
  std::optional<Eigen::VectorXd> inducing;
};

/// Gradient ascent on the VFE bound in log-parameter space with a step that
/// grows on success and halves on a decrease. Inducing inputs start from
/// K-means++ centers unless supplied.
SgpModel fit_sgp(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const SgpFitOptions& opts = {});

/// Default hyperparameters used to initialise fits.
VfeParams default_params(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

/// Exact GP regression, used as test oracle and as the latest-lap baseline.
class DenseGpModel {
 public:
  static constexpr Eigen::Index kMaxPoints = 2000;

  static DenseGpModel build(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const RbfKernel& kernel,
                            double noise_variance);

  Posterior predict(double x) const;
  PosteriorBatch predict(const Eigen::VectorXd& x) const;
  /// log N(y - mean | 0, K + noise I)
  double log_marginal_likelihood() const { return lml_; }

  const RbfKernel& kernel() const { return kernel_; }
  double noise_variance() const { return noise_; }

 private:
  RbfKernel kernel_;
  double noise_ = 0.0;
  Eigen::VectorXd x_;
  double y_mean_ = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;
  double lml_ = 0.0;
};

/// Log marginal likelihood of zero-mean y and its gradient with respect to
/// [log l, log sf2, log noise].
double dense_lml(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const RbfKernel& kernel, double noise,
                 Eigen::Vector3d* grad = nullptr);

struct DenseFitOptions {
  int iters = 200;
  std::optional<RbfKernel> kernel;
  std::optional<double> noise_variance;
};

/// Hyperparameter fit with the same ascent scheme as fit_sgp.
DenseGpModel fit_dense_gp(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const DenseFitOptions& opts = {});

}  // namespace fsdp
