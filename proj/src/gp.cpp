#include "fsdp/gp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "json.hpp"

#include "fsdp/common.hpp"
#include "fsdp/kmeans.hpp"
#include "fsdp/simd.hpp"

namespace fsdp {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_kernel(const RbfKernel& k) {
  if (!(k.lengthscale > 0.0) || !(k.signal_variance > 0.0) || !std::isfinite(k.lengthscale) ||
      !std::isfinite(k.signal_variance)) {
    raise(ErrorKind::invalid_input, "RBF kernel needs positive finite lengthscale and signal variance");
  }
}

void check_data(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size()) raise(ErrorKind::invalid_input, "GP: input/target size mismatch");
  if (x.size() == 0) raise(ErrorKind::invalid_input, "GP: no training data");
  if (!x.allFinite() || !y.allFinite()) raise(ErrorKind::invalid_input, "GP: non-finite training data");
}

Eigen::MatrixXd sq_dist(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  Eigen::MatrixXd d(a.size(), b.size());
  for (Eigen::Index j = 0; j < b.size(); ++j) d.col(j) = (a.array() - b[j]).square().matrix();
  return d;
}

Eigen::LLT<Eigen::MatrixXd> inducing_chol(const VfeParams& p, Eigen::MatrixXd* kmm_out = nullptr) {
  Eigen::MatrixXd kmm = p.kernel.cross(p.inducing, p.inducing);
  if (kmm_out) *kmm_out = kmm;
  kmm.diagonal().array() += kJitter * p.kernel.signal_variance;
  Eigen::LLT<Eigen::MatrixXd> llt(kmm);
  if (llt.info() != Eigen::Success) raise(ErrorKind::model_degenerate, "SGP: inducing covariance not positive definite");
  return llt;
}

// Ascent with a normalized-gradient step: grows 1.2x on improvement, halves
// and retries on a decrease. Every evaluation counts against `iters`.
template <class Eval, class Clamp>
Eigen::VectorXd ascend(Eigen::VectorXd theta, int iters, Eval eval, Clamp clamp) {
  Eigen::VectorXd grad(theta.size()), cand_grad(theta.size());
  double value = eval(theta, &grad);
  if (!std::isfinite(value)) raise(ErrorKind::fit, "GP fit: bound not finite at the initial point");
  double step = 0.1;
  for (int it = 0; it < iters; ++it) {
    const double gn = grad.norm();
    if (!(gn > 0.0) || !std::isfinite(gn)) break;
    Eigen::VectorXd cand = clamp(theta + (step / gn) * grad);
    double v = -std::numeric_limits<double>::infinity();
    try {
      v = eval(cand, &cand_grad);
    } catch (const Error&) {
    }
    if (std::isfinite(v) && v > value && cand_grad.allFinite()) {
      theta = std::move(cand);
      grad = cand_grad;
      value = v;
      step = std::min(step * 1.2, 1.0);
    } else {
      step *= 0.5;
      if (step < 1e-12) break;
    }
  }
  return theta;
}

struct Ranges {
  double x_lo, x_hi, span, y_var;
};

Ranges data_ranges(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  Ranges r;
  r.x_lo = x.minCoeff();
  r.x_hi = x.maxCoeff();
  r.span = r.x_hi - r.x_lo;
  const double m = y.mean();
  r.y_var = (y.array() - m).square().mean();
  return r;
}

}  // namespace

double RbfKernel::operator()(double a, double b) const {
  const double d = a - b;
  return signal_variance * std::exp(-(d * d) / (2.0 * lengthscale * lengthscale));
}

Eigen::MatrixXd RbfKernel::cross(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
  RowMatrix out(a.size(), b.size());
  simd::rbf_cross(a.data(), static_cast<std::size_t>(a.size()), b.data(), static_cast<std::size_t>(b.size()),
                  1.0 / (2.0 * lengthscale * lengthscale), signal_variance, out.data());
  return out;
}

Eigen::VectorXd VfeParams::pack() const {
  Eigen::VectorXd t(3 + inducing.size());
  t << std::log(kernel.lengthscale), std::log(kernel.signal_variance), std::log(noise_variance), inducing;
  return t;
}

VfeParams VfeParams::unpack(const Eigen::VectorXd& theta) {
  VfeParams p;
  p.kernel.lengthscale = std::exp(theta[0]);
  p.kernel.signal_variance = std::exp(theta[1]);
  p.noise_variance = std::exp(theta[2]);
  p.inducing = theta.tail(theta.size() - 3);
  return p;
}

double vfe_bound(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const VfeParams& p, Eigen::VectorXd* grad) {
  check_kernel(p.kernel);
  const auto n = x.size();
  const auto m = p.inducing.size();
  const double sf2 = p.kernel.signal_variance;
  const double s2 = p.noise_variance;
  const double sigma = std::sqrt(s2);
  const double ell2 = p.kernel.lengthscale * p.kernel.lengthscale;

  Eigen::MatrixXd kmm0;
  const auto llt = inducing_chol(p, &kmm0);
  const Eigen::MatrixXd kmn = p.kernel.cross(p.inducing, x);
  const auto L = llt.matrixL();
  const Eigen::MatrixXd a = L.solve(kmn) / sigma;
  const Eigen::MatrixXd aat = a * a.transpose();
  Eigen::MatrixXd b = aat;
  b.diagonal().array() += 1.0;
  const Eigen::LLT<Eigen::MatrixXd> lb(b);
  if (lb.info() != Eigen::Success) raise(ErrorKind::model_degenerate, "SGP: I + AA' not positive definite");
  const Eigen::VectorXd ay = a * y;
  const Eigen::VectorXd c = lb.matrixL().solve(ay);
  const double tr_aat = aat.trace();
  const double nd = static_cast<double>(n);

  const double bound = -0.5 * nd * kLog2Pi - 0.5 * nd * std::log(s2) - lb.matrixLLT().diagonal().array().log().sum() -
                       (y.squaredNorm() - c.squaredNorm()) / (2.0 * s2) - (nd * sf2 - s2 * tr_aat) / (2.0 * s2);
  if (!grad) return bound;

  const Eigen::VectorXd binv_ay = lb.solve(ay);
  const Eigen::VectorXd alpha = (y - a.transpose() * binv_ay) / s2;
  const Eigen::MatrixXd pm = L.transpose().solve(a) * sigma;  // Kmm^-1 Kmn
  const Eigen::VectorXd p_alpha = pm * alpha;
  const Eigen::MatrixXd apt = a * pm.transpose();
  // G P' with G = dF/dQ, Q the Nystrom approximation of Knn.
  const Eigen::MatrixXd gpt = 0.5 * alpha * p_alpha.transpose() + (0.5 / s2) * (a.transpose() * lb.solve(apt));
  const Eigen::MatrixXd d_knm = 2.0 * gpt;
  Eigen::MatrixXd d_kmm = -pm * gpt;
  d_kmm = 0.5 * (d_kmm + d_kmm.transpose()).eval();

  const double tr_binv_aat = lb.solve(aat).trace();
  const double tr_sigma_inv = (nd - tr_binv_aat) / s2;
  const double d_s2 = 0.5 * (alpha.squaredNorm() - tr_sigma_inv) + (nd * sf2 - s2 * tr_aat) / (2.0 * s2 * s2);

  const Eigen::MatrixXd knm = kmn.transpose();
  const Eigen::MatrixXd r2nm = sq_dist(x, p.inducing);
  const Eigen::MatrixXd r2mm = sq_dist(p.inducing, p.inducing);
  Eigen::MatrixXd kmm_j = kmm0;
  kmm_j.diagonal().array() += kJitter * sf2;

  const Eigen::MatrixXd dk_nm = d_knm.cwiseProduct(knm);
  const Eigen::MatrixXd dk_mm = d_kmm.cwiseProduct(kmm0);

  grad->resize(3 + m);
  (*grad)[0] = (dk_nm.cwiseProduct(r2nm).sum() + dk_mm.cwiseProduct(r2mm).sum()) / ell2;
  (*grad)[1] = dk_nm.sum() + d_kmm.cwiseProduct(kmm_j).sum() - nd * sf2 / (2.0 * s2);
  (*grad)[2] = s2 * d_s2;
  for (Eigen::Index j = 0; j < m; ++j) {
    const double zj = p.inducing[j];
    const double from_knm = (dk_nm.col(j).array() * (x.array() - zj)).sum() / ell2;
    const double from_kmm = -2.0 * (dk_mm.row(j).transpose().array() * (zj - p.inducing.array())).sum() / ell2;
    (*grad)[3 + j] = from_knm + from_kmm;
  }
  return bound;
}

SgpModel SgpModel::build(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const VfeParams& params) {
  check_data(x, y);
  check_kernel(params.kernel);
  if (!(params.noise_variance > 0.0)) raise(ErrorKind::invalid_input, "SGP: noise variance must be positive");
  if (params.inducing.size() == 0 || !params.inducing.allFinite()) {
    raise(ErrorKind::invalid_input, "SGP: need at least one finite inducing input");
  }
  SgpModel m;
  m.params_ = params;
  m.x_ = x;
  m.y_ = y;
  m.y_mean_ = y.mean();
  m.factorize();
  return m;
}

void SgpModel::factorize() {
  const Eigen::VectorXd yc = y_.array() - y_mean_;
  const double sigma = std::sqrt(params_.noise_variance);
  const auto llt = inducing_chol(params_);
  l_ = llt.matrixL();
  const Eigen::MatrixXd a = llt.matrixL().solve(params_.kernel.cross(params_.inducing, x_)) / sigma;
  Eigen::MatrixXd b = a * a.transpose();
  b.diagonal().array() += 1.0;
  const Eigen::LLT<Eigen::MatrixXd> lb(b);
  if (lb.info() != Eigen::Success) raise(ErrorKind::model_degenerate, "SGP: I + AA' not positive definite");
  lb_ = lb.matrixL();
  const Eigen::VectorXd c = lb.matrixL().solve(a * yc);
  w_ = llt.matrixU().solve(lb.matrixU().solve(c)) / sigma;
  elbo_ = vfe_bound(x_, yc, params_);
}

PosteriorBatch SgpModel::predict(const Eigen::VectorXd& xs) const {
  if (empty()) raise(ErrorKind::model_degenerate, "SGP: model not fitted");
  const Eigen::MatrixXd ks = params_.kernel.cross(params_.inducing, xs);
  const Eigen::MatrixXd v = l_.triangularView<Eigen::Lower>().solve(ks);
  const Eigen::MatrixXd v2 = lb_.triangularView<Eigen::Lower>().solve(v);
  PosteriorBatch out;
  out.mean = (ks.transpose() * w_).array() + y_mean_;
  out.variance = (params_.kernel.signal_variance - v.colwise().squaredNorm().array() + v2.colwise().squaredNorm().array())
                     .max(0.0)
                     .matrix()
                     .transpose();
  return out;
}

Posterior SgpModel::predict(double x) const {
  const PosteriorBatch b = predict(Eigen::VectorXd::Constant(1, x));
  return {b.mean[0], b.variance[0]};
}

Eigen::VectorXd SgpModel::predictive_distance(const Eigen::VectorXd& xs) const {
  if (empty()) raise(ErrorKind::model_degenerate, "SGP: model not fitted");
  const Eigen::MatrixXd v = l_.triangularView<Eigen::Lower>().solve(params_.kernel.cross(params_.inducing, xs));
  return (params_.kernel.signal_variance + params_.noise_variance - v.colwise().squaredNorm().array()).matrix().transpose();
}

double SgpModel::predictive_distance(double x) const { return predictive_distance(Eigen::VectorXd::Constant(1, x))[0]; }

std::string SgpModel::to_json() const {
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  nlohmann::json j;
  j["kernel"] = {{"lengthscale", params_.kernel.lengthscale}, {"signal_variance", params_.kernel.signal_variance}};
  j["noise_variance"] = params_.noise_variance;
  j["inducing"] = vec(params_.inducing);
  j["train_x"] = vec(x_);
  j["train_y"] = vec(y_);
  j["elbo"] = elbo_;
  return j.dump(1);
}

SgpModel SgpModel::from_json(const std::string& text) {
  auto vec = [](const nlohmann::json& a) {
    const auto v = a.get<std::vector<double>>();
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  try {
    const auto j = nlohmann::json::parse(text);
    VfeParams p;
    p.kernel.lengthscale = j.at("kernel").at("lengthscale").get<double>();
    p.kernel.signal_variance = j.at("kernel").at("signal_variance").get<double>();
    p.noise_variance = j.at("noise_variance").get<double>();
    p.inducing = vec(j.at("inducing"));
    return build(vec(j.at("train_x")), vec(j.at("train_y")), p);
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::io, std::string("SGP snapshot: ") + e.what());
  }
}

VfeParams default_params(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const Ranges r = data_ranges(x, y);
  VfeParams p;
  const double var = std::max(r.y_var, 1e-6);
  p.kernel.lengthscale = std::max(r.span / 10.0, 1e-3);
  p.kernel.signal_variance = var;
  p.noise_variance = 0.1 * var;
  return p;
}

SgpModel fit_sgp(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const SgpFitOptions& opts) {
  check_data(x, y);
  if (x.size() < 2) raise(ErrorKind::fit, "SGP fit needs at least two points");
  if (opts.num_inducing < 1) raise(ErrorKind::invalid_input, "SGP fit needs at least one inducing point");
  const Ranges r = data_ranges(x, y);
  if (!(r.span > 0.0)) raise(ErrorKind::fit, "SGP fit: all inputs identical");

  VfeParams p = default_params(x, y);
  if (opts.kernel) p.kernel = *opts.kernel;
  if (opts.noise_variance) p.noise_variance = *opts.noise_variance;
  if (opts.inducing) {
    p.inducing = *opts.inducing;
  } else {
    const std::vector<double> xs(x.data(), x.data() + x.size());
    const auto m = std::min<std::size_t>(static_cast<std::size_t>(opts.num_inducing), xs.size());
    const auto c = kmeans_pp_init(xs, m, opts.seed);
    p.inducing = Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
    std::sort(p.inducing.begin(), p.inducing.end());
  }
  const Eigen::VectorXd yc = y.array() - y.mean();

  if (opts.iters > 0 && (opts.optimize_hyper || opts.optimize_inducing)) {
    // Inducing inputs are optimized in units of the initial lengthscale.
    const double zs = p.kernel.lengthscale;
    const double var = std::max(r.y_var, 1e-12);
    const double ls_lo = std::log(1e-3 * r.span), ls_hi = std::log(10.0 * r.span);
    const double sf_lo = std::log(1e-6 * var), sf_hi = std::log(1e3 * var);
    const double nz_lo = std::log(1e-8 * var), nz_hi = std::log(1e3 * var);
    const VfeParams fixed = p;
    auto to_params = [&](const Eigen::VectorXd& t) {
      VfeParams q = VfeParams::unpack(t);
      q.inducing *= zs;
      return q;
    };
    Eigen::VectorXd theta = p.pack();
    theta.tail(p.inducing.size()) /= zs;
    auto clamp = [&](Eigen::VectorXd t) {
      if (!opts.optimize_hyper) t.head(3) = fixed.pack().head(3);
      if (!opts.optimize_inducing) t.tail(fixed.inducing.size()) = fixed.inducing / zs;
      t[0] = std::clamp(t[0], ls_lo, ls_hi);
      t[1] = std::clamp(t[1], sf_lo, sf_hi);
      t[2] = std::clamp(t[2], nz_lo, nz_hi);
      for (Eigen::Index i = 3; i < t.size(); ++i) t[i] = std::clamp(t[i], (r.x_lo - r.span) / zs, (r.x_hi + r.span) / zs);
      return t;
    };
    auto eval = [&](const Eigen::VectorXd& t, Eigen::VectorXd* g) {
      const double f = vfe_bound(x, yc, to_params(t), g);
      if (g) {
        g->tail(fixed.inducing.size()) *= zs;
        if (!opts.optimize_hyper) g->head(3).setZero();
        if (!opts.optimize_inducing) g->tail(fixed.inducing.size()).setZero();
      }
      return f;
    };
    p = to_params(ascend(clamp(theta), opts.iters, eval, clamp));
  }
  return SgpModel::build(x, y, p);
}

DenseGpModel DenseGpModel::build(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const RbfKernel& kernel,
                                 double noise_variance) {
  check_data(x, y);
  check_kernel(kernel);
  if (x.size() > kMaxPoints) {
    raise(ErrorKind::invalid_input, "dense GP refuses " + std::to_string(x.size()) + " points (limit 2000)");
  }
  if (!(noise_variance > 0.0)) raise(ErrorKind::invalid_input, "dense GP: noise variance must be positive");
  DenseGpModel m;
  m.kernel_ = kernel;
  m.noise_ = noise_variance;
  m.x_ = x;
  m.y_mean_ = y.mean();
  const Eigen::VectorXd yc = y.array() - m.y_mean_;
  Eigen::MatrixXd k = kernel.cross(x, x);
  k.diagonal().array() += noise_variance;
  m.llt_.compute(k);
  if (m.llt_.info() != Eigen::Success) raise(ErrorKind::model_degenerate, "dense GP: covariance not positive definite");
  m.alpha_ = m.llt_.solve(yc);
  m.lml_ = -0.5 * yc.dot(m.alpha_) - m.llt_.matrixLLT().diagonal().array().log().sum() -
           0.5 * static_cast<double>(x.size()) * kLog2Pi;
  return m;
}

PosteriorBatch DenseGpModel::predict(const Eigen::VectorXd& xs) const {
  const Eigen::MatrixXd ks = kernel_.cross(x_, xs);
  const Eigen::MatrixXd v = llt_.matrixL().solve(ks);
  PosteriorBatch out;
  out.mean = (ks.transpose() * alpha_).array() + y_mean_;
  out.variance = (kernel_.signal_variance - v.colwise().squaredNorm().array()).max(0.0).matrix().transpose();
  return out;
}

Posterior DenseGpModel::predict(double x) const {
  const PosteriorBatch b = predict(Eigen::VectorXd::Constant(1, x));
  return {b.mean[0], b.variance[0]};
}

double dense_lml(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const RbfKernel& kernel, double noise,
                 Eigen::Vector3d* grad) {
  check_kernel(kernel);
  const Eigen::MatrixXd kf = kernel.cross(x, x);
  Eigen::MatrixXd k = kf;
  k.diagonal().array() += noise;
  const Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) raise(ErrorKind::model_degenerate, "dense GP: covariance not positive definite");
  const Eigen::VectorXd alpha = llt.solve(y);
  const double lml = -0.5 * y.dot(alpha) - llt.matrixLLT().diagonal().array().log().sum() -
                     0.5 * static_cast<double>(x.size()) * kLog2Pi;
  if (grad) {
    Eigen::MatrixXd w = -llt.solve(Eigen::MatrixXd::Identity(x.size(), x.size()));
    w.noalias() += alpha * alpha.transpose();
    const double ell2 = kernel.lengthscale * kernel.lengthscale;
    const Eigen::MatrixXd wk = w.cwiseProduct(kf);
    (*grad)[0] = 0.5 * wk.cwiseProduct(sq_dist(x, x)).sum() / ell2;
    (*grad)[1] = 0.5 * wk.sum();
    (*grad)[2] = 0.5 * noise * w.trace();
  }
  return lml;
}

DenseGpModel fit_dense_gp(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const DenseFitOptions& opts) {
  check_data(x, y);
  if (x.size() > DenseGpModel::kMaxPoints) {
    raise(ErrorKind::invalid_input, "dense GP refuses " + std::to_string(x.size()) + " points (limit 2000)");
  }
  const Ranges r = data_ranges(x, y);
  if (!(r.span > 0.0)) raise(ErrorKind::fit, "dense GP fit: all inputs identical");
  VfeParams p = default_params(x, y);
  if (opts.kernel) p.kernel = *opts.kernel;
  if (opts.noise_variance) p.noise_variance = *opts.noise_variance;
  const Eigen::VectorXd yc = y.array() - y.mean();
  const double var = std::max(r.y_var, 1e-12);
  const double ls_lo = std::log(1e-3 * r.span), ls_hi = std::log(10.0 * r.span);
  const double sf_lo = std::log(1e-6 * var), sf_hi = std::log(1e3 * var);
  const double nz_lo = std::log(1e-8 * var), nz_hi = std::log(1e3 * var);
  Eigen::VectorXd theta(3);
  theta << std::log(p.kernel.lengthscale), std::log(p.kernel.signal_variance), std::log(p.noise_variance);
  auto clamp = [&](Eigen::VectorXd t) {
    t[0] = std::clamp(t[0], ls_lo, ls_hi);
    t[1] = std::clamp(t[1], sf_lo, sf_hi);
    t[2] = std::clamp(t[2], nz_lo, nz_hi);
    return t;
  };
  auto eval = [&](const Eigen::VectorXd& t, Eigen::VectorXd* g) {
    Eigen::Vector3d g3;
    const double f = dense_lml(x, yc, {std::exp(t[0]), std::exp(t[1])}, std::exp(t[2]), g ? &g3 : nullptr);
    if (g) *g = g3;
    return f;
  };
  if (opts.iters > 0) theta = ascend(clamp(theta), opts.iters, eval, clamp);
  return DenseGpModel::build(x, y, {std::exp(theta[0]), std::exp(theta[1])}, std::exp(theta[2]));
}

}  // namespace fsdp
