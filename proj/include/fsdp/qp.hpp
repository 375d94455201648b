#pragma once

#include <Eigen/Dense>
#include <optional>

namespace fsdp {

/// minimize 1/2 x'Hx + g'x  subject to  l <= Ax <= u.
/// Infinite entries of l/u mean an open side.
struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd A;
  Eigen::VectorXd l;
  Eigen::VectorXd u;

  Eigen::Index num_variables() const { return H.rows(); }
  Eigen::Index num_constraints() const { return A.rows(); }

  /// Throws invalid-input on inconsistent dimensions, asymmetric H or l > u.
  void validate() const;
  double objective(const Eigen::VectorXd& x) const { return 0.5 * x.dot(H * x) + g.dot(x); }
};

struct QpSettings {
  double eps_abs = 1e-6;
  double eps_rel = 1e-6;
  int max_iter = 4000;
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;  // over-relaxation
  double eps_prim_inf = 1e-7;
  int adapt_rho_iter = 100;
  double adapt_rho_ratio = 10.0;
  bool polish = true;
};

enum class QpStatus { solved, max_iter, primal_infeasible };

const char* to_string(QpStatus status);

struct QpSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd y;  // y > 0: upper bound active, y < 0: lower bound active
  QpStatus status = QpStatus::max_iter;
  double primal_residual = 0.0;  // ||Ax - proj_[l,u](Ax)||_inf
  double dual_residual = 0.0;    // ||Hx + g + A'y||_inf
  double objective = 0.0;
  int iterations = 0;
  bool polished = false;
};

/// ADMM operator-splitting QP solver with over-relaxation, a single
/// residual-balancing rho rescale and active-set polishing of the result.
///
/// An instance keeps per-call scratch; use one instance per thread.
class QpSolver {
 public:
  explicit QpSolver(QpSettings settings = {}) : settings_(settings) {}

  QpSolution solve(const QpProblem& problem);
  /// Warm start from a previous primal/dual pair (sizes must match the problem).
  QpSolution solve(const QpProblem& problem, const Eigen::VectorXd& x0, const Eigen::VectorXd& y0);

  const QpSettings& settings() const { return settings_; }

 private:
  QpSolution run(const QpProblem& problem, std::optional<std::pair<Eigen::VectorXd, Eigen::VectorXd>> warm);
  bool polish(const QpProblem& problem, const Eigen::VectorXd& z, QpSolution& sol) const;

  QpSettings settings_;
};

QpSolution solve_qp(const QpProblem& problem, const QpSettings& settings = {});

/// Residuals of an arbitrary primal/dual pair, as reported in QpSolution.
std::pair<double, double> qp_residuals(const QpProblem& problem, const Eigen::VectorXd& x,
                                       const Eigen::VectorXd& y);

}  // namespace fsdp
