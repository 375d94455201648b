#include "fsdp/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "fsdp/common.hpp"

namespace fsdp {

namespace {

constexpr double kInf = 1e20;
constexpr double kRhoMin = 1e-6;
constexpr double kRhoEqScale = 1e3;

bool is_inf_lower(double v) { return v <= -kInf; }
bool is_inf_upper(double v) { return v >= kInf; }

double inf_norm(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

Eigen::VectorXd project(const Eigen::VectorXd& v, const Eigen::VectorXd& l, const Eigen::VectorXd& u) {
  return v.cwiseMax(l).cwiseMin(u);
}

}  // namespace

const char* to_string(QpStatus status) {
  switch (status) {
    case QpStatus::solved: return "solved";
    case QpStatus::max_iter: return "max_iter";
    case QpStatus::primal_infeasible: return "primal_infeasible";
  }
  return "unknown";
}

void QpProblem::validate() const {
  const auto n = H.rows();
  if (H.cols() != n || g.size() != n) raise(ErrorKind::invalid_input, "QP: H/g dimension mismatch");
  if (A.cols() != n && A.rows() > 0) raise(ErrorKind::invalid_input, "QP: A column count mismatch");
  if (l.size() != A.rows() || u.size() != A.rows()) raise(ErrorKind::invalid_input, "QP: bound sizes mismatch");
  if (!H.allFinite() || !g.allFinite() || !A.allFinite()) raise(ErrorKind::invalid_input, "QP: non-finite data");
  const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
  if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    raise(ErrorKind::invalid_input, "QP: H not symmetric");
  }
  for (Eigen::Index i = 0; i < l.size(); ++i) {
    if (std::isnan(l[i]) || std::isnan(u[i]) || l[i] > u[i]) {
      raise(ErrorKind::invalid_input, "QP: l > u at row " + std::to_string(i));
    }
  }
}

std::pair<double, double> qp_residuals(const QpProblem& p, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const Eigen::VectorXd ax = p.A * x;
  const double prim = inf_norm(ax - project(ax, p.l, p.u));
  const double dual = inf_norm(p.H * x + p.g + p.A.transpose() * y);
  return {prim, dual};
}

QpSolution QpSolver::solve(const QpProblem& problem) { return run(problem, std::nullopt); }

QpSolution QpSolver::solve(const QpProblem& problem, const Eigen::VectorXd& x0, const Eigen::VectorXd& y0) {
  if (x0.size() != problem.num_variables() || y0.size() != problem.num_constraints()) {
    return run(problem, std::nullopt);
  }
  return run(problem, std::make_pair(x0, y0));
}

namespace {

// Ruiz equilibration of the KKT matrix plus a cost scale. The ADMM iterates
// live in the scaled space; x = D xs, z = E^-1 zs, y = E ys / c.
struct Scaling {
  Eigen::VectorXd D, E;
  double c = 1.0;
};

double clamp_norm(double v) { return v < 1e-4 ? 1.0 : std::min(v, 1e4); }

Scaling equilibrate(Eigen::MatrixXd& H, Eigen::VectorXd& g, Eigen::MatrixXd& A) {
  const auto n = H.rows();
  const auto m = A.rows();
  Scaling sc{Eigen::VectorXd::Ones(n), Eigen::VectorXd::Ones(m), 1.0};
  for (int pass = 0; pass < 10; ++pass) {
    Eigen::VectorXd dx(n), de(m);
    for (Eigen::Index j = 0; j < n; ++j) {
      double v = H.col(j).cwiseAbs().maxCoeff();
      if (m > 0) v = std::max(v, A.col(j).cwiseAbs().maxCoeff());
      dx[j] = 1.0 / std::sqrt(clamp_norm(v));
    }
    for (Eigen::Index i = 0; i < m; ++i) de[i] = 1.0 / std::sqrt(clamp_norm(A.row(i).cwiseAbs().maxCoeff()));
    H = dx.asDiagonal() * H * dx.asDiagonal();
    g = dx.cwiseProduct(g);
    if (m > 0) A = de.asDiagonal() * A * dx.asDiagonal();
    sc.D = sc.D.cwiseProduct(dx);
    sc.E = sc.E.cwiseProduct(de);
  }
  const double mean_col = n > 0 ? H.cwiseAbs().colwise().maxCoeff().mean() : 1.0;
  const double c = 1.0 / clamp_norm(std::max(mean_col, inf_norm(g)));
  H *= c;
  g *= c;
  sc.c = c;
  return sc;
}

}  // namespace

QpSolution QpSolver::run(const QpProblem& p, std::optional<std::pair<Eigen::VectorXd, Eigen::VectorXd>> warm) {
  p.validate();
  const auto n = p.num_variables();
  const auto m = p.num_constraints();
  const QpSettings& st = settings_;

  Eigen::MatrixXd H = p.H;
  Eigen::VectorXd g = p.g;
  Eigen::MatrixXd A = m > 0 ? p.A : Eigen::MatrixXd::Zero(0, n);
  const Scaling sc = equilibrate(H, g, A);
  const Eigen::VectorXd Dinv = sc.D.cwiseInverse();
  const Eigen::VectorXd Einv = sc.E.cwiseInverse();

  // Clip infinities to a finite sentinel so projections stay well defined.
  const Eigen::VectorXd l_raw = p.l.cwiseMax(-kInf);
  const Eigen::VectorXd u_raw = p.u.cwiseMin(kInf);
  Eigen::VectorXd l(m), u(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    l[i] = is_inf_lower(l_raw[i]) ? -kInf : sc.E[i] * l_raw[i];
    u[i] = is_inf_upper(u_raw[i]) ? kInf : sc.E[i] * u_raw[i];
  }

  Eigen::VectorXd rho_vec(m);
  auto set_rho = [&](double rho) {
    for (Eigen::Index i = 0; i < m; ++i) {
      if (is_inf_lower(l[i]) && is_inf_upper(u[i])) {
        rho_vec[i] = kRhoMin;
      } else if (u_raw[i] - l_raw[i] < 1e-12) {
        rho_vec[i] = kRhoEqScale * rho;
      } else {
        rho_vec[i] = rho;
      }
    }
  };
  double rho = st.rho;
  set_rho(rho);

  Eigen::LLT<Eigen::MatrixXd> kkt;
  auto factor = [&]() {
    Eigen::MatrixXd K = H;
    K.diagonal().array() += st.sigma;
    if (m > 0) K.noalias() += A.transpose() * rho_vec.asDiagonal() * A;
    kkt.compute(K);
    if (kkt.info() != Eigen::Success) raise(ErrorKind::solver, "QP: reduced KKT matrix not positive definite");
  };
  factor();

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(m);
  if (warm) {
    x = Dinv.cwiseProduct(warm->first);
    y = sc.c * Einv.cwiseProduct(warm->second);
    z = project(A * x, l, u);
  }

  QpSolution sol;
  sol.status = QpStatus::max_iter;
  Eigen::VectorXd ax(m), hx(n), aty(n), x_tilde(n), z_tilde(m), z_relax(m), y_prev(m), delta_y(m);
  bool adapted = false;

  for (int it = 1; it <= st.max_iter; ++it) {
    Eigen::VectorXd rhs = st.sigma * x - g;
    if (m > 0) rhs.noalias() += A.transpose() * (rho_vec.cwiseProduct(z) - y);
    x_tilde = kkt.solve(rhs);
    z_tilde.noalias() = A * x_tilde;

    x = st.alpha * x_tilde + (1.0 - st.alpha) * x;
    z_relax = st.alpha * z_tilde + (1.0 - st.alpha) * z;
    y_prev = y;
    z = project(z_relax + y.cwiseQuotient(rho_vec), l, u);
    y += rho_vec.cwiseProduct(z_relax - z);
    sol.iterations = it;

    // Residuals and tolerances are measured on the unscaled problem.
    ax.noalias() = A * x;
    hx.noalias() = H * x;
    aty.noalias() = A.transpose() * y;
    const double r_prim = inf_norm(Einv.cwiseProduct(ax - z));
    const double r_dual = inf_norm(Dinv.cwiseProduct(hx + g + aty)) / sc.c;
    const double prim_scale = std::max(inf_norm(Einv.cwiseProduct(ax)), inf_norm(Einv.cwiseProduct(z)));
    const double dual_scale =
        std::max({inf_norm(Dinv.cwiseProduct(hx)), inf_norm(Dinv.cwiseProduct(aty)), inf_norm(Dinv.cwiseProduct(g))}) /
        sc.c;
    const double eps_prim = st.eps_abs + st.eps_rel * prim_scale;
    const double eps_dual = st.eps_abs + st.eps_rel * dual_scale;

    if (r_prim <= eps_prim && r_dual <= eps_dual) {
      sol.status = QpStatus::solved;
      break;
    }

    // Primal infeasibility certificate from the (unscaled) dual increment.
    delta_y = sc.E.cwiseProduct(y - y_prev);
    const double dy_norm = inf_norm(delta_y);
    if (m > 0 && dy_norm > 1e-30) {
      const double at_dy = inf_norm(p.A.transpose() * delta_y);
      if (at_dy <= st.eps_prim_inf * dy_norm) {
        double support = 0.0;
        bool valid = true;
        for (Eigen::Index i = 0; i < m && valid; ++i) {
          const double d = delta_y[i];
          if (d > st.eps_prim_inf * dy_norm) {
            if (is_inf_upper(u_raw[i])) valid = false; else support += u_raw[i] * d;
          } else if (d < -st.eps_prim_inf * dy_norm) {
            if (is_inf_lower(l_raw[i])) valid = false; else support += l_raw[i] * d;
          }
        }
        if (valid && support < -st.eps_prim_inf * dy_norm) {
          sol.status = QpStatus::primal_infeasible;
          break;
        }
      }
    }

    if (!adapted && it == st.adapt_rho_iter) {
      adapted = true;
      const double np = r_prim / std::max(prim_scale, 1e-12);
      const double nd = r_dual / std::max(dual_scale, 1e-12);
      const double ratio = std::sqrt(np / std::max(nd, 1e-30));
      if (ratio > st.adapt_rho_ratio || ratio < 1.0 / st.adapt_rho_ratio) {
        rho = std::clamp(rho * ratio, 1e-6, 1e6);
        set_rho(rho);
        factor();
      }
    }
  }

  sol.x = sc.D.cwiseProduct(x);
  sol.y = sc.E.cwiseProduct(y) / sc.c;
  if (sol.status != QpStatus::primal_infeasible && st.polish) {
    polish(p, Einv.cwiseProduct(z), sol);
  }
  std::tie(sol.primal_residual, sol.dual_residual) = qp_residuals(p, sol.x, sol.y);
  sol.objective = p.objective(sol.x);
  return sol;
}

bool QpSolver::polish(const QpProblem& p, const Eigen::VectorXd& z, QpSolution& sol) const {
  const auto n = p.num_variables();
  const auto m = p.num_constraints();
  std::vector<Eigen::Index> active;
  std::vector<double> target;
  for (Eigen::Index i = 0; i < m; ++i) {
    const bool lower = !is_inf_lower(p.l[i]) && z[i] - p.l[i] < -sol.y[i];
    const bool upper = !is_inf_upper(p.u[i]) && p.u[i] - z[i] < sol.y[i];
    const bool eq = p.u[i] - p.l[i] < 1e-12;
    if (eq || lower || upper) {
      active.push_back(i);
      target.push_back(eq ? p.l[i] : (lower ? p.l[i] : p.u[i]));
    }
  }
  const auto na = static_cast<Eigen::Index>(active.size());
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + na, n + na);
  Eigen::VectorXd rhs(n + na);
  K.topLeftCorner(n, n) = p.H;
  rhs.head(n) = -p.g;
  for (Eigen::Index k = 0; k < na; ++k) {
    K.block(n + k, 0, 1, n) = p.A.row(active[static_cast<std::size_t>(k)]);
    K.block(0, n + k, n, 1) = p.A.row(active[static_cast<std::size_t>(k)]).transpose();
    rhs[n + k] = target[static_cast<std::size_t>(k)];
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
  Eigen::VectorXd sol_kkt = lu.solve(rhs);
  if (!sol_kkt.allFinite() || (K * sol_kkt - rhs).lpNorm<Eigen::Infinity>() > 1e-9 * (1.0 + rhs.lpNorm<Eigen::Infinity>())) {
    return false;
  }
  Eigen::VectorXd x = sol_kkt.head(n);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
  for (Eigen::Index k = 0; k < na; ++k) y[active[static_cast<std::size_t>(k)]] = sol_kkt[n + k];

  // Reject if the guessed active set is wrong: multiplier signs or bounds violated.
  const double tol = settings_.eps_abs + settings_.eps_rel * std::max(1.0, inf_norm(y));
  for (Eigen::Index k = 0; k < na; ++k) {
    const Eigen::Index i = active[static_cast<std::size_t>(k)];
    if (p.u[i] - p.l[i] < 1e-12) continue;
    const bool at_lower = target[static_cast<std::size_t>(k)] == p.l[i];
    if (at_lower && y[i] > tol) return false;
    if (!at_lower && y[i] < -tol) return false;
  }
  auto [prim, dual] = qp_residuals(p, x, y);
  const auto [prim_old, dual_old] = qp_residuals(p, sol.x, sol.y);
  const double eps_p = settings_.eps_abs + settings_.eps_rel * inf_norm(p.A * x);
  if (prim > std::max(eps_p, prim_old) || dual > std::max(settings_.eps_abs, dual_old)) return false;
  sol.x = x;
  sol.y = y;
  sol.polished = true;
  return true;
}

QpSolution solve_qp(const QpProblem& problem, const QpSettings& settings) {
  QpSolver solver(settings);
  return solver.solve(problem);
}

}  // namespace fsdp
