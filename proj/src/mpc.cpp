#include "fsdp/mpc.hpp"

#include <chrono>
#include <cmath>

#include "fsdp/common.hpp"

namespace fsdp {

void MpcConfig::validate() const {
  if (N < 1) raise(ErrorKind::config, "mpc horizon must be >= 1");
  if (!(dt > 0.0)) raise(ErrorKind::config, "mpc dt must be positive");
  if (!(wheelbase > 0.0)) raise(ErrorKind::config, "wheelbase must be positive");
  for (const auto* q : {&q1, &q2}) {
    if ((*q)[0] != 0.0 || (*q)[2] != 0.0 || !((*q)[1] > 0.0)) {
      raise(ErrorKind::config, "q1 and q2 may only weight the lateral error");
    }
  }
  if ((q3.array() < 0.0).any() || (r.array() < 0.0).any()) raise(ErrorKind::config, "negative mpc weight");
  if ((u_min.array() > u_max.array()).any()) raise(ErrorKind::config, "input bounds out of order");
  if ((du_min.array() > 0.0).any() || (du_max.array() < 0.0).any()) {
    raise(ErrorKind::config, "rate bounds must contain zero");
  }
}

Eigen::Vector3d frenet_dynamics(const Raceline& track, const Eigen::Vector3d& x, const Eigen::Vector2d& u,
                                double wheelbase) {
  const double k = track.sample(x[0]).kappa;
  const double scale = 1.0 - k * x[1];
  const double sdot = u[0] * std::cos(x[2]) / scale;
  return {sdot, u[0] * std::sin(x[2]), u[0] * std::tan(u[1]) / wheelbase - k * sdot};
}

Linearization linearize_dynamics(const Eigen::Vector3d& x_ref, const Eigen::Vector2d& u_ref, const Raceline& track,
                                 double dt, double wheelbase) {
  const TrackSample ts = track.sample(x_ref[0]);
  const double k = ts.kappa, dk = ts.dkappa_ds;
  const double n = x_ref[1], th = x_ref[2], v = u_ref[0], de = u_ref[1];
  const double D = 1.0 - k * n;
  if (!(D > 0.0)) raise(ErrorKind::linearization, "1 - kappa n <= 0 at s=" + std::to_string(x_ref[0]));
  const double c = std::cos(th), sn = std::sin(th);
  const double cd = std::cos(de);

  Eigen::Matrix3d J = Eigen::Matrix3d::Zero();
  J(0, 0) = v * c * dk * n / (D * D);
  J(0, 1) = v * c * k / (D * D);
  J(0, 2) = -v * sn / D;
  J(1, 2) = v * c;
  J(2, 0) = -v * c * dk / (D * D);
  J(2, 1) = -k * k * v * c / (D * D);
  J(2, 2) = k * v * sn / D;
  Eigen::Matrix<double, 3, 2> Ju = Eigen::Matrix<double, 3, 2>::Zero();
  Ju(0, 0) = c / D;
  Ju(1, 0) = sn;
  Ju(2, 0) = std::tan(de) / wheelbase - k * c / D;
  Ju(2, 1) = v / (wheelbase * cd * cd);

  return {Eigen::Matrix3d::Identity() + dt * J, dt * Ju};
}

Corridor build_corridor(const std::vector<double>& s_refs, const CollisionInterval& interval,
                        const OpponentEstimate& est, const Raceline& track, Side side, const CorridorOptions& opt) {
  Corridor c;
  c.lower.reserve(s_refs.size());
  c.upper.reserve(s_refs.size());
  for (std::size_t k = 0; k < s_refs.size(); ++k) {
    const double s = s_refs[k];
    const TrackSample ts = track.sample(s);
    double lo = -(ts.d_right - opt.edge_margin);
    double hi = ts.d_left - opt.edge_margin;
    if (interval.exists && s >= interval.c_start && s <= interval.c_end) {
      const Posterior p = est.lateral(s);
      const double m = opt.margin + opt.lambda_sigma * std::sqrt(std::max(p.variance, 0.0));
      if (side == Side::left) {
        lo = p.mean + m;
      } else {
        hi = p.mean - m;
      }
    }
    if (!(lo < hi)) {
      raise(ErrorKind::infeasible_corridor, "corridor closes at step " + std::to_string(k) + " (s=" +
                                                std::to_string(s) + ")");
    }
    c.lower.push_back(lo);
    c.upper.push_back(hi);
  }
  return c;
}

namespace {

struct Condensed {
  std::vector<Linearization> lin;
  Eigen::MatrixXd gamma;  // 3N x 2N: dX = phi dx0 + gamma dU
  Eigen::VectorXd x_free; // absolute states with dU = 0
  Eigen::Vector3d dx0;
};

Condensed condense(const Eigen::Vector3d& x0, const FlatReferences& refs, const Raceline* track,
                   const MpcConfig& cfg) {
  const int N = cfg.N;
  Condensed out;
  out.dx0 = x0 - refs.x_ref[0];
  out.dx0[2] = wrap_angle(out.dx0[2]);
  out.lin.reserve(static_cast<std::size_t>(N));
  out.gamma = Eigen::MatrixXd::Zero(3 * N, 2 * N);
  out.x_free.resize(3 * N);
  Eigen::Vector3d free = out.dx0;
  for (int k = 1; k <= N; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    const Linearization l = linearize_dynamics(refs.x_ref[ks], refs.u_ref[ks - 1], *track, cfg.dt, cfg.wheelbase);
    free = l.A * free;
    out.x_free.segment<3>(3 * (k - 1)) = refs.x_ref[ks] + free;
    if (k > 1) out.gamma.block(3 * (k - 1), 0, 3, 2 * (k - 1)) = l.A * out.gamma.block(3 * (k - 2), 0, 3, 2 * (k - 1));
    out.gamma.block<3, 2>(3 * (k - 1), 2 * (k - 1)) = l.B;
    out.lin.push_back(l);
  }
  return out;
}

void check_refs(const FlatReferences& refs, const Corridor& corridor, const MpcConfig& cfg) {
  const auto n = static_cast<std::size_t>(cfg.N);
  if (refs.x_ref.size() != n + 1 || refs.u_ref.size() != n) {
    raise(ErrorKind::invalid_input, "references do not match the mpc horizon");
  }
  if (corridor.lower.size() != n || corridor.upper.size() != n) {
    raise(ErrorKind::invalid_input, "corridor does not match the mpc horizon");
  }
}

QpProblem assemble(const Condensed& cd, const Eigen::Vector3d& x0, const FlatReferences& refs,
                   const Corridor& corridor, const Eigen::Vector2d& u_prev, const MpcConfig& cfg, double* constant) {
  const int N = cfg.N;
  const Eigen::Index nx = 3 * N, nu = 2 * N;
  Eigen::VectorXd xr(nx), w1(nx), w2(nx), w3(nx), rr(nu);
  for (int k = 0; k < N; ++k) {
    xr.segment<3>(3 * k) = refs.x_ref[static_cast<std::size_t>(k + 1)];
    w1.segment<3>(3 * k) = cfg.q1;
    w2.segment<3>(3 * k) = cfg.q2;
    w3.segment<3>(3 * k) = cfg.q3;
    rr.segment<2>(2 * k) = cfg.r;
  }
  // Successive differences x_k - x_{k-1} with x_0 the measured state.
  Eigen::MatrixXd D = Eigen::MatrixXd::Identity(nx, nx);
  for (Eigen::Index i = 3; i < nx; ++i) D(i, i - 3) = -1.0;
  Eigen::VectorXd e0 = Eigen::VectorXd::Zero(nx);
  e0.head<3>() = x0;

  const Eigen::MatrixXd& G = cd.gamma;
  const Eigen::VectorXd& c = cd.x_free;
  const Eigen::MatrixXd DG = D * G;
  const Eigen::VectorXd r1 = c - xr, r3 = D * c - e0;

  QpProblem p;
  p.H = 2.0 * (G.transpose() * (w1 + w2).asDiagonal() * G + DG.transpose() * w3.asDiagonal() * DG);
  p.H.diagonal() += 2.0 * rr;
  p.H = 0.5 * (p.H + p.H.transpose()).eval();
  p.g = 2.0 * (G.transpose() * (w1.cwiseProduct(r1) + w2.cwiseProduct(c)) + DG.transpose() * w3.cwiseProduct(r3));
  if (constant) *constant = r1.dot(w1.cwiseProduct(r1)) + c.dot(w2.cwiseProduct(c)) + r3.dot(w3.cwiseProduct(r3));

  const Eigen::Index m = 2 * nu + N;
  p.A = Eigen::MatrixXd::Zero(m, nu);
  p.l.resize(m);
  p.u.resize(m);
  for (int k = 0; k < N; ++k) {
    const Eigen::Vector2d& ur = refs.u_ref[static_cast<std::size_t>(k)];
    const Eigen::Vector2d prev = k == 0 ? u_prev : refs.u_ref[static_cast<std::size_t>(k - 1)];
    for (int j = 0; j < 2; ++j) {
      const Eigen::Index col = 2 * k + j;
      p.A(col, col) = 1.0;
      p.l[col] = cfg.u_min[j] - ur[j];
      p.u[col] = cfg.u_max[j] - ur[j];
      const Eigen::Index rate = nu + col;
      p.A(rate, col) = 1.0;
      if (k > 0) p.A(rate, col - 2) = -1.0;
      p.l[rate] = cfg.du_min[j] - (ur[j] - prev[j]);
      p.u[rate] = cfg.du_max[j] - (ur[j] - prev[j]);
    }
    const Eigen::Index row = 2 * nu + k;
    p.A.row(row) = G.row(3 * k + 1);
    p.l[row] = corridor.lower[static_cast<std::size_t>(k)] - c[3 * k + 1];
    p.u[row] = corridor.upper[static_cast<std::size_t>(k)] - c[3 * k + 1];
  }
  return p;
}

}  // namespace

double dynamics_residual(const MpcSolution& sol, const FlatReferences& refs) {
  double worst = 0.0;
  Eigen::Vector3d prev = sol.x0 - refs.x_ref[0];
  prev[2] = wrap_angle(prev[2]);
  for (std::size_t k = 0; k < sol.X.size(); ++k) {
    const Eigen::Vector3d dx = sol.X[k] - refs.x_ref[k + 1];
    const Eigen::Vector2d du = sol.U[k] - refs.u_ref[k];
    worst = std::max(worst, (dx - sol.lin[k].A * prev - sol.lin[k].B * du).lpNorm<Eigen::Infinity>());
    prev = dx;
  }
  return worst;
}

MpcSolver::MpcSolver(const Raceline& track, MpcConfig cfg) : track_(&track), cfg_(std::move(cfg)), qp_(cfg_.qp) {
  cfg_.validate();
}

QpProblem MpcSolver::build_problem(const Eigen::Vector3d& x0, const FlatReferences& refs, const Corridor& corridor,
                                   const Eigen::Vector2d& u_prev, double* constant) const {
  check_refs(refs, corridor, cfg_);
  return assemble(condense(x0, refs, track_, cfg_), x0, refs, corridor, u_prev, cfg_, constant);
}

MpcSolution MpcSolver::solve(const Eigen::Vector3d& x0, const FlatReferences& refs, const Corridor& corridor,
                             const Eigen::Vector2d& u_prev) {
  const auto start = std::chrono::steady_clock::now();
  check_refs(refs, corridor, cfg_);
  const Condensed cd = condense(x0, refs, track_, cfg_);
  double constant = 0.0;
  const QpProblem p = assemble(cd, x0, refs, corridor, u_prev, cfg_, &constant);
  const int N = cfg_.N;

  QpSolution q;
  if (warm_ && warm_->second.size() == p.A.rows()) {
    // Previous inputs shifted by one step, last one repeated.
    Eigen::VectorXd z(2 * N);
    const auto& prev = warm_->first;
    for (int k = 0; k < N; ++k) {
      const std::size_t src = std::min<std::size_t>(static_cast<std::size_t>(k + 1), prev.size() - 1);
      z.segment<2>(2 * k) = prev[src] - refs.u_ref[static_cast<std::size_t>(k)];
    }
    q = qp_.solve(p, z, warm_->second);
  } else {
    q = qp_.solve(p);
  }

  MpcSolution sol;
  sol.x0 = x0;
  sol.lin = cd.lin;
  sol.status = q.status;
  sol.primal_residual = q.primal_residual;
  sol.dual_residual = q.dual_residual;
  sol.iterations = q.iterations;
  sol.objective = q.objective + constant;
  const Eigen::VectorXd X = cd.x_free + cd.gamma * q.x;
  for (int k = 0; k < N; ++k) {
    sol.X.emplace_back(X.segment<3>(3 * k));
    sol.U.emplace_back(refs.u_ref[static_cast<std::size_t>(k)] + q.x.segment<2>(2 * k));
  }
  if (sol.solved()) {
    warm_.emplace(sol.U, q.y);
  } else {
    warm_.reset();
  }
  sol.solve_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return sol;
}

}  // namespace fsdp
