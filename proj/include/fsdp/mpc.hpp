#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "fsdp/predictor.hpp"
#include "fsdp/qp.hpp"
#include "fsdp/seed.hpp"
#include "fsdp/track.hpp"

namespace fsdp {

/// Diagonal weights act on (s, n, theta) and (v, delta). Rate bounds are per
/// step (already multiplied by dt).
struct MpcConfig {
  int N = 20;
  double dt = 0.05;
  Eigen::Vector3d q1{0.0, 10.0, 0.0};  // tracking the seed
  Eigen::Vector3d q2{0.0, 1.0, 0.0};   // pull toward the racing line
  Eigen::Vector3d q3{0.0, 5.0, 0.0};   // successive-state smoothing
  Eigen::Vector2d r{1.0, 10.0};
  Eigen::Vector2d u_min{0.0, -0.4};
  Eigen::Vector2d u_max{7.0, 0.4};
  Eigen::Vector2d du_min{-0.3, -0.16};
  Eigen::Vector2d du_max{0.2, 0.16};
  double wheelbase = 0.33;
  QpSettings qp{};

  /// Raises config when a weight or bound breaks the documented shape.
  void validate() const;
};

/// Continuous Frenet kinematic bicycle: (s', n', theta').
Eigen::Vector3d frenet_dynamics(const Raceline& track, const Eigen::Vector3d& x, const Eigen::Vector2d& u,
                                double wheelbase);

struct Linearization {
  Eigen::Matrix3d A;
  Eigen::Matrix<double, 3, 2> B;
};

/// Forward-Euler discretization of the Jacobians at (x_ref, u_ref).
/// Raises linearization when 1 - kappa n <= 0.
Linearization linearize_dynamics(const Eigen::Vector3d& x_ref, const Eigen::Vector2d& u_ref, const Raceline& track,
                                 double dt, double wheelbase);

struct Corridor {
  std::vector<double> lower, upper;
};

struct CorridorOptions {
  double margin = 0.35;        // opponent-side clearance (half width + 0.05)
  double edge_margin = 0.0;    // subtracted from the track bounds
  double lambda_sigma = 0.0;   // posterior std inflation of the margin
};

/// Bounds on n at each reference arc length. Inside the closed collision
/// interval the bound on the opponent's side follows the predicted opponent.
/// Raises infeasible_corridor when lower >= upper anywhere.
Corridor build_corridor(const std::vector<double>& s_refs, const CollisionInterval& interval,
                        const OpponentEstimate& est, const Raceline& track, Side side,
                        const CorridorOptions& opt = {});

struct MpcSolution {
  std::vector<Eigen::Vector3d> X;  // x_1..x_N
  std::vector<Eigen::Vector2d> U;  // u_0..u_{N-1}
  Eigen::Vector3d x0 = Eigen::Vector3d::Zero();
  std::vector<Linearization> lin;  // A_k, B_k for k = 1..N
  QpStatus status = QpStatus::max_iter;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double objective = 0.0;  // full quadratic including constant terms
  int iterations = 0;
  double solve_time = 0.0;  // [s]

  bool solved() const { return status == QpStatus::solved; }
};

/// max_k |dx_k - A_k dx_{k-1} - B_k du_{k-1}| in error coordinates about refs.
double dynamics_residual(const MpcSolution& sol, const FlatReferences& refs);

/// Condensed linear-time-varying MPC over the input deviations. Keeps the
/// previous solution to warm-start the next cycle; one instance per episode.
class MpcSolver {
 public:
  /// The raceline must outlive the solver.
  explicit MpcSolver(const Raceline& track, MpcConfig cfg = {});

  /// `u_prev` is the input applied in the last step (rate bound for u_0).
  MpcSolution solve(const Eigen::Vector3d& x0, const FlatReferences& refs, const Corridor& corridor,
                    const Eigen::Vector2d& u_prev);

  /// Condensed problem as handed to the QP solver, plus the constant term.
  QpProblem build_problem(const Eigen::Vector3d& x0, const FlatReferences& refs, const Corridor& corridor,
                          const Eigen::Vector2d& u_prev, double* constant = nullptr) const;

  void reset() { warm_.reset(); }
  const MpcConfig& config() const { return cfg_; }

 private:
  const Raceline* track_;
  MpcConfig cfg_;
  QpSolver qp_;
  std::optional<std::pair<std::vector<Eigen::Vector2d>, Eigen::VectorXd>> warm_;
};

}  // namespace fsdp
