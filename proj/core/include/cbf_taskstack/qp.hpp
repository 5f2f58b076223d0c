#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace cbf_taskstack::qp {

/**
 * Strictly convex QP with linear inequality constraints:
 *
 *   minimize   1/2 z' H z + f' z
 *   subject to A z >= b
 */
struct QPProblem
{
  Eigen::MatrixXd H;
  Eigen::VectorXd f;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;

  Eigen::Index num_variables() const { return H.rows(); }
  Eigen::Index num_constraints() const { return A.rows(); }
};

struct QPSolution
{
  Eigen::VectorXd z_star;
  /// Constraints held with equality at z_star, ascending.
  std::vector<int> active_set;
  /// One multiplier per row of A; zero for inactive rows.
  Eigen::VectorXd multipliers;
  double objective = 0.0;
  int iterations = 0;
  bool warm_started = false;
};

struct KKTReport
{
  double stationarity_residual = 0.0;
  double primal_violation = 0.0;
  double complementarity_residual = 0.0;
  double dual_violation = 0.0;

  double max() const;
};

struct SolverOptions
{
  /// Internal feasibility / optimality tolerance.
  double tolerance = 1e-9;
  /// Cap on add/drop iterations; 0 selects 50 * (d + m).
  int max_iterations = 0;
};

/// Checks the QPProblem invariants (shape, symmetry). Throws DimensionMismatch
/// or NotPositiveDefinite.
void validate(const QPProblem& p);

/**
 * Dual active-set solver (Goldfarb-Idnani). Starts from the unconstrained
 * minimizer and adds violated constraints one at a time, choosing the lowest
 * violated index; ties in the drop ratio test go to the lowest index.
 *
 * `warm_start` is a guess of the optimal active set. If the equality
 * constrained KKT point for that set is primal and dual feasible it is
 * returned directly, otherwise the cold iteration runs.
 *
 * Throws NotPositiveDefinite, Infeasible, IterationLimit, DimensionMismatch.
 */
QPSolution solve_qp(const QPProblem& p,
                    const SolverOptions& opts = {},
                    const std::vector<int>* warm_start = nullptr);

/**
 * Exhaustive reference solver: enumerates every active subset, solves its
 * equality-constrained KKT system and keeps the feasible, dual-feasible
 * candidate with the lowest objective. Exponential in m, test use only.
 *
 * Throws TooManyConstraints for m > 20, Infeasible when no subset qualifies.
 */
QPSolution solve_qp_oracle(const QPProblem& p, double tolerance = 1e-9);

/// Raw (unscaled) KKT residuals of `s` for `p`, all measured in the max-norm.
/// Throws DimensionMismatch.
KKTReport check_kkt(const QPProblem& p, const QPSolution& s);

double objective(const QPProblem& p, const Eigen::VectorXd& z);

}  // namespace cbf_taskstack::qp
