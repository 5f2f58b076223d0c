#include "cbf_taskstack/errors.hpp"
#include "cbf_taskstack/qp.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

namespace cbf_taskstack::qp {

// Deliberately shares nothing with solve_qp beyond the problem type: each
// candidate is a plain LU solve of the full KKT matrix.
QPSolution solve_qp_oracle(const QPProblem& p, double tolerance)
{
  validate(p);
  const Eigen::Index d = p.num_variables();
  const Eigen::Index m = p.num_constraints();
  if (m > 20) {
    throw TooManyConstraints("oracle enumerates 2^m subsets; m = " + std::to_string(m) + " > 20");
  }

  Eigen::LDLT<Eigen::MatrixXd> ldlt(p.H);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 0.0) {
    throw NotPositiveDefinite("cost matrix H is not positive definite");
  }

  QPSolution best;
  double best_obj = std::numeric_limits<double>::infinity();
  bool found = false;

  const std::uint32_t subsets = 1u << static_cast<unsigned>(m);
  for (std::uint32_t mask = 0; mask < subsets; ++mask) {
    const auto q = static_cast<Eigen::Index>(std::popcount(mask));
    if (q > d) {
      continue;
    }
    std::vector<int> idx;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (mask & (1u << static_cast<unsigned>(j))) {
        idx.push_back(static_cast<int>(j));
      }
    }

    // [ H  -N ] [z]   [-f ]
    // [ N'  0 ] [mu] = [ b_W]
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(d + q, d + q);
    Eigen::VectorXd rhs(d + q);
    K.topLeftCorner(d, d) = p.H;
    rhs.head(d) = -p.f;
    for (Eigen::Index k = 0; k < q; ++k) {
      const auto row = p.A.row(idx[static_cast<std::size_t>(k)]);
      K.block(0, d + k, d, 1) = -row.transpose();
      K.block(d + k, 0, 1, d) = row;
      rhs(d + k) = p.b(idx[static_cast<std::size_t>(k)]);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
    if (!lu.isInvertible()) {
      continue;
    }
    const Eigen::VectorXd sol = lu.solve(rhs);
    const Eigen::VectorXd z = sol.head(d);
    const Eigen::VectorXd mu = sol.tail(q);

    if (q > 0 && mu.minCoeff() < -tolerance) {
      continue;
    }
    bool feasible = true;
    for (Eigen::Index j = 0; j < m && feasible; ++j) {
      feasible = p.A.row(j).dot(z) - p.b(j) >= -tolerance * (1.0 + std::abs(p.b(j)));
    }
    if (!feasible) {
      continue;
    }

    const double obj = objective(p, z);
    if (!found || obj < best_obj - 1e-12 * (1.0 + std::abs(best_obj))) {
      found = true;
      best_obj = obj;
      best.z_star = z;
      best.objective = obj;
      best.active_set = idx;
      best.multipliers = Eigen::VectorXd::Zero(m);
      for (Eigen::Index k = 0; k < q; ++k) {
        best.multipliers(idx[static_cast<std::size_t>(k)]) = std::max(0.0, mu(k));
      }
    }
  }

  if (!found) {
    throw Infeasible("no active subset yields a feasible KKT point");
  }
  return best;
}

}  // namespace cbf_taskstack::qp
