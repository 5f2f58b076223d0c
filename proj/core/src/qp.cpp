#include "cbf_taskstack/qp.hpp"

#include "cbf_taskstack/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace cbf_taskstack::qp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Relative size below which the projected direction counts as zero, i.e. the
// new normal is linearly dependent on the working set.
constexpr double kDependenceTol = 1e-12;

double row_tolerance(double tol, double b)
{
  return tol * (1.0 + std::abs(b));
}

/// Cholesky-derived data shared by the cold and warm paths.
struct Factorization
{
  Eigen::MatrixXd Linv;  // L^{-1}, H = L L'
  Eigen::MatrixXd D;     // L^{-1} A'
  Eigen::VectorXd x0;    // unconstrained minimizer
};

Factorization factorize(const QPProblem& p)
{
  const Eigen::Index d = p.num_variables();
  Eigen::LLT<Eigen::MatrixXd> llt(p.H);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("cost matrix H is not positive definite");
  }
  const Eigen::MatrixXd L = llt.matrixL();
  for (Eigen::Index i = 0; i < d; ++i) {
    if (!(L(i, i) > 0.0) || !std::isfinite(L(i, i))) {
      throw NotPositiveDefinite("cost matrix H is not positive definite");
    }
  }

  Factorization fac;
  fac.Linv = L.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(d, d));
  fac.D = fac.Linv * p.A.transpose();
  fac.x0 = -(fac.Linv.transpose() * (fac.Linv * p.f));
  return fac;
}

Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& D, const std::vector<int>& idx)
{
  Eigen::MatrixXd B(D.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    B.col(static_cast<Eigen::Index>(k)) = D.col(idx[k]);
  }
  return B;
}

QPSolution finish(const QPProblem& p, Eigen::VectorXd x, const std::vector<int>& working,
                  const Eigen::VectorXd& u, int iterations, bool warm)
{
  QPSolution s;
  s.multipliers = Eigen::VectorXd::Zero(p.num_constraints());
  for (std::size_t k = 0; k < working.size(); ++k) {
    s.multipliers(working[k]) = std::max(0.0, u(static_cast<Eigen::Index>(k)));
  }
  s.active_set = working;
  std::sort(s.active_set.begin(), s.active_set.end());
  s.objective = objective(p, x);
  s.z_star = std::move(x);
  s.iterations = iterations;
  s.warm_started = warm;
  return s;
}

std::optional<QPSolution> try_warm_start(const QPProblem& p, const Factorization& fac,
                                         const std::vector<int>& hint, double tol)
{
  std::vector<int> working;
  for (int j : hint) {
    if (j >= 0 && j < p.num_constraints()) {
      working.push_back(j);
    }
  }
  std::sort(working.begin(), working.end());
  working.erase(std::unique(working.begin(), working.end()), working.end());
  if (static_cast<Eigen::Index>(working.size()) > p.num_variables()) {
    return std::nullopt;
  }

  Eigen::VectorXd x = fac.x0;
  Eigen::VectorXd lambda(static_cast<Eigen::Index>(working.size()));
  if (!working.empty()) {
    const Eigen::MatrixXd B = gather_columns(fac.D, working);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(B);
    const Eigen::MatrixXd R = qr.matrixQR().topRows(B.cols()).triangularView<Eigen::Upper>();
    const double scale = std::max(1.0, R.diagonal().cwiseAbs().maxCoeff());
    if (R.diagonal().cwiseAbs().minCoeff() <= kDependenceTol * scale) {
      return std::nullopt;
    }
    Eigen::VectorXd rhs(B.cols());
    for (std::size_t k = 0; k < working.size(); ++k) {
      rhs(static_cast<Eigen::Index>(k)) = p.b(working[k]) - p.A.row(working[k]).dot(fac.x0);
    }
    // (B'B) lambda = rhs with B = QR  =>  R'R lambda = rhs
    lambda = R.triangularView<Eigen::Upper>().transpose().solve(rhs);
    lambda = R.triangularView<Eigen::Upper>().solve(lambda);
    x += fac.Linv.transpose() * (B * lambda);
  }

  for (Eigen::Index k = 0; k < lambda.size(); ++k) {
    if (lambda(k) < -tol) {
      return std::nullopt;
    }
  }
  const Eigen::VectorXd slack = p.A * x - p.b;
  for (Eigen::Index j = 0; j < slack.size(); ++j) {
    if (slack(j) < -row_tolerance(tol, p.b(j))) {
      return std::nullopt;
    }
  }
  return finish(p, std::move(x), working, lambda, 0, true);
}

}  // namespace

double KKTReport::max() const
{
  return std::max({stationarity_residual, primal_violation, complementarity_residual, dual_violation});
}

double objective(const QPProblem& p, const Eigen::VectorXd& z)
{
  return 0.5 * z.dot(p.H * z) + p.f.dot(z);
}

void validate(const QPProblem& p)
{
  const Eigen::Index d = p.H.rows();
  if (d == 0 || p.H.cols() != d) {
    throw DimensionMismatch("H must be a non-empty square matrix");
  }
  if (p.f.size() != d) {
    throw DimensionMismatch("f has length " + std::to_string(p.f.size()) + ", expected " +
                            std::to_string(d));
  }
  if (p.A.rows() != p.b.size()) {
    throw DimensionMismatch("A has " + std::to_string(p.A.rows()) + " rows but b has length " +
                            std::to_string(p.b.size()));
  }
  if (p.A.rows() > 0 && p.A.cols() != d) {
    throw DimensionMismatch("A has " + std::to_string(p.A.cols()) + " columns, expected " +
                            std::to_string(d));
  }
  if (!p.H.allFinite() || !p.f.allFinite() || !p.A.allFinite() || !p.b.allFinite()) {
    throw DimensionMismatch("problem data contains non-finite entries");
  }
  const double asym = (p.H - p.H.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * std::max(1.0, p.H.cwiseAbs().maxCoeff())) {
    throw NotPositiveDefinite("H is not symmetric");
  }
}

QPSolution solve_qp(const QPProblem& p, const SolverOptions& opts, const std::vector<int>* warm_start)
{
  validate(p);
  const Eigen::Index d = p.num_variables();
  const Eigen::Index m = p.num_constraints();
  const double tol = opts.tolerance;
  const int max_iter = opts.max_iterations > 0 ? opts.max_iterations
                                               : 50 * static_cast<int>(d + m);

  const Factorization fac = factorize(p);

  if (warm_start != nullptr && !warm_start->empty()) {
    if (auto s = try_warm_start(p, fac, *warm_start, tol)) {
      return *s;
    }
  }

  Eigen::VectorXd x = fac.x0;
  std::vector<int> working;  // in order of addition
  Eigen::VectorXd u;         // multipliers of `working`
  std::vector<char> in_working(static_cast<std::size_t>(m), 0);
  int iterations = 0;

  for (;;) {
    // Lowest-index violated constraint.
    int add = -1;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (in_working[static_cast<std::size_t>(j)]) {
        continue;
      }
      if (p.A.row(j).dot(x) - p.b(j) < -row_tolerance(tol, p.b(j))) {
        add = static_cast<int>(j);
        break;
      }
    }
    if (add < 0) {
      break;
    }

    Eigen::VectorXd u_plus(u.size() + 1);
    u_plus << u, 0.0;
    const Eigen::VectorXd d_add = fac.D.col(add);

    for (;;) {
      if (++iterations > max_iter) {
        throw IterationLimit("active-set iteration limit (" + std::to_string(max_iter) + ") reached");
      }

      const auto q = static_cast<Eigen::Index>(working.size());
      Eigen::VectorXd r(q);
      Eigen::VectorXd proj = d_add;
      if (q > 0) {
        const Eigen::MatrixXd B = gather_columns(fac.D, working);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(B);
        const Eigen::MatrixXd Q = qr.householderQ();
        const Eigen::VectorXd qtd = Q.transpose() * d_add;
        r = qr.matrixQR().topLeftCorner(q, q).triangularView<Eigen::Upper>().solve(qtd.head(q));
        proj = Q.rightCols(d - q) * qtd.tail(d - q);
      }

      // Full step along the primal direction.
      double t2 = kInf;
      Eigen::VectorXd z;
      if (proj.norm() > kDependenceTol * std::max(1.0, d_add.norm())) {
        z = fac.Linv.transpose() * proj;
        const double curvature = proj.squaredNorm();  // z' n_add
        const double violation = p.A.row(add).dot(x) - p.b(add);
        t2 = -violation / curvature;
      }

      // Partial step: largest dual step keeping working multipliers >= 0.
      double t1 = kInf;
      int drop = -1;  // position in `working`
      for (Eigen::Index k = 0; k < q; ++k) {
        if (r(k) > 0.0) {
          const double ratio = u_plus(k) / r(k);
          const bool better = ratio < t1 ||
                              (ratio == t1 && drop >= 0 &&
                               working[static_cast<std::size_t>(k)] < working[static_cast<std::size_t>(drop)]);
          if (better) {
            t1 = ratio;
            drop = static_cast<int>(k);
          }
        }
      }

      if (t1 == kInf && t2 == kInf) {
        throw Infeasible("constraint " + std::to_string(add) +
                         " cannot be satisfied together with the working set");
      }

      const double t = std::min(t1, t2);
      if (q > 0) {
        u_plus.head(q) -= t * r;
      }
      u_plus(q) += t;

      if (t2 < kInf) {
        x += t * z;
      }

      if (t2 <= t1) {
        working.push_back(add);
        in_working[static_cast<std::size_t>(add)] = 1;
        u = u_plus;
        break;
      }

      // Drop the blocking constraint and retry the same addition.
      const auto pos = static_cast<Eigen::Index>(drop);
      in_working[static_cast<std::size_t>(working[static_cast<std::size_t>(drop)])] = 0;
      working.erase(working.begin() + drop);
      Eigen::VectorXd shrunk(u_plus.size() - 1);
      shrunk << u_plus.head(pos), u_plus.tail(u_plus.size() - pos - 1);
      u_plus = std::move(shrunk);
    }
  }

  return finish(p, std::move(x), working, u, iterations, false);
}

KKTReport check_kkt(const QPProblem& p, const QPSolution& s)
{
  const Eigen::Index d = p.H.rows();
  if (p.H.cols() != d || p.f.size() != d || s.z_star.size() != d ||
      p.A.rows() != p.b.size() || s.multipliers.size() != p.A.rows() ||
      (p.A.rows() > 0 && p.A.cols() != d)) {
    throw DimensionMismatch("check_kkt: inconsistent problem/solution dimensions");
  }

  KKTReport rep;
  const Eigen::VectorXd grad = p.H * s.z_star + p.f - p.A.transpose() * s.multipliers;
  rep.stationarity_residual = grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0;
  if (p.A.rows() > 0) {
    const Eigen::VectorXd slack = p.A * s.z_star - p.b;
    rep.primal_violation = (-slack).cwiseMax(0.0).maxCoeff();
    rep.complementarity_residual = std::abs(s.multipliers.dot(slack));
    rep.dual_violation = (-s.multipliers).cwiseMax(0.0).maxCoeff();
  }
  return rep;
}

}  // namespace cbf_taskstack::qp
