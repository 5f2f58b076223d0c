#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls into the library code it is meant to check.

#include "cbf_taskstack/qp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

namespace cbf_taskstack::oracle {

/// Strictly convex QP with H = L L' + 0.1 I and a known feasible point, so
/// the feasible region is never empty.
inline qp::QPProblem random_qp(std::mt19937_64& rng, int d, int m)
{
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> slack(0.0, 1.0);
  auto randn = [&](Eigen::Index r, Eigen::Index c) {
    Eigen::MatrixXd M(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) M(i, j) = g(rng);
    return M;
  };
  qp::QPProblem p;
  const Eigen::MatrixXd L = randn(d, d);
  p.H = L * L.transpose() + 0.1 * Eigen::MatrixXd::Identity(d, d);
  p.H = 0.5 * (p.H + p.H.transpose()).eval();
  p.f = randn(d, 1);
  p.A = randn(m, d);
  const Eigen::VectorXd z0 = randn(d, 1);
  p.b = p.A * z0;
  for (int i = 0; i < m; ++i) {
    p.b(i) -= slack(rng);
  }
  return p;
}

/// Standard DH composed as explicit 4x4 matrices:
/// Rz(theta + q) * Tz(d) * Tx(a) * Rx(alpha).
struct DHRow
{
  double a, alpha, d, theta;
};

inline Eigen::Matrix4d dh_matrix(const DHRow& r, double q)
{
  const double th = r.theta + q;
  const double ct = std::cos(th), st = std::sin(th);
  const double ca = std::cos(r.alpha), sa = std::sin(r.alpha);
  Eigen::Matrix4d T;
  T << ct, -st * ca, st * sa, r.a * ct,
       st, ct * ca, -ct * sa, r.a * st,
       0.0, sa, ca, r.d,
       0.0, 0.0, 0.0, 1.0;
  return T;
}

inline Eigen::Matrix4d dh_chain(const std::vector<DHRow>& rows, const Eigen::VectorXd& q)
{
  Eigen::Matrix4d T = Eigen::Matrix4d::Identity();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    T = T * dh_matrix(rows[i], q(static_cast<Eigen::Index>(i)));
  }
  return T;
}

/// The demo arm's table written out again by hand.
inline std::vector<DHRow> demo_7dof_table()
{
  constexpr double pi = std::numbers::pi;
  return {{0, -pi / 2, 0.3, 0}, {0, pi / 2, 0, 0}, {0, pi / 2, 0.3, 0}, {0, -pi / 2, 0, 0},
          {0, -pi / 2, 0.3, 0}, {0, pi / 2, 0, 0}, {0, 0, 0.3, 0}};
}

/// Planar arm end-effector position in closed form.
inline Eigen::Vector3d planar_position(const std::vector<double>& lengths, const Eigen::VectorXd& q)
{
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  double angle = 0.0;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    angle += q(static_cast<Eigen::Index>(i));
    p.x() += lengths[i] * std::cos(angle);
    p.y() += lengths[i] * std::sin(angle);
  }
  return p;
}

/// Pinhole projection written out directly.
inline Eigen::Vector2d pinhole(double fx, double fy, double cx, double cy, const Eigen::Vector3d& p)
{
  return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy};
}

/**
 * Feasible-point grid search with repeated zooming around the incumbent.
 * Slow and approximate; only for tiny problems.
 */
inline Eigen::VectorXd grid_search(const qp::QPProblem& p, const Eigen::VectorXd& center, double half_width,
                                   int points = 41, int zooms = 12)
{
  const auto d = p.H.rows();
  Eigen::VectorXd best = center;
  double best_val = std::numeric_limits<double>::infinity();
  Eigen::VectorXd c = center;
  double w = half_width;
  for (int z = 0; z < zooms; ++z) {
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    while (true) {
      Eigen::VectorXd x(d);
      for (Eigen::Index i = 0; i < d; ++i) {
        x(i) = c(i) - w + 2.0 * w * idx[static_cast<std::size_t>(i)] / (points - 1);
      }
      if (((p.A * x - p.b).array() >= 0.0).all()) {
        const double v = 0.5 * x.dot(p.H * x) + p.f.dot(x);
        if (v < best_val) {
          best_val = v;
          best = x;
        }
      }
      Eigen::Index k = 0;
      while (k < d && ++idx[static_cast<std::size_t>(k)] == points) {
        idx[static_cast<std::size_t>(k)] = 0;
        ++k;
      }
      if (k == d) break;
    }
    c = best;
    w *= 4.0 / (points - 1);
  }
  return best;
}

/// Least-squares slope of log(y) against t.
inline double log_slope(const std::vector<double>& t, const std::vector<double>& y)
{
  double st = 0, sy = 0, stt = 0, sty = 0;
  const double n = static_cast<double>(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double ly = std::log(y[i]);
    st += t[i];
    sy += ly;
    stt += t[i] * t[i];
    sty += t[i] * ly;
  }
  return (n * sty - st * sy) / (n * stt - st * st);
}

}  // namespace cbf_taskstack::oracle
