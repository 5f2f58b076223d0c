#pragma once

#include "cbf_taskstack/kinematics.hpp"

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <variant>
#include <vector>

namespace cbf_taskstack::tasks {

/// Piecewise polynomial reference sigma_0(t) with its analytic derivative.
struct PolynomialSegment
{
  double start = 0.0;
  /// One row per output dimension; column k multiplies (t - start)^k.
  Eigen::MatrixXd coefficients;

  bool operator==(const PolynomialSegment& o) const
  {
    return start == o.start && coefficients.rows() == o.coefficients.rows() &&
           coefficients.cols() == o.coefficients.cols() && coefficients == o.coefficients;
  }
};

class Reference
{
public:
  Reference() = default;
  explicit Reference(std::vector<PolynomialSegment> segments);

  static Reference constant(const Eigen::VectorXd& value);

  int dim() const;
  Eigen::VectorXd value(double t) const;
  Eigen::VectorXd rate(double t) const;
  const std::vector<PolynomialSegment>& segments() const { return segments_; }

  bool operator==(const Reference& o) const { return segments_ == o.segments_; }

private:
  const PolynomialSegment& segment_at(double t) const;
  std::vector<PolynomialSegment> segments_;
};

/// h = -gain * |sigma - target|^2
struct SetpointBarrier
{
  Eigen::VectorXd target;
  double gain = 1.0;

  bool operator==(const SetpointBarrier& o) const
  {
    return gain == o.gain && target.size() == o.target.size() && target == o.target;
  }
};

/// h = -1/2 |sigma - sigma_0(t)|^2
struct TrackingBarrier
{
  Reference reference;

  bool operator==(const TrackingBarrier&) const = default;
};

/// h_i = gain * (upper_i - z_i)(z_i - lower_i), one barrier per coordinate.
struct JointBoxBarrier
{
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  double gain = 1.0;

  bool operator==(const JointBoxBarrier& o) const
  {
    return gain == o.gain && lower.size() == o.lower.size() && upper.size() == o.upper.size() &&
           lower == o.lower && upper == o.upper;
  }
};

struct CustomBarrier
{
  std::function<double(const Eigen::VectorXd&, double)> h;
  std::function<Eigen::RowVectorXd(const Eigen::VectorXd&, double)> dh_dsigma;
  std::function<double(const Eigen::VectorXd&, double)> dh_dt;
};

using Barrier = std::variant<SetpointBarrier, TrackingBarrier, JointBoxBarrier, CustomBarrier>;

/// Extended class-K_inf function: linear alpha*h or cubic alpha*h^3.
struct ClassKSpec
{
  enum class Kind { kLinear, kCubic };
  Kind kind = Kind::kLinear;
  double alpha = 1.0;

  bool operator==(const ClassKSpec&) const = default;
};

double class_k(const ClassKSpec& spec, double h);

struct BarrierTask
{
  std::string label;
  kin::TaskMap map;
  Barrier barrier;
  ClassKSpec class_k;
  bool safety_critical = false;

  /// Number of scalar barriers (and constraint rows) this task contributes.
  int num_rows() const;
  /// Throws ConfigError.
  void validate() const;
};

struct BarrierValue
{
  double h = 0.0;
  Eigen::RowVectorXd dh_dsigma;
  double dh_dt = 0.0;
};

/// One value per scalar barrier (per coordinate for joint boxes).
std::vector<BarrierValue> eval_barrier(const BarrierTask& task, const kin::RobotState& state, double t);

/// Same, evaluated at a given task output.
std::vector<BarrierValue> eval_barrier_at(const BarrierTask& task, const Eigen::VectorXd& sigma, double t);

/// Minimum over the task's scalar barriers, with the gradient of the
/// attaining one. Used for reporting a joint box as a single curve.
BarrierValue eval_barrier_min(const BarrierTask& task, const kin::RobotState& state, double t);

/// a' u >= beta - delta
struct ConstraintRow
{
  Eigen::VectorXd a;
  double beta = 0.0;
};

/**
 * a = dh/dsigma * J(q) * g(x), beta = -dh/dt - dh/dsigma * J(q) * f(x) - gamma(h).
 * One row per scalar barrier.
 */
std::vector<ConstraintRow> build_constraint_rows(const BarrierTask& task, const kin::RobotState& state,
                                                 const kin::DynamicsModel& dyn, double t);

/// Rows plus the barrier values they were built from.
struct TaskLinearization
{
  std::vector<ConstraintRow> rows;
  std::vector<BarrierValue> values;
};

TaskLinearization linearize(const BarrierTask& task, const kin::RobotState& state,
                            const kin::DynamicsModel& dyn, double t);

}  // namespace cbf_taskstack::tasks
