#include "cbf_taskstack/task.hpp"

#include "cbf_taskstack/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cbf_taskstack::tasks {

namespace {

template <class... Ts>
struct overloaded : Ts...
{
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

Reference::Reference(std::vector<PolynomialSegment> segments) : segments_(std::move(segments))
{
  if (segments_.empty()) {
    throw ConfigError("reference needs at least one segment");
  }
  const auto dim = segments_.front().coefficients.rows();
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const auto& s = segments_[i];
    if (s.coefficients.rows() != dim || s.coefficients.cols() == 0) {
      throw ConfigError("reference segment " + std::to_string(i) + " has inconsistent coefficients");
    }
    if (i > 0 && !(s.start > segments_[i - 1].start)) {
      throw ConfigError("reference segment start times must be strictly increasing");
    }
  }
}

Reference Reference::constant(const Eigen::VectorXd& value)
{
  return Reference({PolynomialSegment{0.0, value}});
}

int Reference::dim() const
{
  return segments_.empty() ? 0 : static_cast<int>(segments_.front().coefficients.rows());
}

const PolynomialSegment& Reference::segment_at(double t) const
{
  auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                             [](double v, const PolynomialSegment& s) { return v < s.start; });
  return it == segments_.begin() ? segments_.front() : *std::prev(it);
}

Eigen::VectorXd Reference::value(double t) const
{
  const auto& s = segment_at(t);
  const double tau = t - s.start;
  // Horner
  Eigen::VectorXd v = s.coefficients.col(s.coefficients.cols() - 1);
  for (Eigen::Index k = s.coefficients.cols() - 2; k >= 0; --k) {
    v = v * tau + s.coefficients.col(k);
  }
  return v;
}

Eigen::VectorXd Reference::rate(double t) const
{
  const auto& s = segment_at(t);
  const double tau = t - s.start;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(s.coefficients.rows());
  for (Eigen::Index k = s.coefficients.cols() - 1; k >= 1; --k) {
    v = v * tau + static_cast<double>(k) * s.coefficients.col(k);
  }
  return v;
}

double class_k(const ClassKSpec& spec, double h)
{
  switch (spec.kind) {
    case ClassKSpec::Kind::kLinear:
      return spec.alpha * h;
    case ClassKSpec::Kind::kCubic:
      return spec.alpha * h * h * h;
  }
  return 0.0;
}

int BarrierTask::num_rows() const
{
  return std::holds_alternative<JointBoxBarrier>(barrier) ? map.output_dim() : 1;
}

void BarrierTask::validate() const
{
  const std::string who = "task '" + label + "'";
  if (!(class_k.alpha > 0.0)) {
    throw ConfigError(who + ": class-K gain must be positive");
  }
  const int dim = map.output_dim();
  std::visit(overloaded{
                 [&](const SetpointBarrier& b) {
                   if (b.target.size() != dim) {
                     throw ConfigError(who + ": setpoint target has " + std::to_string(b.target.size()) +
                                       " entries, map output has " + std::to_string(dim));
                   }
                   if (!(b.gain > 0.0)) {
                     throw ConfigError(who + ": setpoint gain must be positive");
                   }
                 },
                 [&](const TrackingBarrier& b) {
                   if (b.reference.dim() != dim) {
                     throw ConfigError(who + ": tracking reference dimension does not match map output");
                   }
                 },
                 [&](const JointBoxBarrier& b) {
                   if (map.kind() != kin::TaskMapKind::kJointIdentity) {
                     throw ConfigError(who + ": joint_box requires the joint_identity map");
                   }
                   if (b.lower.size() != dim || b.upper.size() != dim) {
                     throw ConfigError(who + ": joint_box bounds must have one entry per joint");
                   }
                   if (!(b.lower.array() < b.upper.array()).all()) {
                     throw ConfigError(who + ": joint_box lower bounds must be below upper bounds");
                   }
                   if (!(b.gain > 0.0)) {
                     throw ConfigError(who + ": joint_box gain must be positive");
                   }
                 },
                 [&](const CustomBarrier& b) {
                   if (!b.h || !b.dh_dsigma || !b.dh_dt) {
                     throw ConfigError(who + ": custom barrier needs h, dh_dsigma and dh_dt");
                   }
                 },
             },
             barrier);
}

std::vector<BarrierValue> eval_barrier_at(const BarrierTask& task, const Eigen::VectorXd& sigma, double t)
{
  return std::visit(
      overloaded{
          [&](const SetpointBarrier& b) {
            const Eigen::VectorXd e = sigma - b.target;
            return std::vector<BarrierValue>{{-b.gain * e.squaredNorm(), -2.0 * b.gain * e.transpose(), 0.0}};
          },
          [&](const TrackingBarrier& b) {
            const Eigen::VectorXd e = sigma - b.reference.value(t);
            const double dh_dt = e.dot(b.reference.rate(t));
            return std::vector<BarrierValue>{{-0.5 * e.squaredNorm(), -e.transpose(), dh_dt}};
          },
          [&](const JointBoxBarrier& b) {
            const auto n = sigma.size();
            std::vector<BarrierValue> out(static_cast<std::size_t>(n));
            for (Eigen::Index i = 0; i < n; ++i) {
              auto& v = out[static_cast<std::size_t>(i)];
              const double z = sigma(i);
              v.h = b.gain * (b.upper(i) - z) * (z - b.lower(i));
              v.dh_dsigma = Eigen::RowVectorXd::Zero(n);
              v.dh_dsigma(i) = b.gain * (b.upper(i) + b.lower(i) - 2.0 * z);
            }
            return out;
          },
          [&](const CustomBarrier& b) {
            return std::vector<BarrierValue>{{b.h(sigma, t), b.dh_dsigma(sigma, t), b.dh_dt(sigma, t)}};
          },
      },
      task.barrier);
}

std::vector<BarrierValue> eval_barrier(const BarrierTask& task, const kin::RobotState& state, double t)
{
  return eval_barrier_at(task, task.map.output(state), t);
}

BarrierValue eval_barrier_min(const BarrierTask& task, const kin::RobotState& state, double t)
{
  auto values = eval_barrier(task, state, t);
  auto it = std::min_element(values.begin(), values.end(),
                             [](const BarrierValue& a, const BarrierValue& b) { return a.h < b.h; });
  return *it;
}

TaskLinearization linearize(const BarrierTask& task, const kin::RobotState& state,
                            const kin::DynamicsModel& dyn, double t)
{
  TaskLinearization out;
  out.values = eval_barrier(task, state, t);
  const Eigen::MatrixXd J = task.map.jacobian(state);
  const Eigen::MatrixXd g = dyn.g(state.q);
  const Eigen::VectorXd f = dyn.f(state.q);
  const bool has_drift = static_cast<bool>(dyn.drift);

  out.rows.reserve(out.values.size());
  for (const auto& v : out.values) {
    const Eigen::RowVectorXd grad_x = v.dh_dsigma * J;
    ConstraintRow row;
    row.a = (grad_x * g).transpose();
    row.beta = -v.dh_dt - class_k(task.class_k, v.h);
    if (has_drift) {
      row.beta -= grad_x.dot(f);
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

std::vector<ConstraintRow> build_constraint_rows(const BarrierTask& task, const kin::RobotState& state,
                                                 const kin::DynamicsModel& dyn, double t)
{
  return linearize(task, state, dyn, t).rows;
}

}  // namespace cbf_taskstack::tasks
