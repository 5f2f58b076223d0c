#pragma once

#include "cbf_taskstack/controller.hpp"
#include "cbf_taskstack/kinematics.hpp"
#include "cbf_taskstack/priority.hpp"
#include "cbf_taskstack/task.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace cbf_taskstack::sim {

/// Everything a closed-loop run needs.
struct SimSetup
{
  std::shared_ptr<const kin::RobotModel> robot;
  std::vector<tasks::BarrierTask> tasks;
  priority::PrioritySchedule schedule;
  control::ControllerConfig controller;
  kin::DynamicsModel dynamics;
  Eigen::VectorXd q0;
  double dt = 1e-3;
  double horizon = 30.0;
};

struct SimTrace
{
  double dt = 0.0;
  std::vector<std::string> task_labels;
  std::vector<bool> safety_critical;
  /// Task owning each scalar barrier column of `barrier_rows`.
  std::vector<int> row_owner;

  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  std::vector<Eigen::VectorXd> controls;
  std::vector<Eigen::VectorXd> slacks;
  /// Per-task barrier, min-aggregated over the task's scalar barriers.
  std::vector<Eigen::VectorXd> barriers;
  /// Every scalar barrier value.
  std::vector<Eigen::VectorXd> barrier_rows;
  /// Controller wall-clock per step (assembly + solve), microseconds.
  std::vector<double> solve_time_us;
  std::vector<double> events;

  std::optional<std::string> failure;
  double failure_time = std::numeric_limits<double>::quiet_NaN();

  std::size_t size() const { return times.size(); }
  bool ok() const { return !failure.has_value(); }
};

/// Explicit Euler under zero-order hold: q += u dt, t += dt.
/// Throws DimensionMismatch, ConfigError.
kin::RobotState step(const kin::RobotState& state, const Eigen::VectorXd& u, double dt);

/// Closed loop from t = 0 to the horizon. Controller errors end the run and
/// leave a partial trace with `failure` set.
SimTrace run(const SimSetup& setup);

struct EventContinuity
{
  double time = 0.0;
  /// Sample at the event time.
  std::size_t index = 0;
  /// Larger of the two control increments touching the event sample.
  double jump = 0.0;
  /// max |du|/dt over [time - window, time + window]
  double windowed_max_rate = 0.0;
  /// max |du|/dt over increments ending at or before the event
  double pre_event_lipschitz = 0.0;
};

struct ContinuityReport
{
  double max_rate = 0.0;
  std::vector<EventContinuity> events;
};

ContinuityReport continuity_report(const SimTrace& trace, double window = 1.5);

struct InvarianceEntry
{
  std::string label;
  double min_h = 0.0;
  /// Forward invariance is only claimed for tasks whose h(0) >= -threshold.
  bool starts_inside = true;
  bool violated = false;
};

struct InvarianceReport
{
  std::vector<InvarianceEntry> tasks;
  bool ok = true;
};

/// Minimum of every safety-critical barrier over the trace; tasks starting
/// inside their set are flagged when h dips below -threshold.
InvarianceReport invariance_report(const SimTrace& trace, double threshold = 1e-6);

struct PriorityReport
{
  /// max over checked samples of delta_higher - delta_lower / kappa
  double max_violation = -std::numeric_limits<double>::infinity();
  /// max over checked samples of delta_higher / delta_lower (lower > 1e-9)
  double max_ratio = 0.0;
  std::size_t samples_checked = 0;
};

/// Checks delta_m <= delta_n / kappa on samples outside transitions where
/// both tasks are fully inserted.
PriorityReport priority_report(const SimTrace& trace, const priority::PrioritySchedule& sched);

struct TaskSummary
{
  std::string label;
  bool safety_critical = false;
  double min_h = 0.0;
  double final_h = 0.0;
  /// |sigma - target| at the end for setpoint/tracking tasks, NaN otherwise.
  double final_error = std::numeric_limits<double>::quiet_NaN();
};

struct Report
{
  std::vector<TaskSummary> tasks;
  ContinuityReport continuity;
  InvarianceReport invariance;
  PriorityReport priority;
  double median_solve_us = 0.0;
  double max_solve_us = 0.0;
  std::size_t steps = 0;
};

Report make_report(const SimTrace& trace, const SimSetup& setup);

/// Header `t,q0..,u0..,delta0..,h_<label>...`, one row per sample.
void write_csv(const SimTrace& trace, std::ostream& os);
void write_report(const Report& report, const SimTrace& trace, std::ostream& os);

}  // namespace cbf_taskstack::sim
