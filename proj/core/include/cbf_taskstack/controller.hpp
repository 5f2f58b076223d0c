#pragma once

#include "cbf_taskstack/kinematics.hpp"
#include "cbf_taskstack/priority.hpp"
#include "cbf_taskstack/qp.hpp"
#include "cbf_taskstack/task.hpp"

#include <Eigen/Dense>

#include <vector>

namespace cbf_taskstack::control {

/// How rho(t) enters the row of a task being inserted or removed.
enum class RampMode
{
  /// rho * a' u + delta >= rho * beta: the row vanishes at rho = 0.
  kScaledRow,
  /// a' u + delta >= rho * beta: only the offset ramps.
  kOffsetOnly,
};

struct ControllerConfig
{
  /// Slack penalty l in |u|^2 + l |delta|^2.
  double l = 100.0;
  bool enforce_slack_nonneg = true;
  bool warm_start = true;
  RampMode ramp_mode = RampMode::kScaledRow;
  qp::SolverOptions solver;

  /// Throws ConfigError.
  void validate() const;

  bool operator==(const ControllerConfig& o) const
  {
    return l == o.l && enforce_slack_nonneg == o.enforce_slack_nonneg && warm_start == o.warm_start &&
           ramp_mode == o.ramp_mode && solver.tolerance == o.solver.tolerance &&
           solver.max_iterations == o.solver.max_iterations;
  }
};

/// Where each decision variable and constraint row of an assembled QP came from.
struct QPLayout
{
  int num_inputs = 0;
  /// Column of each task's slack in z, or -1 if safety-critical.
  std::vector<int> slack_column;
  /// Task owning each row, -1 for prioritization and sign rows.
  std::vector<int> row_task;
  int num_barrier_rows = 0;
  int num_priority_rows = 0;
};

struct AssembledQP
{
  qp::QPProblem problem;
  QPLayout layout;
  /// Barrier values per task (one per scalar barrier).
  std::vector<std::vector<tasks::BarrierValue>> barriers;
};

/**
 * Builds the slacked prioritized CBF-QP in z = (u, delta_free):
 *
 *   min |u|^2 + l |delta|^2
 *   s.t. a_r' u + delta_m >= beta_r     per scalar barrier r of task m
 *        K(t) delta >= 0
 *        delta >= 0                     if enforce_slack_nonneg
 *
 * Safety-critical slacks are eliminated. Ramped tasks follow cfg.ramp_mode.
 */
AssembledQP assemble(const std::vector<tasks::BarrierTask>& task_list,
                     const priority::PrioritySchedule& sched, const kin::RobotState& state,
                     const kin::DynamicsModel& dyn, double t, const ControllerConfig& cfg);

inline qp::QPProblem assemble_qp(const std::vector<tasks::BarrierTask>& task_list,
                                 const priority::PrioritySchedule& sched, const kin::RobotState& state,
                                 const kin::DynamicsModel& dyn, double t, const ControllerConfig& cfg)
{
  return assemble(task_list, sched, state, dyn, t, cfg).problem;
}

enum class SolveStatus { kOptimal, kOptimalWarmStart };

struct ControlOutput
{
  Eigen::VectorXd u_star;
  /// Full slack vector, exactly zero for safety-critical tasks.
  Eigen::VectorXd delta_star;
  std::vector<int> active_constraints;
  SolveStatus solve_status = SolveStatus::kOptimal;
  /// Scalar barrier values per task at the solve instant.
  std::vector<std::vector<double>> barrier_values;
  QPLayout layout;
};

/// One instance per robot. Only the warm-start cache is mutated by compute().
class Controller
{
public:
  explicit Controller(ControllerConfig cfg = {});

  /// Propagates solver and kinematics errors.
  ControlOutput compute(const std::vector<tasks::BarrierTask>& task_list,
                        const priority::PrioritySchedule& sched, const kin::RobotState& state,
                        const kin::DynamicsModel& dyn, double t);

  const ControllerConfig& config() const { return cfg_; }
  void reset() { warm_set_.clear(); }

private:
  ControllerConfig cfg_;
  std::vector<int> warm_set_;
};

/// Stateless solve (no warm start).
ControlOutput compute_control(const std::vector<tasks::BarrierTask>& task_list,
                              const priority::PrioritySchedule& sched, const kin::RobotState& state,
                              const kin::DynamicsModel& dyn, double t, const ControllerConfig& cfg);

}  // namespace cbf_taskstack::control
