#include "cbf_taskstack/controller.hpp"

#include "cbf_taskstack/errors.hpp"

#include <string>

namespace cbf_taskstack::control {

void ControllerConfig::validate() const
{
  if (!(l > 0.0)) {
    throw ConfigError("slack penalty l must be positive, got " + std::to_string(l));
  }
  if (!(solver.tolerance > 0.0)) {
    throw ConfigError("solver tolerance must be positive");
  }
}

AssembledQP assemble(const std::vector<tasks::BarrierTask>& task_list,
                     const priority::PrioritySchedule& sched, const kin::RobotState& state,
                     const kin::DynamicsModel& dyn, double t, const ControllerConfig& cfg)
{
  cfg.validate();
  if (task_list.empty()) {
    throw ConfigError("at least one task is required");
  }
  const auto M = static_cast<int>(task_list.size());
  if (sched.num_tasks() != M) {
    throw DimensionMismatch("schedule covers " + std::to_string(sched.num_tasks()) + " tasks, " +
                            std::to_string(M) + " given");
  }

  AssembledQP out;
  QPLayout& layout = out.layout;
  const auto p = static_cast<int>(dyn.g(state.q).cols());
  layout.num_inputs = p;
  layout.slack_column.assign(static_cast<std::size_t>(M), -1);
  int num_free = 0;
  for (int m = 0; m < M; ++m) {
    if (!task_list[static_cast<std::size_t>(m)].safety_critical) {
      layout.slack_column[static_cast<std::size_t>(m)] = p + num_free++;
    }
  }
  const int d = p + num_free;

  std::vector<tasks::TaskLinearization> lin;
  lin.reserve(task_list.size());
  int barrier_rows = 0;
  for (const auto& task : task_list) {
    lin.push_back(tasks::linearize(task, state, dyn, t));
    barrier_rows += static_cast<int>(lin.back().rows.size());
  }

  const priority::PrioritizationMatrix K = sched.matrix(t);
  std::vector<Eigen::Index> k_rows;
  for (Eigen::Index r = 0; r < K.rows(); ++r) {
    bool any = false;
    for (int m = 0; m < M; ++m) {
      any = any || (layout.slack_column[static_cast<std::size_t>(m)] >= 0 && K.K(r, m) != 0.0);
    }
    if (any) {
      k_rows.push_back(r);
    }
  }
  const int sign_rows = cfg.enforce_slack_nonneg ? num_free : 0;
  const int rows = barrier_rows + static_cast<int>(k_rows.size()) + sign_rows;

  qp::QPProblem& qp = out.problem;
  qp.H = Eigen::MatrixXd::Zero(d, d);
  qp.H.diagonal().head(p).setConstant(2.0);
  qp.H.diagonal().tail(num_free).setConstant(2.0 * cfg.l);
  qp.f = Eigen::VectorXd::Zero(d);
  qp.A = Eigen::MatrixXd::Zero(rows, d);
  qp.b = Eigen::VectorXd::Zero(rows);
  layout.row_task.assign(static_cast<std::size_t>(rows), -1);

  int row = 0;
  for (int m = 0; m < M; ++m) {
    const double rho = sched.gain(m, t);
    const double a_scale = cfg.ramp_mode == RampMode::kScaledRow ? rho : 1.0;
    const int col = layout.slack_column[static_cast<std::size_t>(m)];
    for (const auto& r : lin[static_cast<std::size_t>(m)].rows) {
      qp.A.row(row).head(p) = a_scale * r.a.transpose();
      if (col >= 0) {
        qp.A(row, col) = 1.0;
      }
      qp.b(row) = rho * r.beta;
      layout.row_task[static_cast<std::size_t>(row)] = m;
      ++row;
    }
  }
  for (Eigen::Index r : k_rows) {
    for (int m = 0; m < M; ++m) {
      const int col = layout.slack_column[static_cast<std::size_t>(m)];
      if (col >= 0) {
        qp.A(row, col) = K.K(r, m);
      }
    }
    ++row;
  }
  for (int k = 0; k < sign_rows; ++k) {
    qp.A(row, p + k) = 1.0;
    ++row;
  }
  layout.num_barrier_rows = barrier_rows;
  layout.num_priority_rows = static_cast<int>(k_rows.size());

  out.barriers.reserve(lin.size());
  for (auto& l : lin) {
    out.barriers.push_back(std::move(l.values));
  }
  return out;
}

namespace {

ControlOutput solve_assembled(AssembledQP&& a, const ControllerConfig& cfg, const std::vector<int>* warm)
{
  const qp::QPSolution sol = qp::solve_qp(a.problem, cfg.solver, warm);
  const QPLayout& layout = a.layout;
  const auto M = static_cast<Eigen::Index>(layout.slack_column.size());

  ControlOutput out;
  out.u_star = sol.z_star.head(layout.num_inputs);
  out.delta_star = Eigen::VectorXd::Zero(M);
  for (Eigen::Index m = 0; m < M; ++m) {
    const int col = layout.slack_column[static_cast<std::size_t>(m)];
    if (col >= 0) {
      out.delta_star(m) = sol.z_star(col);
    }
  }
  out.active_constraints = sol.active_set;
  out.solve_status = sol.warm_started ? SolveStatus::kOptimalWarmStart : SolveStatus::kOptimal;
  out.barrier_values.reserve(a.barriers.size());
  for (const auto& values : a.barriers) {
    std::vector<double> h;
    h.reserve(values.size());
    for (const auto& v : values) {
      h.push_back(v.h);
    }
    out.barrier_values.push_back(std::move(h));
  }
  out.layout = std::move(a.layout);
  return out;
}

}  // namespace

Controller::Controller(ControllerConfig cfg) : cfg_(std::move(cfg))
{
  cfg_.validate();
}

ControlOutput Controller::compute(const std::vector<tasks::BarrierTask>& task_list,
                                  const priority::PrioritySchedule& sched, const kin::RobotState& state,
                                  const kin::DynamicsModel& dyn, double t)
{
  AssembledQP a = assemble(task_list, sched, state, dyn, t, cfg_);
  const std::vector<int>* hint = cfg_.warm_start && !warm_set_.empty() ? &warm_set_ : nullptr;
  ControlOutput out = solve_assembled(std::move(a), cfg_, hint);
  if (cfg_.warm_start) {
    warm_set_ = out.active_constraints;
  }
  return out;
}

ControlOutput compute_control(const std::vector<tasks::BarrierTask>& task_list,
                              const priority::PrioritySchedule& sched, const kin::RobotState& state,
                              const kin::DynamicsModel& dyn, double t, const ControllerConfig& cfg)
{
  return solve_assembled(assemble(task_list, sched, state, dyn, t, cfg), cfg, nullptr);
}

}  // namespace cbf_taskstack::control
