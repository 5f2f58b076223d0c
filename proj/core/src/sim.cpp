#include "cbf_taskstack/sim.hpp"

#include "cbf_taskstack/errors.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

namespace cbf_taskstack::sim {

namespace {

std::string num(double v)
{
  if (std::isnan(v)) {
    return "nan";
  }
  if (std::isinf(v)) {
    return v > 0 ? "inf" : "-inf";
  }
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Human-readable, e.g. 0.0005 rather than 5e-04.
std::string pretty(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.15g", v);
  return buf;
}

double median(std::vector<double> v)
{
  if (v.empty()) {
    return 0.0;
  }
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

}  // namespace

kin::RobotState step(const kin::RobotState& state, const Eigen::VectorXd& u, double dt)
{
  if (!(dt > 0.0)) {
    throw ConfigError("step size must be positive");
  }
  if (u.size() != state.q.size()) {
    throw DimensionMismatch("control has " + std::to_string(u.size()) + " entries, state has " +
                            std::to_string(state.q.size()));
  }
  return {state.q + dt * u, state.t + dt};
}

SimTrace run(const SimSetup& setup)
{
  if (!(setup.dt > 0.0) || !(setup.horizon >= 0.0)) {
    throw ConfigError("dt must be positive and the horizon nonnegative");
  }
  if (!setup.robot || setup.q0.size() != setup.robot->dof()) {
    throw DimensionMismatch("initial configuration does not match the robot");
  }

  SimTrace trace;
  trace.dt = setup.dt;
  for (std::size_t m = 0; m < setup.tasks.size(); ++m) {
    const auto& task = setup.tasks[m];
    trace.task_labels.push_back(task.label);
    trace.safety_critical.push_back(task.safety_critical);
    for (int r = 0; r < task.num_rows(); ++r) {
      trace.row_owner.push_back(static_cast<int>(m));
    }
  }
  for (double e : setup.schedule.event_times()) {
    if (e <= setup.horizon) {
      trace.events.push_back(e);
    }
  }

  const auto steps = static_cast<std::size_t>(std::llround(setup.horizon / setup.dt));
  trace.times.reserve(steps + 1);
  trace.states.reserve(steps + 1);
  trace.controls.reserve(steps + 1);
  trace.slacks.reserve(steps + 1);
  trace.barriers.reserve(steps + 1);
  trace.barrier_rows.reserve(steps + 1);
  trace.solve_time_us.reserve(steps + 1);

  control::Controller controller(setup.controller);
  kin::RobotState state{setup.q0, 0.0};
  const auto num_rows = static_cast<Eigen::Index>(trace.row_owner.size());
  const auto num_tasks = static_cast<Eigen::Index>(setup.tasks.size());

  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * setup.dt;
    state.t = t;
    control::ControlOutput out;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      out = controller.compute(setup.tasks, setup.schedule, state, setup.dynamics, t);
    } catch (const std::exception& e) {
      trace.failure = e.what();
      trace.failure_time = t;
      break;
    }
    const auto t1 = std::chrono::steady_clock::now();

    Eigen::VectorXd rows(num_rows);
    Eigen::VectorXd per_task(num_tasks);
    Eigen::Index r = 0;
    for (Eigen::Index m = 0; m < num_tasks; ++m) {
      const auto& values = out.barrier_values[static_cast<std::size_t>(m)];
      double lowest = std::numeric_limits<double>::infinity();
      for (double h : values) {
        rows(r++) = h;
        lowest = std::min(lowest, h);
      }
      per_task(m) = lowest;
    }

    trace.times.push_back(t);
    trace.states.push_back(state.q);
    trace.controls.push_back(out.u_star);
    trace.slacks.push_back(out.delta_star);
    trace.barriers.push_back(std::move(per_task));
    trace.barrier_rows.push_back(std::move(rows));
    trace.solve_time_us.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());

    if (k < steps) {
      state = step(state, out.u_star, setup.dt);
    }
  }
  return trace;
}

ContinuityReport continuity_report(const SimTrace& trace, double window)
{
  ContinuityReport rep;
  const std::size_t n = trace.controls.size();
  if (n < 2) {
    return rep;
  }
  std::vector<double> rate(n - 1);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    rate[k] = (trace.controls[k + 1] - trace.controls[k]).norm() / trace.dt;
    rep.max_rate = std::max(rep.max_rate, rate[k]);
  }

  for (double te : trace.events) {
    EventContinuity ev;
    ev.time = te;
    const auto it = std::lower_bound(trace.times.begin(), trace.times.end(), te - 0.5 * trace.dt);
    ev.index = static_cast<std::size_t>(it - trace.times.begin());
    if (ev.index == 0 || ev.index + 1 >= n) {
      continue;
    }
    // The switch may land on either increment touching the event sample.
    ev.jump = std::max((trace.controls[ev.index] - trace.controls[ev.index - 1]).norm(),
                       (trace.controls[ev.index + 1] - trace.controls[ev.index]).norm());
    for (std::size_t k = 0; k + 1 < n; ++k) {
      const double tk = trace.times[k];
      if (tk >= te - window && tk <= te + window) {
        ev.windowed_max_rate = std::max(ev.windowed_max_rate, rate[k]);
      }
      if (tk >= te - window && k + 1 < ev.index) {
        ev.pre_event_lipschitz = std::max(ev.pre_event_lipschitz, rate[k]);
      }
    }
    rep.events.push_back(ev);
  }
  return rep;
}

InvarianceReport invariance_report(const SimTrace& trace, double threshold)
{
  InvarianceReport rep;
  for (std::size_t m = 0; m < trace.task_labels.size(); ++m) {
    if (!trace.safety_critical[m]) {
      continue;
    }
    InvarianceEntry e;
    e.label = trace.task_labels[m];
    e.min_h = std::numeric_limits<double>::infinity();
    for (const auto& b : trace.barriers) {
      e.min_h = std::min(e.min_h, b(static_cast<Eigen::Index>(m)));
    }
    e.starts_inside = !trace.barriers.empty() && trace.barriers.front()(static_cast<Eigen::Index>(m)) >= -threshold;
    e.violated = e.starts_inside && e.min_h < -threshold;
    rep.ok = rep.ok && !e.violated;
    rep.tasks.push_back(std::move(e));
  }
  return rep;
}

PriorityReport priority_report(const SimTrace& trace, const priority::PrioritySchedule& sched)
{
  PriorityReport rep;
  for (std::size_t k = 0; k < trace.size(); ++k) {
    const double t = trace.times[k];
    const auto pairs = sched.static_pairs(t);
    if (pairs.empty()) {
      continue;
    }
    const double kappa = sched.kappa_at(t);
    for (const auto& pr : pairs) {
      if (sched.gain(pr.higher, t) < 1.0 || sched.gain(pr.lower, t) < 1.0) {
        continue;
      }
      const double hi = trace.slacks[k](pr.higher);
      const double lo = trace.slacks[k](pr.lower);
      rep.max_violation = std::max(rep.max_violation, hi - lo / kappa);
      if (lo > 1e-9) {
        rep.max_ratio = std::max(rep.max_ratio, hi / lo);
      }
      ++rep.samples_checked;
    }
  }
  return rep;
}

Report make_report(const SimTrace& trace, const SimSetup& setup)
{
  Report rep;
  rep.steps = trace.size();
  rep.continuity = continuity_report(trace);
  rep.invariance = invariance_report(trace);
  rep.priority = priority_report(trace, setup.schedule);
  rep.median_solve_us = median(trace.solve_time_us);
  rep.max_solve_us = trace.solve_time_us.empty()
                         ? 0.0
                         : *std::max_element(trace.solve_time_us.begin(), trace.solve_time_us.end());

  for (std::size_t m = 0; m < setup.tasks.size(); ++m) {
    const auto& task = setup.tasks[m];
    TaskSummary s;
    s.label = task.label;
    s.safety_critical = task.safety_critical;
    s.min_h = std::numeric_limits<double>::infinity();
    for (const auto& b : trace.barriers) {
      s.min_h = std::min(s.min_h, b(static_cast<Eigen::Index>(m)));
    }
    if (!trace.barriers.empty()) {
      s.final_h = trace.barriers.back()(static_cast<Eigen::Index>(m));
      const kin::RobotState last{trace.states.back(), trace.times.back()};
      try {
        if (const auto* sp = std::get_if<tasks::SetpointBarrier>(&task.barrier)) {
          s.final_error = (task.map.output(last) - sp->target).norm();
        } else if (const auto* tr = std::get_if<tasks::TrackingBarrier>(&task.barrier)) {
          s.final_error = (task.map.output(last) - tr->reference.value(last.t)).norm();
        }
      } catch (const Error&) {
        // leave NaN when the map cannot be evaluated at the final state
      }
    }
    rep.tasks.push_back(std::move(s));
  }
  return rep;
}

void write_csv(const SimTrace& trace, std::ostream& os)
{
  const Eigen::Index n = trace.states.empty() ? 0 : trace.states.front().size();
  const Eigen::Index p = trace.controls.empty() ? 0 : trace.controls.front().size();
  const auto M = static_cast<Eigen::Index>(trace.task_labels.size());

  os << "t";
  for (Eigen::Index i = 0; i < n; ++i) os << ",q" << i;
  for (Eigen::Index i = 0; i < p; ++i) os << ",u" << i;
  for (Eigen::Index i = 0; i < M; ++i) os << ",delta" << i;
  for (const auto& label : trace.task_labels) os << ",h_" << label;
  os << '\n';

  for (std::size_t k = 0; k < trace.size(); ++k) {
    os << num(trace.times[k]);
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << num(trace.states[k](i));
    for (Eigen::Index i = 0; i < p; ++i) os << ',' << num(trace.controls[k](i));
    for (Eigen::Index i = 0; i < M; ++i) os << ',' << num(trace.slacks[k](i));
    for (Eigen::Index i = 0; i < M; ++i) os << ',' << num(trace.barriers[k](i));
    os << '\n';
  }
}

void write_report(const Report& report, const SimTrace& trace, std::ostream& os)
{
  os << "steps: " << report.steps << "\n";
  os << "dt: " << pretty(trace.dt) << "\n";
  os << "status: " << (trace.ok() ? "ok" : "failed at t = " + num(trace.failure_time) + ": " + *trace.failure)
     << "\n";
  os << "solve time (us): median " << num(report.median_solve_us) << ", max " << num(report.max_solve_us)
     << "\n\n";

  os << "tasks:\n";
  for (const auto& t : report.tasks) {
    os << "  " << t.label << (t.safety_critical ? " [safety-critical]" : "") << ": min h " << num(t.min_h)
       << ", final h " << num(t.final_h);
    if (!std::isnan(t.final_error)) {
      os << ", final error " << num(t.final_error);
    }
    os << "\n";
  }

  os << "\ninvariance: " << (report.invariance.ok ? "ok" : "VIOLATED") << "\n";
  for (const auto& e : report.invariance.tasks) {
    os << "  " << e.label << ": min h " << num(e.min_h) << (e.violated ? " (below threshold)" : "")
       << (e.starts_inside ? "" : " (starts outside its set; not checked)") << "\n";
  }

  os << "\npriority: " << report.priority.samples_checked << " samples checked, max violation "
     << (report.priority.samples_checked ? num(report.priority.max_violation) : std::string("n/a"))
     << ", max slack ratio " << num(report.priority.max_ratio) << "\n";

  os << "\ncontinuity: max |du|/dt " << num(report.continuity.max_rate) << "\n";
  for (const auto& e : report.continuity.events) {
    os << "  event t = " << num(e.time) << ": jump " << num(e.jump) << ", windowed max |du|/dt "
       << num(e.windowed_max_rate) << ", pre-event Lipschitz " << num(e.pre_event_lipschitz) << "\n";
  }
}

}  // namespace cbf_taskstack::sim
