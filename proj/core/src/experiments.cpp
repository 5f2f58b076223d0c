#include "cbf_taskstack/experiments.hpp"

#include "cbf_taskstack/controller.hpp"
#include "cbf_taskstack/errors.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <thread>

namespace cbf_taskstack::experiments {

namespace {

std::string num(double v)
{
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string opt(const std::optional<double>& v)
{
  return v ? num(*v) : std::string();
}

}  // namespace

scenario::Scenario apply(scenario::Scenario s, const Overrides& o)
{
  if (o.dt) s.sim.dt = *o.dt;
  if (o.horizon) s.sim.horizon = *o.horizon;
  if (o.kappa) {
    s.schedule.kappa = *o.kappa;
    for (auto& seg : s.schedule.segments) {
      seg.kappa = *o.kappa;
    }
  }
  if (o.l) s.controller.l = *o.l;
  return s;
}

RunSummary summarize(const scenario::Scenario& s, const sim::SimTrace& trace, std::optional<double> probe_time)
{
  const sim::SimSetup setup = scenario::make_setup(s);
  const sim::Report rep = sim::make_report(trace, setup);

  RunSummary r;
  r.ok = trace.ok();
  r.failure = trace.failure.value_or("");
  r.steps = rep.steps;
  r.max_rate = rep.continuity.max_rate;
  for (const auto& e : rep.continuity.events) {
    r.max_event_rate = std::max(r.max_event_rate, e.windowed_max_rate);
    r.max_event_jump = std::max(r.max_event_jump, e.jump);
  }
  r.min_safety_h = std::numeric_limits<double>::infinity();
  for (const auto& e : rep.invariance.tasks) {
    r.min_safety_h = std::min(r.min_safety_h, e.min_h);
  }
  r.priority_samples = rep.priority.samples_checked;
  r.priority_violation = rep.priority.samples_checked ? rep.priority.max_violation
                                                      : std::numeric_limits<double>::quiet_NaN();
  r.max_slack_ratio = rep.priority.max_ratio;
  r.median_solve_us = rep.median_solve_us;

  std::size_t probe_index = 0;
  if (probe_time && !trace.times.empty()) {
    const auto it = std::lower_bound(trace.times.begin(), trace.times.end(), *probe_time - 0.5 * trace.dt);
    probe_index = std::min(static_cast<std::size_t>(it - trace.times.begin()), trace.size() - 1);
  }
  for (std::size_t m = 0; m < rep.tasks.size(); ++m) {
    r.labels.push_back(rep.tasks[m].label);
    r.final_h.push_back(rep.tasks[m].final_h);
    r.final_error.push_back(rep.tasks[m].final_error);
    r.probe_h.push_back(probe_time && !trace.barriers.empty()
                            ? trace.barriers[probe_index](static_cast<Eigen::Index>(m))
                            : std::numeric_limits<double>::quiet_NaN());
  }
  return r;
}

std::vector<Overrides> expand(const SweepGrid& grid)
{
  auto axis = [](const std::vector<double>& v) {
    std::vector<std::optional<double>> out(v.begin(), v.end());
    if (out.empty()) out.emplace_back(std::nullopt);
    return out;
  };
  std::vector<Overrides> out;
  for (const auto& dt : axis(grid.dt)) {
    for (const auto& kappa : axis(grid.kappa)) {
      for (const auto& l : axis(grid.l)) {
        Overrides o;
        o.dt = dt;
        o.kappa = kappa;
        o.l = l;
        out.push_back(o);
      }
    }
  }
  return out;
}

std::vector<RunSummary> run_sweep(const scenario::Scenario& base, const SweepGrid& grid, unsigned jobs,
                                  std::optional<double> probe_time)
{
  const auto points = expand(grid);
  std::vector<RunSummary> results(points.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      RunSummary& r = results[i];
      try {
        const auto s = apply(base, points[i]);
        const auto trace = scenario::run_scenario(s);
        r = summarize(s, trace, probe_time);
      } catch (const std::exception& e) {
        r.ok = false;
        r.failure = e.what();
      }
      r.params = points[i];
    }
  };

  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(points.size())));
  std::vector<std::thread> pool;
  for (unsigned j = 1; j < jobs; ++j) {
    pool.emplace_back(worker);
  }
  worker();
  for (auto& th : pool) {
    th.join();
  }
  return results;
}

void write_summary_csv(const std::vector<RunSummary>& rows, std::ostream& os)
{
  std::vector<std::string> labels;
  for (const auto& r : rows) {
    if (!r.labels.empty()) {
      labels = r.labels;
      break;
    }
  }
  os << "run,dt,kappa,l,status,steps,max_rate,max_event_rate,max_event_jump,min_safety_h,"
        "priority_violation,max_slack_ratio,median_solve_us";
  for (const auto& l : labels) os << ",final_h_" << l;
  for (const auto& l : labels) os << ",final_error_" << l;
  for (const auto& l : labels) os << ",probe_h_" << l;
  os << '\n';

  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    os << i << ',' << opt(r.params.dt) << ',' << opt(r.params.kappa) << ',' << opt(r.params.l) << ','
       << (r.ok ? "ok" : "failed") << ',' << r.steps << ',' << num(r.max_rate) << ',' << num(r.max_event_rate)
       << ',' << num(r.max_event_jump) << ',' << num(r.min_safety_h) << ',' << num(r.priority_violation) << ','
       << num(r.max_slack_ratio) << ',' << num(r.median_solve_us);
    for (std::size_t m = 0; m < labels.size(); ++m) {
      os << ',' << (m < r.final_h.size() ? num(r.final_h[m]) : "");
    }
    for (std::size_t m = 0; m < labels.size(); ++m) {
      os << ',' << (m < r.final_error.size() ? num(r.final_error[m]) : "");
    }
    for (std::size_t m = 0; m < labels.size(); ++m) {
      os << ',' << (m < r.probe_h.size() ? num(r.probe_h[m]) : "");
    }
    os << '\n';
  }
}

FeasibilityReport check_feasibility(const scenario::Scenario& s, std::size_t samples, std::uint64_t seed,
                                    double kkt_tol)
{
  const sim::SimSetup setup = scenario::make_setup(s);
  const auto& robot = *setup.robot;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  FeasibilityReport rep;
  for (std::size_t k = 0; k < samples; ++k) {
    Eigen::VectorXd q(robot.dof());
    for (int i = 0; i < robot.dof(); ++i) {
      q(i) = robot.limits_lower(i) + unit(rng) * (robot.limits_upper(i) - robot.limits_lower(i));
    }
    const double t = unit(rng) * setup.horizon;
    ++rep.samples;
    try {
      const auto asm_qp =
          control::assemble(setup.tasks, setup.schedule, {q, t}, setup.dynamics, t, setup.controller);
      const auto sol = qp::solve_qp(asm_qp.problem, setup.controller.solver);
      const double res = qp::check_kkt(asm_qp.problem, sol).max();
      rep.max_kkt_residual = std::max(rep.max_kkt_residual, res);
      if (!(res <= kkt_tol)) {
        ++rep.failures;
        rep.messages.push_back("sample " + std::to_string(k) + " (t = " + num(t) + "): KKT residual " + num(res));
      }
    } catch (const BehindCamera&) {
      // outside the domain of the image-feature barrier; not a controller failure
      --rep.samples;
    } catch (const std::exception& e) {
      ++rep.failures;
      rep.messages.push_back("sample " + std::to_string(k) + " (t = " + num(t) + "): " + e.what());
    }
  }
  return rep;
}

}  // namespace cbf_taskstack::experiments
