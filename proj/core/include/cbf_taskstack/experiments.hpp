#pragma once

#include "cbf_taskstack/scenario.hpp"
#include "cbf_taskstack/sim.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cbf_taskstack::experiments {

/// Parameter overrides applied on top of a parsed scenario.
struct Overrides
{
  std::optional<double> dt;
  std::optional<double> horizon;
  /// Replaces the schedule default and every segment's kappa.
  std::optional<double> kappa;
  std::optional<double> l;
};

scenario::Scenario apply(scenario::Scenario s, const Overrides& o);

/// One row of a sweep summary.
struct RunSummary
{
  Overrides params;
  bool ok = true;
  std::string failure;
  std::size_t steps = 0;
  double max_rate = 0.0;
  /// max over events of the windowed max |du|/dt and of the event jump.
  double max_event_rate = 0.0;
  double max_event_jump = 0.0;
  /// min over safety-critical tasks and time; +inf without such tasks.
  double min_safety_h = 0.0;
  double priority_violation = 0.0;
  double max_slack_ratio = 0.0;
  std::size_t priority_samples = 0;
  double median_solve_us = 0.0;
  std::vector<std::string> labels;
  std::vector<double> final_h;
  std::vector<double> final_error;
  /// Per-task h at the probe time, NaN when no probe was requested.
  std::vector<double> probe_h;
};

RunSummary summarize(const scenario::Scenario& s, const sim::SimTrace& trace,
                     std::optional<double> probe_time = std::nullopt);

struct SweepGrid
{
  std::vector<double> dt;
  std::vector<double> kappa;
  std::vector<double> l;
};

/// Cartesian product of the grid (an empty axis keeps the scenario value).
std::vector<Overrides> expand(const SweepGrid& grid);

/**
 * Runs every grid point, up to `jobs` at a time. Per-run failures are
 * recorded in the summary; the sweep continues. Results are in grid order.
 */
std::vector<RunSummary> run_sweep(const scenario::Scenario& base, const SweepGrid& grid, unsigned jobs = 1,
                                  std::optional<double> probe_time = std::nullopt);

void write_summary_csv(const std::vector<RunSummary>& rows, std::ostream& os);

struct FeasibilityReport
{
  std::size_t samples = 0;
  std::size_t failures = 0;
  double max_kkt_residual = 0.0;
  std::vector<std::string> messages;
};

/**
 * Solves the controller QP at `samples` random configurations inside the
 * joint limits and random times in [0, horizon]; every solve must succeed
 * with KKT residuals below `kkt_tol`.
 */
FeasibilityReport check_feasibility(const scenario::Scenario& s, std::size_t samples, std::uint64_t seed,
                                    double kkt_tol = 1e-8);

}  // namespace cbf_taskstack::experiments
