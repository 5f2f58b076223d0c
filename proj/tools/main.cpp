// cbf-taskstack: run, sweep and validate scenario files.

#include "cbf_taskstack/errors.hpp"
#include "cbf_taskstack/experiments.hpp"
#include "cbf_taskstack/scenario.hpp"
#include "cbf_taskstack/sim.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

namespace cbf = cbf_taskstack;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kRuntime = 2;

// Loads a scenario; prints diagnostics and returns nullopt on parse or
// validation failure.
std::optional<cbf::scenario::Scenario> load(const std::string& name)
{
  try {
    return cbf::scenario::parse_scenario(cbf::scenario::resolve_scenario(name));
  } catch (const cbf::ValidationError& e) {
    std::cerr << name << ": invalid scenario\n";
    for (const auto& v : e.violations()) {
      std::cerr << "  - " << v << "\n";
    }
  } catch (const cbf::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
  }
  return std::nullopt;
}

std::string pretty(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.15g", v);
  return buf;
}

bool revalidate(const cbf::scenario::Scenario& s)
{
  try {
    cbf::scenario::validate_scenario(s);
    return true;
  } catch (const cbf::ValidationError& e) {
    std::cerr << "invalid overrides\n";
    for (const auto& v : e.violations()) {
      std::cerr << "  - " << v << "\n";
    }
    return false;
  }
}

struct RunArgs
{
  std::string scenario;
  std::string out;
  std::string report;
  std::optional<double> dt;
  std::optional<double> horizon;
};

int run_command(const RunArgs& args)
{
  auto loaded = load(args.scenario);
  if (!loaded) {
    return kInvalid;
  }
  cbf::experiments::Overrides ov;
  ov.dt = args.dt;
  ov.horizon = args.horizon;
  const auto s = cbf::experiments::apply(*loaded, ov);
  if (!revalidate(s)) {
    return kInvalid;
  }

  std::string trace_path = args.out.empty() ? s.outputs.trace : args.out;
  std::string report_path = args.report;
  if (report_path.empty()) {
    if (!args.out.empty()) {
      report_path = (fs::path(args.out).parent_path() / "report.txt").string();
    } else {
      report_path = s.outputs.report;
    }
  }

  try {
    const auto setup = cbf::scenario::make_setup(s);
    const auto trace = cbf::sim::run(setup);
    const auto report = cbf::sim::make_report(trace, setup);

    if (!trace_path.empty()) {
      std::ofstream os(trace_path);
      if (!os) {
        std::cerr << "cannot write " << trace_path << "\n";
        return kRuntime;
      }
      cbf::sim::write_csv(trace, os);
    }

    auto emit = [&](std::ostream& os) {
      os << "scenario: " << cbf::scenario::resolve_scenario(args.scenario).string() << "\n";
      if (!s.description.empty()) {
        os << "description: " << s.description << "\n";
      }
      os << "horizon: " << pretty(s.sim.horizon) << "\n";
      os << "overrides:" << (args.dt ? " dt=" + pretty(*args.dt) : "")
         << (args.horizon ? " horizon=" + pretty(*args.horizon) : "")
         << (!args.dt && !args.horizon ? " none" : "") << "\n";
      cbf::sim::write_report(report, trace, os);
    };
    if (report_path.empty()) {
      emit(std::cout);
    } else {
      std::ofstream os(report_path);
      if (!os) {
        std::cerr << "cannot write " << report_path << "\n";
        return kRuntime;
      }
      emit(os);
    }

    if (!trace.ok()) {
      std::cerr << "run failed at t = " << trace.failure_time << ": " << *trace.failure << "\n";
      return kRuntime;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}

struct SweepArgs
{
  std::string scenario;
  std::string out;
  std::vector<double> dt;
  std::vector<double> kappa;
  std::vector<double> l;
  std::optional<double> horizon;
  std::optional<double> probe;
  unsigned jobs = 0;
};

int sweep_command(const SweepArgs& args)
{
  auto loaded = load(args.scenario);
  if (!loaded) {
    return kInvalid;
  }
  cbf::experiments::Overrides base_ov;
  base_ov.horizon = args.horizon;
  const auto base = cbf::experiments::apply(*loaded, base_ov);

  const cbf::experiments::SweepGrid grid{args.dt, args.kappa, args.l};
  for (const auto& point : cbf::experiments::expand(grid)) {
    if (!revalidate(cbf::experiments::apply(base, point))) {
      return kInvalid;
    }
  }

  const unsigned jobs = args.jobs ? args.jobs : std::max(1u, std::thread::hardware_concurrency());
  const auto rows = cbf::experiments::run_sweep(base, grid, jobs, args.probe);

  if (args.out.empty()) {
    cbf::experiments::write_summary_csv(rows, std::cout);
  } else {
    std::ofstream os(args.out);
    if (!os) {
      std::cerr << "cannot write " << args.out << "\n";
      return kRuntime;
    }
    cbf::experiments::write_summary_csv(rows, os);
  }

  int status = kOk;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].ok) {
      std::cerr << "run " << i << " failed: " << rows[i].failure << "\n";
      status = kRuntime;
    }
  }
  return status;
}

int validate_command(const std::string& name, std::uint64_t seed, std::size_t samples)
{
  auto s = load(name);
  if (!s) {
    return kInvalid;
  }
  std::cout << "scenario ok: " << s->tasks.size() << " tasks, " << s->schedule.segments.size()
            << " priority segments, " << s->schedule.ramps.size() << " ramps\n";
  if (samples == 0) {
    return kOk;
  }
  try {
    const auto rep = cbf::experiments::check_feasibility(*s, samples, seed);
    std::cout << "random-state check (seed " << seed << "): " << rep.samples << " solves, " << rep.failures
              << " failures, max KKT residual " << rep.max_kkt_residual << "\n";
    for (const auto& m : rep.messages) {
      std::cerr << "  - " << m << "\n";
    }
    return rep.failures == 0 ? kOk : kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
}

int list_command()
{
  const auto dir = cbf::scenario::scenario_dir();
  std::cout << "scenario directory: " << dir.string() << "\n";
  for (const auto& path : cbf::scenario::list_scenarios()) {
    std::cout << "  " << path.filename().string();
    try {
      const auto s = cbf::scenario::parse_scenario(path);
      if (!s.description.empty()) {
        std::cout << " - " << s.description;
      }
    } catch (const cbf::Error& e) {
      std::cout << " (invalid: " << e.what() << ")";
    }
    std::cout << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Prioritized control-barrier-function task stacks: simulate and verify scenarios"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Simulate a scenario and write its trace and report");
  run->add_option("scenario", run_args.scenario, "Scenario file or bundled name")->required();
  run->add_option("--out", run_args.out, "Trace CSV path");
  run->add_option("--report", run_args.report, "Report path (default: report.txt next to --out)");
  run->add_option("--dt", run_args.dt, "Override the control period [s]")->check(CLI::PositiveNumber);
  run->add_option("--horizon", run_args.horizon, "Override the horizon [s]")->check(CLI::PositiveNumber);

  SweepArgs sweep_args;
  auto* sweep = app.add_subcommand("sweep", "Run a parameter grid and write one summary row per run");
  sweep->add_option("scenario", sweep_args.scenario, "Scenario file or bundled name")->required();
  sweep->add_option("--out", sweep_args.out, "Summary CSV path (default: stdout)");
  sweep->add_option("--dt", sweep_args.dt, "Control periods")->delimiter(',');
  sweep->add_option("--kappa", sweep_args.kappa, "Priority ratios")->delimiter(',');
  sweep->add_option("--l", sweep_args.l, "Slack penalties")->delimiter(',');
  sweep->add_option("--horizon", sweep_args.horizon, "Override the horizon [s]")->check(CLI::PositiveNumber);
  sweep->add_option("--probe-time", sweep_args.probe, "Also report every task's h at this time");
  sweep->add_option("--jobs", sweep_args.jobs, "Concurrent runs (default: hardware threads)");

  std::string validate_name;
  std::uint64_t seed = 1;
  std::size_t samples = 0;
  auto* validate = app.add_subcommand("validate", "Check a scenario; optionally solve at random states");
  validate->add_option("scenario", validate_name, "Scenario file or bundled name")->required();
  validate->add_option("--seed", seed, "Seed for the random-state check");
  validate->add_option("--samples", samples, "Random states to solve (default 1000 when --seed is given)");

  auto* list = app.add_subcommand("list-scenarios", "List bundled scenarios");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return run_command(run_args);
    if (*sweep) return sweep_command(sweep_args);
    if (*validate) {
      if (validate->count("--seed") && !validate->count("--samples")) {
        samples = 1000;
      }
      return validate_command(validate_name, seed, samples);
    }
    if (*list) return list_command();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}
