#pragma once

#include "cbf_taskstack/controller.hpp"
#include "cbf_taskstack/kinematics.hpp"
#include "cbf_taskstack/priority.hpp"
#include "cbf_taskstack/sim.hpp"
#include "cbf_taskstack/task.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace cbf_taskstack::scenario {

enum class MapKind { kJointIdentity, kEePosition, kImageFeature };

using BarrierSpec = std::variant<tasks::SetpointBarrier, tasks::TrackingBarrier, tasks::JointBoxBarrier>;

struct TaskSpec
{
  std::string label;
  MapKind map = MapKind::kJointIdentity;
  BarrierSpec barrier;
  tasks::ClassKSpec class_k;
  bool safety_critical = false;

  bool operator==(const TaskSpec&) const = default;
};

struct SegmentSpec
{
  double start = 0.0;
  /// (higher, lower) label pairs.
  std::vector<std::pair<std::string, std::string>> order;
  double kappa = 10.0;

  bool operator==(const SegmentSpec&) const = default;
};

struct RampSpec
{
  std::string task;
  priority::TaskRamp::Kind kind = priority::TaskRamp::Kind::kInsert;
  double time = 0.0;
  double duration = 1.0;

  bool operator==(const RampSpec&) const = default;
};

struct ScheduleSpec
{
  double kappa = 10.0;
  double transition_window = 1.0;
  priority::TransitionProfile profile = priority::TransitionProfile::kSmoothstep;
  priority::BlendMode blend = priority::BlendMode::kEntrywise;
  std::vector<SegmentSpec> segments;
  std::vector<RampSpec> ramps;

  bool operator==(const ScheduleSpec&) const = default;
};

struct SimSettings
{
  double dt = 1e-3;
  double horizon = 30.0;

  bool operator==(const SimSettings&) const = default;
};

struct OutputSpec
{
  std::string trace;
  std::string report;

  bool operator==(const OutputSpec&) const = default;
};

/// Declarative description of one closed-loop experiment.
struct Scenario
{
  std::string description;
  kin::RobotModel robot;
  Eigen::VectorXd initial_q;
  std::optional<kin::CameraModel> camera;
  std::vector<TaskSpec> tasks;
  ScheduleSpec schedule;
  control::ControllerConfig controller;
  SimSettings sim;
  OutputSpec outputs;

  bool operator==(const Scenario& o) const;
};

/// Strict JSON parse: unknown keys and wrong types raise ParseError naming
/// the field (or the line for syntax errors). Defaults are filled in, then
/// the result is validated (ValidationError lists every violation).
Scenario parse_scenario_string(const std::string& text, const std::string& source = "<string>");

/// Reads and parses a file. Throws ParseError or ValidationError.
Scenario parse_scenario(const std::filesystem::path& path);

/// Canonical JSON (robot as explicit joints, all defaults written out).
std::string serialize_scenario(const Scenario& s);

/// Throws ValidationError listing every violation.
void validate_scenario(const Scenario& s);

/// Runtime objects for sim::run. Throws ValidationError.
sim::SimSetup make_setup(const Scenario& s);

sim::SimTrace run_scenario(const Scenario& s);

/// CBF_TASKSTACK_SCENARIO_DIR if set, else the bundled directory.
std::filesystem::path scenario_dir();

/// `name` as a path if it exists, else looked up in scenario_dir(), with or
/// without the .json suffix. Throws ParseError if nothing matches.
std::filesystem::path resolve_scenario(const std::string& name);

std::vector<std::filesystem::path> list_scenarios();

}  // namespace cbf_taskstack::scenario
