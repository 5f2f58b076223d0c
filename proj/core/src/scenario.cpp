#include "cbf_taskstack/scenario.hpp"

#include "cbf_taskstack/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace cbf_taskstack::scenario {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Strict reading

class Node
{
public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  const std::string& path() const { return path_; }
  const json& raw() const { return j_; }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(path_, what); }

  const Node& object(std::initializer_list<const char*> allowed) const
  {
    if (!j_.is_object()) {
      fail("expected an object");
    }
    for (const auto& [key, _] : j_.items()) {
      const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
      if (!known) {
        throw ParseError(child_path(key), "unknown key");
      }
    }
    return *this;
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  Node at(const std::string& key) const
  {
    if (!j_.contains(key)) {
      throw ParseError(child_path(key), "missing required field");
    }
    return Node(j_.at(key), child_path(key));
  }

  std::vector<Node> items() const
  {
    if (!j_.is_array()) {
      fail("expected an array");
    }
    std::vector<Node> out;
    for (std::size_t i = 0; i < j_.size(); ++i) {
      out.emplace_back(j_[i], path_ + "[" + std::to_string(i) + "]");
    }
    return out;
  }

  double number() const
  {
    if (!j_.is_number()) {
      fail("expected a number");
    }
    return j_.get<double>();
  }

  int integer() const
  {
    if (!j_.is_number_integer()) {
      fail("expected an integer");
    }
    return j_.get<int>();
  }

  bool boolean() const
  {
    if (!j_.is_boolean()) {
      fail("expected true or false");
    }
    return j_.get<bool>();
  }

  std::string string() const
  {
    if (!j_.is_string()) {
      fail("expected a string");
    }
    return j_.get<std::string>();
  }

  Eigen::VectorXd vector(Eigen::Index expected = -1) const
  {
    const auto elems = items();
    if (expected >= 0 && static_cast<Eigen::Index>(elems.size()) != expected) {
      fail("expected " + std::to_string(expected) + " numbers, got " + std::to_string(elems.size()));
    }
    Eigen::VectorXd v(static_cast<Eigen::Index>(elems.size()));
    for (std::size_t i = 0; i < elems.size(); ++i) {
      v(static_cast<Eigen::Index>(i)) = elems[i].number();
    }
    return v;
  }

  Eigen::MatrixXd matrix() const
  {
    const auto rows = items();
    if (rows.empty()) {
      fail("expected a non-empty array of rows");
    }
    const Eigen::VectorXd first = rows.front().vector();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), first.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      m.row(static_cast<Eigen::Index>(r)) = rows[r].vector(first.size()).transpose();
    }
    return m;
  }

  double number_or(const std::string& key, double fallback) const
  {
    return has(key) ? at(key).number() : fallback;
  }

  bool boolean_or(const std::string& key, bool fallback) const
  {
    return has(key) ? at(key).boolean() : fallback;
  }

private:
  std::string child_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& j_;
  std::string path_;
};

Eigen::Isometry3d read_transform(const Node& n)
{
  n.object({"translation", "rotation", "rpy"});
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  if (n.has("translation")) {
    t = n.at("translation").vector(3);
  }
  if (n.has("rotation") && n.has("rpy")) {
    n.fail("give either 'rotation' or 'rpy', not both");
  }
  if (n.has("rotation")) {
    const Eigen::MatrixXd m = n.at("rotation").matrix();
    if (m.rows() != 3 || m.cols() != 3) {
      n.at("rotation").fail("expected a 3x3 matrix");
    }
    R = m;
  } else if (n.has("rpy")) {
    const Eigen::Vector3d rpy = n.at("rpy").vector(3);
    R = kin::rpy_to_matrix(rpy.x(), rpy.y(), rpy.z());
  }
  return kin::make_transform(t, R);
}

void read_robot(const Node& n, Scenario& s)
{
  n.object({"name", "model", "dh", "joints", "tool", "limits_lower", "limits_upper", "initial_q"});
  const int sources = int(n.has("model")) + int(n.has("dh")) + int(n.has("joints"));
  if (sources != 1) {
    n.fail("exactly one of 'model', 'dh' or 'joints' is required");
  }

  kin::RobotModel& robot = s.robot;
  if (n.has("model")) {
    const std::string model = n.at("model").string();
    if (model == "demo_7dof") {
      robot = kin::demo_7dof();
    } else {
      n.at("model").fail("unknown built-in model '" + model + "' (available: demo_7dof)");
    }
  } else if (n.has("dh")) {
    std::vector<kin::DHParameters> dh;
    for (const auto& row : n.at("dh").items()) {
      row.object({"a", "alpha", "d", "theta"});
      dh.push_back({row.number_or("a", 0.0), row.number_or("alpha", 0.0), row.number_or("d", 0.0),
                    row.number_or("theta", 0.0)});
    }
    const auto k = static_cast<Eigen::Index>(dh.size());
    if (!n.has("limits_lower") || !n.has("limits_upper")) {
      n.fail("'dh' robots need limits_lower and limits_upper");
    }
    // from_dh validates; defer that to validate_scenario by building with placeholders.
    robot = kin::from_dh("", dh, Eigen::VectorXd::Constant(k, -1.0), Eigen::VectorXd::Constant(k, 1.0));
  } else {
    for (const auto& jn : n.at("joints").items()) {
      jn.object({"type", "axis", "link"});
      kin::Joint joint;
      if (jn.has("type")) {
        const std::string type = jn.at("type").string();
        if (type == "revolute") {
          joint.type = kin::JointType::kRevolute;
        } else if (type == "prismatic") {
          joint.type = kin::JointType::kPrismatic;
        } else {
          jn.at("type").fail("expected 'revolute' or 'prismatic'");
        }
      }
      if (jn.has("axis")) {
        joint.axis = jn.at("axis").vector(3);
      }
      if (jn.has("link")) {
        joint.link = read_transform(jn.at("link"));
      }
      robot.joints.push_back(joint);
    }
    robot.tool = Eigen::Isometry3d::Identity();
  }

  if (n.has("tool")) {
    robot.tool = robot.tool * read_transform(n.at("tool"));
  }
  if (n.has("name")) {
    robot.name = n.at("name").string();
  } else if (robot.name.empty()) {
    robot.name = "robot";
  }
  if (n.has("limits_lower")) {
    robot.limits_lower = n.at("limits_lower").vector();
  }
  if (n.has("limits_upper")) {
    robot.limits_upper = n.at("limits_upper").vector();
  }
  if (n.has("joints") && (!n.has("limits_lower") || !n.has("limits_upper"))) {
    n.fail("'joints' robots need limits_lower and limits_upper");
  }
  s.initial_q = n.has("initial_q") ? n.at("initial_q").vector()
                                   : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(robot.joints.size()));
}

kin::CameraModel read_camera(const Node& n)
{
  n.object({"focal", "principal_point", "mount", "target_point", "z_min"});
  kin::CameraModel cam;
  if (n.has("focal")) cam.focal = n.at("focal").vector(2);
  if (n.has("principal_point")) cam.principal_point = n.at("principal_point").vector(2);
  if (n.has("mount")) cam.mount = read_transform(n.at("mount"));
  cam.target_point = n.at("target_point").vector(3);
  cam.z_min = n.number_or("z_min", cam.z_min);
  return cam;
}

tasks::ClassKSpec read_class_k(const Node& n)
{
  n.object({"kind", "alpha"});
  tasks::ClassKSpec k;
  if (n.has("kind")) {
    const std::string kind = n.at("kind").string();
    if (kind == "linear") {
      k.kind = tasks::ClassKSpec::Kind::kLinear;
    } else if (kind == "cubic") {
      k.kind = tasks::ClassKSpec::Kind::kCubic;
    } else {
      n.at("kind").fail("expected 'linear' or 'cubic'");
    }
  }
  k.alpha = n.number_or("alpha", k.alpha);
  return k;
}

BarrierSpec read_barrier(const Node& n, const kin::RobotModel& robot)
{
  const std::string type = n.at("type").string();
  if (type == "setpoint") {
    n.object({"type", "target", "gain"});
    return tasks::SetpointBarrier{n.at("target").vector(), n.number_or("gain", 1.0)};
  }
  if (type == "tracking") {
    n.object({"type", "reference"});
    std::vector<tasks::PolynomialSegment> segments;
    for (const auto& seg : n.at("reference").items()) {
      seg.object({"start", "coefficients"});
      segments.push_back({seg.number_or("start", 0.0), seg.at("coefficients").matrix()});
    }
    try {
      return tasks::TrackingBarrier{tasks::Reference(std::move(segments))};
    } catch (const ConfigError& e) {
      n.at("reference").fail(e.what());
    }
  }
  if (type == "joint_box") {
    n.object({"type", "lower", "upper", "gain"});
    tasks::JointBoxBarrier b;
    b.lower = n.has("lower") ? n.at("lower").vector() : robot.limits_lower;
    b.upper = n.has("upper") ? n.at("upper").vector() : robot.limits_upper;
    b.gain = n.number_or("gain", 1.0);
    return b;
  }
  n.at("type").fail("expected 'setpoint', 'tracking' or 'joint_box'");
}

TaskSpec read_task(const Node& n, const kin::RobotModel& robot)
{
  n.object({"label", "map", "barrier", "class_k", "safety_critical"});
  TaskSpec t;
  t.label = n.at("label").string();
  const std::string map = n.at("map").string();
  if (map == "joint_identity") {
    t.map = MapKind::kJointIdentity;
  } else if (map == "ee_position") {
    t.map = MapKind::kEePosition;
  } else if (map == "image_feature") {
    t.map = MapKind::kImageFeature;
  } else {
    n.at("map").fail("expected 'joint_identity', 'ee_position' or 'image_feature'");
  }
  t.barrier = read_barrier(n.at("barrier"), robot);
  if (n.has("class_k")) {
    t.class_k = read_class_k(n.at("class_k"));
  }
  t.safety_critical = n.boolean_or("safety_critical", false);
  return t;
}

void read_schedule(const Node& n, ScheduleSpec& s)
{
  n.object({"kappa", "transition_window", "profile", "blend", "segments", "insertions", "removals"});
  s.kappa = n.number_or("kappa", s.kappa);
  s.transition_window = n.number_or("transition_window", s.transition_window);
  if (n.has("profile")) {
    const std::string p = n.at("profile").string();
    if (p == "smoothstep") {
      s.profile = priority::TransitionProfile::kSmoothstep;
    } else if (p == "step") {
      s.profile = priority::TransitionProfile::kStep;
    } else {
      n.at("profile").fail("expected 'smoothstep' or 'step'");
    }
  }
  if (n.has("blend")) {
    const std::string b = n.at("blend").string();
    if (b == "entrywise") {
      s.blend = priority::BlendMode::kEntrywise;
    } else if (b == "relaxed") {
      s.blend = priority::BlendMode::kRelaxed;
    } else {
      n.at("blend").fail("expected 'entrywise' or 'relaxed'");
    }
  }
  if (n.has("segments")) {
    for (const auto& seg : n.at("segments").items()) {
      seg.object({"start", "order", "stack", "kappa"});
      SegmentSpec spec;
      spec.start = seg.number_or("start", 0.0);
      spec.kappa = seg.number_or("kappa", s.kappa);
      if (seg.has("order") && seg.has("stack")) {
        seg.fail("give either 'order' (pairs) or 'stack' (chain), not both");
      }
      if (seg.has("order")) {
        for (const auto& pair : seg.at("order").items()) {
          const auto ends = pair.items();
          if (ends.size() != 2) {
            pair.fail("expected [higher, lower]");
          }
          spec.order.emplace_back(ends[0].string(), ends[1].string());
        }
      }
      if (seg.has("stack")) {
        const auto chain = seg.at("stack").items();
        for (std::size_t i = 1; i < chain.size(); ++i) {
          spec.order.emplace_back(chain[i - 1].string(), chain[i].string());
        }
      }
      s.segments.push_back(std::move(spec));
    }
  }
  auto read_ramps = [&](const char* key, priority::TaskRamp::Kind kind) {
    if (!n.has(key)) {
      return;
    }
    for (const auto& r : n.at(key).items()) {
      r.object({"task", "time", "duration"});
      s.ramps.push_back({r.at("task").string(), kind, r.at("time").number(), r.number_or("duration", 1.0)});
    }
  };
  read_ramps("insertions", priority::TaskRamp::Kind::kInsert);
  read_ramps("removals", priority::TaskRamp::Kind::kRemove);
}

control::ControllerConfig read_controller(const Node& n)
{
  n.object({"l", "enforce_slack_nonneg", "warm_start", "ramp_mode", "tolerance", "max_iterations"});
  control::ControllerConfig c;
  c.l = n.number_or("l", c.l);
  c.enforce_slack_nonneg = n.boolean_or("enforce_slack_nonneg", c.enforce_slack_nonneg);
  c.warm_start = n.boolean_or("warm_start", c.warm_start);
  if (n.has("ramp_mode")) {
    const std::string m = n.at("ramp_mode").string();
    if (m == "scaled_row") {
      c.ramp_mode = control::RampMode::kScaledRow;
    } else if (m == "offset_only") {
      c.ramp_mode = control::RampMode::kOffsetOnly;
    } else {
      n.at("ramp_mode").fail("expected 'scaled_row' or 'offset_only'");
    }
  }
  c.solver.tolerance = n.number_or("tolerance", c.solver.tolerance);
  if (n.has("max_iterations")) {
    c.solver.max_iterations = n.at("max_iterations").integer();
  }
  return c;
}

// ---------------------------------------------------------------------------
// Writing

ojson vec_json(const Eigen::VectorXd& v)
{
  ojson a = ojson::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    a.push_back(v(i));
  }
  return a;
}

ojson mat_json(const Eigen::MatrixXd& m)
{
  ojson a = ojson::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    a.push_back(vec_json(m.row(r).transpose()));
  }
  return a;
}

ojson transform_json(const Eigen::Isometry3d& T)
{
  ojson j;
  j["translation"] = vec_json(T.translation());
  j["rotation"] = mat_json(T.linear());
  return j;
}

const char* map_name(MapKind k)
{
  switch (k) {
    case MapKind::kJointIdentity: return "joint_identity";
    case MapKind::kEePosition: return "ee_position";
    case MapKind::kImageFeature: return "image_feature";
  }
  return "";
}

ojson barrier_json(const BarrierSpec& b)
{
  ojson j;
  if (const auto* sp = std::get_if<tasks::SetpointBarrier>(&b)) {
    j["type"] = "setpoint";
    j["target"] = vec_json(sp->target);
    j["gain"] = sp->gain;
  } else if (const auto* tr = std::get_if<tasks::TrackingBarrier>(&b)) {
    j["type"] = "tracking";
    ojson segs = ojson::array();
    for (const auto& seg : tr->reference.segments()) {
      ojson sj;
      sj["start"] = seg.start;
      sj["coefficients"] = mat_json(seg.coefficients);
      segs.push_back(sj);
    }
    j["reference"] = segs;
  } else if (const auto* jb = std::get_if<tasks::JointBoxBarrier>(&b)) {
    j["type"] = "joint_box";
    j["lower"] = vec_json(jb->lower);
    j["upper"] = vec_json(jb->upper);
    j["gain"] = jb->gain;
  }
  return j;
}

bool same_vector(const Eigen::VectorXd& a, const Eigen::VectorXd& b)
{
  return a.size() == b.size() && a == b;
}

std::string where(const std::string& text, std::size_t byte)
{
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

int map_dim(MapKind k, int dof)
{
  switch (k) {
    case MapKind::kJointIdentity: return dof;
    case MapKind::kEePosition: return 3;
    case MapKind::kImageFeature: return 2;
  }
  return 0;
}

}  // namespace

bool Scenario::operator==(const Scenario& o) const
{
  return description == o.description && robot == o.robot && same_vector(initial_q, o.initial_q) &&
         camera == o.camera && tasks == o.tasks && schedule == o.schedule && controller == o.controller &&
         sim == o.sim && outputs == o.outputs;
}

Scenario parse_scenario_string(const std::string& text, const std::string& source)
{
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(source + ": " + where(text, e.byte), "malformed JSON");
  }

  const Node n(root, "");
  n.object({"description", "robot", "camera", "tasks", "schedule", "controller", "sim", "outputs"});

  Scenario s;
  if (n.has("description")) {
    s.description = n.at("description").string();
  }
  read_robot(n.at("robot"), s);
  if (n.has("camera")) {
    s.camera = read_camera(n.at("camera"));
  }
  for (const auto& t : n.at("tasks").items()) {
    s.tasks.push_back(read_task(t, s.robot));
  }
  if (n.has("schedule")) {
    read_schedule(n.at("schedule"), s.schedule);
  }
  if (s.schedule.segments.empty()) {
    s.schedule.segments.push_back({0.0, {}, s.schedule.kappa});
  }
  if (n.has("controller")) {
    s.controller = read_controller(n.at("controller"));
  }
  if (n.has("sim")) {
    const Node sim = n.at("sim");
    sim.object({"dt", "horizon"});
    s.sim.dt = sim.number_or("dt", s.sim.dt);
    s.sim.horizon = sim.number_or("horizon", s.sim.horizon);
  }
  if (n.has("outputs")) {
    const Node out = n.at("outputs");
    out.object({"trace", "report"});
    if (out.has("trace")) s.outputs.trace = out.at("trace").string();
    if (out.has("report")) s.outputs.report = out.at("report").string();
  }
  validate_scenario(s);
  return s;
}

Scenario parse_scenario(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) {
    throw ParseError(path.string(), "cannot open file");
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario_string(buf.str(), path.string());
}

std::string serialize_scenario(const Scenario& s)
{
  ojson root;
  root["description"] = s.description;

  ojson robot;
  robot["name"] = s.robot.name;
  ojson joints = ojson::array();
  for (const auto& j : s.robot.joints) {
    ojson jj;
    jj["type"] = j.type == kin::JointType::kRevolute ? "revolute" : "prismatic";
    jj["axis"] = vec_json(j.axis);
    jj["link"] = transform_json(j.link);
    joints.push_back(jj);
  }
  robot["joints"] = joints;
  robot["tool"] = transform_json(s.robot.tool);
  robot["limits_lower"] = vec_json(s.robot.limits_lower);
  robot["limits_upper"] = vec_json(s.robot.limits_upper);
  robot["initial_q"] = vec_json(s.initial_q);
  root["robot"] = robot;

  if (s.camera) {
    ojson cam;
    cam["focal"] = vec_json(s.camera->focal);
    cam["principal_point"] = vec_json(s.camera->principal_point);
    cam["mount"] = transform_json(s.camera->mount);
    cam["target_point"] = vec_json(s.camera->target_point);
    cam["z_min"] = s.camera->z_min;
    root["camera"] = cam;
  }

  ojson task_list = ojson::array();
  for (const auto& t : s.tasks) {
    ojson tj;
    tj["label"] = t.label;
    tj["map"] = map_name(t.map);
    tj["barrier"] = barrier_json(t.barrier);
    tj["class_k"] = {{"kind", t.class_k.kind == tasks::ClassKSpec::Kind::kLinear ? "linear" : "cubic"},
                     {"alpha", t.class_k.alpha}};
    tj["safety_critical"] = t.safety_critical;
    task_list.push_back(tj);
  }
  root["tasks"] = task_list;

  ojson sched;
  sched["kappa"] = s.schedule.kappa;
  sched["transition_window"] = s.schedule.transition_window;
  sched["profile"] = s.schedule.profile == priority::TransitionProfile::kSmoothstep ? "smoothstep" : "step";
  sched["blend"] = s.schedule.blend == priority::BlendMode::kEntrywise ? "entrywise" : "relaxed";
  ojson segs = ojson::array();
  for (const auto& seg : s.schedule.segments) {
    ojson sj;
    sj["start"] = seg.start;
    ojson order = ojson::array();
    for (const auto& [hi, lo] : seg.order) {
      order.push_back(ojson::array({hi, lo}));
    }
    sj["order"] = order;
    sj["kappa"] = seg.kappa;
    segs.push_back(sj);
  }
  sched["segments"] = segs;
  ojson ins = ojson::array();
  ojson rem = ojson::array();
  for (const auto& r : s.schedule.ramps) {
    ojson rj = {{"task", r.task}, {"time", r.time}, {"duration", r.duration}};
    (r.kind == priority::TaskRamp::Kind::kInsert ? ins : rem).push_back(rj);
  }
  sched["insertions"] = ins;
  sched["removals"] = rem;
  root["schedule"] = sched;

  root["controller"] = {
      {"l", s.controller.l},
      {"enforce_slack_nonneg", s.controller.enforce_slack_nonneg},
      {"warm_start", s.controller.warm_start},
      {"ramp_mode", s.controller.ramp_mode == control::RampMode::kScaledRow ? "scaled_row" : "offset_only"},
      {"tolerance", s.controller.solver.tolerance},
      {"max_iterations", s.controller.solver.max_iterations},
  };
  root["sim"] = {{"dt", s.sim.dt}, {"horizon", s.sim.horizon}};
  ojson out = ojson::object();
  if (!s.outputs.trace.empty()) out["trace"] = s.outputs.trace;
  if (!s.outputs.report.empty()) out["report"] = s.outputs.report;
  root["outputs"] = out;

  return root.dump(2) + "\n";
}

void validate_scenario(const Scenario& s)
{
  std::vector<std::string> v;
  auto check = [&](bool ok, const std::string& msg) {
    if (!ok) v.push_back(msg);
  };
  auto guard = [&](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      v.emplace_back(e.what());
    }
  };

  guard([&] { s.robot.validate(); });
  const int dof = s.robot.dof();
  check(s.initial_q.size() == dof, "robot.initial_q has " + std::to_string(s.initial_q.size()) +
                                       " entries, robot has " + std::to_string(dof) + " joints");
  if (s.camera) {
    guard([&] { s.camera->validate(); });
  }

  check(!s.tasks.empty(), "at least one task is required");
  std::set<std::string> labels;
  for (std::size_t i = 0; i < s.tasks.size(); ++i) {
    const auto& t = s.tasks[i];
    const std::string who = "tasks[" + std::to_string(i) + "] ('" + t.label + "')";
    check(!t.label.empty(), who + ": label must not be empty");
    check(labels.insert(t.label).second, who + ": duplicate label '" + t.label + "'");
    check(t.class_k.alpha > 0.0, who + ": class_k.alpha must be positive");
    check(t.map != MapKind::kImageFeature || s.camera.has_value(), who + ": image_feature requires a camera");
    const int dim = map_dim(t.map, dof);

    if (const auto* sp = std::get_if<tasks::SetpointBarrier>(&t.barrier)) {
      check(sp->target.size() == dim, who + ": setpoint target has " + std::to_string(sp->target.size()) +
                                          " entries, map output has " + std::to_string(dim));
      check(sp->gain > 0.0, who + ": setpoint gain must be positive");
    } else if (const auto* tr = std::get_if<tasks::TrackingBarrier>(&t.barrier)) {
      check(tr->reference.dim() == dim, who + ": tracking reference dimension " +
                                            std::to_string(tr->reference.dim()) + " does not match map output " +
                                            std::to_string(dim));
    } else if (const auto* jb = std::get_if<tasks::JointBoxBarrier>(&t.barrier)) {
      check(t.map == MapKind::kJointIdentity, who + ": joint_box requires map 'joint_identity'");
      const bool sized = jb->lower.size() == dof && jb->upper.size() == dof;
      check(sized, who + ": joint_box bounds must have one entry per joint");
      check(jb->gain > 0.0, who + ": joint_box gain must be positive");
      if (sized) {
        check((jb->lower.array() < jb->upper.array()).all(), who + ": joint_box lower bounds must be below upper");
        if (t.safety_critical && s.initial_q.size() == dof) {
          check((s.initial_q.array() > jb->lower.array()).all() && (s.initial_q.array() < jb->upper.array()).all(),
                who + ": initial configuration must lie strictly inside the safety-critical box");
        }
      }
    }
  }

  const auto& sc = s.schedule;
  const bool smooth = sc.profile == priority::TransitionProfile::kSmoothstep;
  check(!smooth || sc.transition_window > 0.0, "schedule.transition_window must be positive");
  for (std::size_t i = 0; i < sc.segments.size(); ++i) {
    const auto& seg = sc.segments[i];
    const std::string who = "schedule.segments[" + std::to_string(i) + "]";
    check(seg.kappa > 1.0, who + ": kappa must be greater than 1");
    if (i > 0) {
      check(seg.start > sc.segments[i - 1].start, who + ": start times must be strictly increasing");
      if (smooth && i + 1 < sc.segments.size()) {
        check(sc.segments[i + 1].start >= seg.start + sc.transition_window,
              who + ": transition window overlaps the next segment");
      }
    }
    bool resolved = true;
    for (const auto& [hi, lo] : seg.order) {
      for (const auto& label : {hi, lo}) {
        if (!labels.count(label)) {
          v.push_back(who + ": undefined task label '" + label + "'");
          resolved = false;
        }
      }
    }
    if (resolved && !s.tasks.empty()) {
      priority::PriorityStack stack;
      stack.kappa = seg.kappa > 1.0 ? seg.kappa : 2.0;
      for (const auto& [hi, lo] : seg.order) {
        auto idx = [&](const std::string& l) {
          return static_cast<int>(std::find_if(s.tasks.begin(), s.tasks.end(),
                                               [&](const TaskSpec& t) { return t.label == l; }) -
                                  s.tasks.begin());
        };
        stack.order.push_back({idx(hi), idx(lo)});
      }
      try {
        stack.validate(static_cast<int>(s.tasks.size()));
      } catch (const Error& e) {
        v.push_back(who + ": " + e.what());
      }
    }
  }
  for (std::size_t i = 0; i < sc.ramps.size(); ++i) {
    const auto& r = sc.ramps[i];
    const std::string who = std::string("schedule.") +
                            (r.kind == priority::TaskRamp::Kind::kInsert ? "insertions" : "removals");
    if (!labels.count(r.task)) {
      v.push_back(who + ": undefined task label '" + r.task + "'");
    }
    check(r.duration >= 0.0, who + ": duration must be nonnegative");
    check(r.kind == priority::TaskRamp::Kind::kInsert || r.time - r.duration >= 0.0,
          who + ": removal ramp would start before t = 0");
  }

  check(s.controller.l > 0.0, "controller.l must be positive");
  check(s.controller.solver.tolerance > 0.0, "controller.tolerance must be positive");
  check(s.sim.dt > 0.0, "sim.dt must be positive");
  check(s.sim.horizon > 0.0, "sim.horizon must be positive");

  if (!v.empty()) {
    throw ValidationError(std::move(v));
  }
}

sim::SimSetup make_setup(const Scenario& s)
{
  validate_scenario(s);

  sim::SimSetup setup;
  auto robot = std::make_shared<const kin::RobotModel>(s.robot);
  std::shared_ptr<const kin::CameraModel> camera;
  if (s.camera) {
    camera = std::make_shared<const kin::CameraModel>(*s.camera);
  }
  setup.robot = robot;

  std::vector<int> safety;
  for (std::size_t i = 0; i < s.tasks.size(); ++i) {
    const auto& spec = s.tasks[i];
    kin::TaskMap map = spec.map == MapKind::kJointIdentity ? kin::TaskMap::joint_identity(robot)
                       : spec.map == MapKind::kEePosition ? kin::TaskMap::ee_position(robot)
                                                          : kin::TaskMap::image_feature(robot, camera);
    tasks::Barrier barrier = std::visit([](const auto& b) -> tasks::Barrier { return b; }, spec.barrier);
    setup.tasks.push_back({spec.label, std::move(map), std::move(barrier), spec.class_k, spec.safety_critical});
    if (spec.safety_critical) {
      safety.push_back(static_cast<int>(i));
    }
  }

  auto index_of = [&](const std::string& label) {
    return static_cast<int>(std::find_if(s.tasks.begin(), s.tasks.end(),
                                         [&](const TaskSpec& t) { return t.label == label; }) -
                            s.tasks.begin());
  };
  std::vector<priority::ScheduleSegment> segments;
  for (const auto& seg : s.schedule.segments) {
    priority::PriorityStack stack;
    stack.kappa = seg.kappa;
    stack.safety_critical = safety;
    for (const auto& [hi, lo] : seg.order) {
      stack.order.push_back({index_of(hi), index_of(lo)});
    }
    segments.push_back({seg.start, std::move(stack)});
  }
  std::vector<priority::TaskRamp> ramps;
  for (const auto& r : s.schedule.ramps) {
    ramps.push_back({index_of(r.task), r.kind, r.time, r.duration});
  }
  setup.schedule = priority::PrioritySchedule(static_cast<int>(s.tasks.size()), std::move(segments),
                                              s.schedule.transition_window, std::move(ramps), s.schedule.profile,
                                              s.schedule.blend);
  setup.controller = s.controller;
  setup.dynamics = kin::DynamicsModel::velocity_resolved();
  setup.q0 = s.initial_q;
  setup.dt = s.sim.dt;
  setup.horizon = s.sim.horizon;
  return setup;
}

sim::SimTrace run_scenario(const Scenario& s)
{
  return sim::run(make_setup(s));
}

std::filesystem::path scenario_dir()
{
  if (const char* env = std::getenv("CBF_TASKSTACK_SCENARIO_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  const std::filesystem::path source = CBF_TASKSTACK_SOURCE_SCENARIO_DIR;
  if (std::filesystem::is_directory(source)) {
    return source;
  }
  return CBF_TASKSTACK_INSTALLED_SCENARIO_DIR;
}

std::filesystem::path resolve_scenario(const std::string& name)
{
  const std::filesystem::path direct(name);
  if (std::filesystem::exists(direct)) {
    return direct;
  }
  auto bundled = scenario_dir() / direct;
  if (std::filesystem::exists(bundled)) {
    return bundled;
  }
  bundled += ".json";
  if (std::filesystem::exists(bundled)) {
    return bundled;
  }
  throw ParseError(name, "no such file or bundled scenario in " + scenario_dir().string());
}

std::vector<std::filesystem::path> list_scenarios()
{
  std::vector<std::filesystem::path> out;
  const auto dir = scenario_dir();
  if (!std::filesystem::is_directory(dir)) {
    return out;
  }
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace cbf_taskstack::scenario
