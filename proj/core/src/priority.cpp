#include "cbf_taskstack/priority.hpp"

#include "cbf_taskstack/errors.hpp"

#include <algorithm>
#include <string>

namespace cbf_taskstack::priority {

namespace {

bool contains(const std::vector<int>& v, int x)
{
  return std::find(v.begin(), v.end(), x) != v.end();
}

Eigen::MatrixXd pad_rows(const Eigen::MatrixXd& K, const Eigen::MatrixXd& longer)
{
  if (K.rows() >= longer.rows()) {
    return K;
  }
  Eigen::MatrixXd out(longer.rows(), longer.cols());
  out.topRows(K.rows()) = K;
  out.bottomRows(longer.rows() - K.rows()) =
      longer.bottomRows(longer.rows() - K.rows()).cwiseMax(0.0);
  return out;
}

}  // namespace

PriorityStack PriorityStack::chain(const std::vector<int>& tasks_high_to_low, double kappa)
{
  PriorityStack s;
  s.kappa = kappa;
  for (std::size_t i = 1; i < tasks_high_to_low.size(); ++i) {
    s.order.push_back({tasks_high_to_low[i - 1], tasks_high_to_low[i]});
  }
  return s;
}

void PriorityStack::validate(int num_tasks) const
{
  if (!(kappa > 1.0)) {
    throw ConfigError("kappa must be greater than 1, got " + std::to_string(kappa));
  }
  for (const auto& p : order) {
    if (p.higher < 0 || p.higher >= num_tasks || p.lower < 0 || p.lower >= num_tasks) {
      throw IndexOutOfRange("precedence (" + std::to_string(p.higher) + ", " + std::to_string(p.lower) +
                            ") references a task outside [0, " + std::to_string(num_tasks) + ")");
    }
  }
  for (int i : safety_critical) {
    if (i < 0 || i >= num_tasks) {
      throw IndexOutOfRange("safety-critical index " + std::to_string(i) + " out of range");
    }
  }
  if (order.size() > static_cast<std::size_t>(num_tasks) * static_cast<std::size_t>(num_tasks)) {
    throw ConfigError("more precedence pairs than M^2");
  }

  // Kahn's algorithm; self-loops count as cycles.
  std::vector<int> indegree(static_cast<std::size_t>(num_tasks), 0);
  std::vector<std::vector<int>> out(static_cast<std::size_t>(num_tasks));
  for (const auto& p : order) {
    out[static_cast<std::size_t>(p.higher)].push_back(p.lower);
    ++indegree[static_cast<std::size_t>(p.lower)];
  }
  std::vector<int> ready;
  for (int i = 0; i < num_tasks; ++i) {
    if (indegree[static_cast<std::size_t>(i)] == 0) {
      ready.push_back(i);
    }
  }
  int visited = 0;
  while (!ready.empty()) {
    const int v = ready.back();
    ready.pop_back();
    ++visited;
    for (int w : out[static_cast<std::size_t>(v)]) {
      if (--indegree[static_cast<std::size_t>(w)] == 0) {
        ready.push_back(w);
      }
    }
  }
  if (visited != num_tasks) {
    throw CyclicOrder("priority order contains a cycle");
  }
}

PrioritizationMatrix stack_to_matrix(const PriorityStack& stack, int num_tasks)
{
  stack.validate(num_tasks);
  PrioritizationMatrix out;
  for (const auto& p : stack.order) {
    if (contains(stack.safety_critical, p.higher) || contains(stack.safety_critical, p.lower)) {
      continue;
    }
    if (std::find(out.pairs.begin(), out.pairs.end(), p) != out.pairs.end()) {
      continue;
    }
    out.pairs.push_back(p);
  }
  out.K = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(out.pairs.size()), num_tasks);
  for (std::size_t r = 0; r < out.pairs.size(); ++r) {
    out.K(static_cast<Eigen::Index>(r), out.pairs[r].higher) = -1.0;
    out.K(static_cast<Eigen::Index>(r), out.pairs[r].lower) = 1.0 / stack.kappa;
  }
  return out;
}

double smoothstep(double x)
{
  if (x <= 0.0) {
    return 0.0;
  }
  if (x >= 1.0) {
    return 1.0;
  }
  return x * x * (3.0 - 2.0 * x);
}

Eigen::MatrixXd blend(const Eigen::MatrixXd& from, const Eigen::MatrixXd& to, double s)
{
  const Eigen::MatrixXd a = pad_rows(from, to);
  const Eigen::MatrixXd b = pad_rows(to, from);
  return (1.0 - s) * a + s * b;
}

Eigen::MatrixXd relaxed_blend(const Eigen::MatrixXd& from, const Eigen::MatrixXd& to, double s)
{
  const Eigen::MatrixXd a = pad_rows(from, to);
  const Eigen::MatrixXd b = pad_rows(to, from);
  return (1.0 - s) * a + s * b + 4.0 * s * (1.0 - s) * (a.cwiseAbs() + b.cwiseAbs());
}

PrioritySchedule::PrioritySchedule(int num_tasks, std::vector<ScheduleSegment> segments,
                                   double transition_window, std::vector<TaskRamp> ramps,
                                   TransitionProfile profile, BlendMode blend_mode)
  : num_tasks_(num_tasks),
    segments_(std::move(segments)),
    window_(transition_window),
    ramps_(std::move(ramps)),
    profile_(profile),
    blend_(blend_mode)
{
  if (num_tasks_ <= 0) {
    throw ConfigError("schedule needs at least one task");
  }
  if (segments_.empty()) {
    throw ConfigError("schedule needs at least one segment");
  }
  if (profile_ == TransitionProfile::kSmoothstep && !(window_ > 0.0)) {
    throw ConfigError("transition window must be positive");
  }
  for (std::size_t i = 1; i < segments_.size(); ++i) {
    if (!(segments_[i].start > segments_[i - 1].start)) {
      throw ConfigError("segment start times must be strictly increasing");
    }
    if (profile_ == TransitionProfile::kSmoothstep && i + 1 < segments_.size() &&
        segments_[i + 1].start < segments_[i].start + window_) {
      throw ConfigError("transition windows overlap at t = " + std::to_string(segments_[i + 1].start));
    }
  }
  for (const auto& seg : segments_) {
    matrices_.push_back(stack_to_matrix(seg.stack, num_tasks_));
  }
  for (const auto& r : ramps_) {
    if (r.task < 0 || r.task >= num_tasks_) {
      throw IndexOutOfRange("ramp references task " + std::to_string(r.task));
    }
    if (r.duration < 0.0) {
      throw ConfigError("ramp duration must be nonnegative");
    }
    if (r.kind == TaskRamp::Kind::kRemove && r.time - r.duration < 0.0) {
      throw ConfigError("removal ramp would start before t = 0");
    }
  }
}

PrioritySchedule PrioritySchedule::constant(int num_tasks, PriorityStack stack)
{
  return PrioritySchedule(num_tasks, {ScheduleSegment{0.0, std::move(stack)}}, 1.0);
}

std::size_t PrioritySchedule::segment_index(double t) const
{
  std::size_t i = 0;
  while (i + 1 < segments_.size() && segments_[i + 1].start <= t) {
    ++i;
  }
  return i;
}

bool PrioritySchedule::in_transition(double t) const
{
  if (profile_ != TransitionProfile::kSmoothstep) {
    return false;
  }
  const std::size_t i = segment_index(t);
  return i > 0 && t < segments_[i].start + window_;
}

PrioritizationMatrix PrioritySchedule::matrix(double t) const
{
  const std::size_t i = segment_index(t);
  if (!in_transition(t)) {
    return matrices_[i];
  }
  const double s = smoothstep((t - segments_[i].start) / window_);
  PrioritizationMatrix out;
  out.K = blend_ == BlendMode::kRelaxed ? relaxed_blend(matrices_[i - 1].K, matrices_[i].K, s)
                                       : blend(matrices_[i - 1].K, matrices_[i].K, s);
  return out;
}

std::vector<Precedence> PrioritySchedule::static_pairs(double t) const
{
  if (in_transition(t)) {
    return {};
  }
  return matrices_[segment_index(t)].pairs;
}

double PrioritySchedule::kappa_at(double t) const
{
  return segments_[segment_index(t)].stack.kappa;
}

double PrioritySchedule::gain(int task, double t) const
{
  double rho = 1.0;
  for (const auto& r : ramps_) {
    if (r.task != task) {
      continue;
    }
    if (r.kind == TaskRamp::Kind::kInsert) {
      if (t <= r.time) {
        rho *= 0.0;
      } else if (r.duration > 0.0) {
        rho *= smoothstep((t - r.time) / r.duration);
      }
    } else {
      if (t >= r.time) {
        rho *= 0.0;
      } else if (r.duration > 0.0) {
        rho *= 1.0 - smoothstep((t - (r.time - r.duration)) / r.duration);
      }
    }
  }
  return rho;
}

std::vector<double> PrioritySchedule::event_times() const
{
  std::vector<double> ev;
  for (const auto& s : segments_) {
    ev.push_back(s.start);
  }
  for (const auto& r : ramps_) {
    ev.push_back(r.kind == TaskRamp::Kind::kInsert ? r.time : r.time - r.duration);
  }
  std::sort(ev.begin(), ev.end());
  ev.erase(std::unique(ev.begin(), ev.end()), ev.end());
  return ev;
}

}  // namespace cbf_taskstack::priority
