#pragma once

#include <Eigen/Dense>

#include <utility>
#include <vector>

namespace cbf_taskstack::priority {

/// T_higher precedes T_lower: delta_higher <= delta_lower / kappa.
struct Precedence
{
  int higher = 0;
  int lower = 0;

  bool operator==(const Precedence&) const = default;
};

struct PriorityStack
{
  std::vector<Precedence> order;
  double kappa = 10.0;
  /// Tasks whose slack is eliminated; pairs touching them produce no row.
  std::vector<int> safety_critical;

  /// Pairs for a total order, highest priority first.
  static PriorityStack chain(const std::vector<int>& tasks_high_to_low, double kappa = 10.0);

  /// Throws CyclicOrder, IndexOutOfRange, ConfigError.
  void validate(int num_tasks) const;

  bool operator==(const PriorityStack&) const = default;
};

/// Rows of K encode K * delta >= 0.
struct PrioritizationMatrix
{
  Eigen::MatrixXd K;
  /// Pair each row came from; empty for blended rows.
  std::vector<Precedence> pairs;

  Eigen::Index rows() const { return K.rows(); }
};

PrioritizationMatrix stack_to_matrix(const PriorityStack& stack, int num_tasks);

double smoothstep(double x);

/// Linear-in-s blend of two matrices. When row counts differ, the shorter
/// matrix is padded with the longer one's rows with negative entries zeroed,
/// which are trivially satisfied for nonnegative slacks.
Eigen::MatrixXd blend(const Eigen::MatrixXd& from, const Eigen::MatrixXd& to, double s);

/// blend() plus the bump 4 s (1 - s) (|from| + |to|). Every row keeps a
/// positive entry across the window, so some positive slack vector always
/// satisfies K delta >= 0 (the entrywise blend of a swapped pair does not).
Eigen::MatrixXd relaxed_blend(const Eigen::MatrixXd& from, const Eigen::MatrixXd& to, double s);

struct ScheduleSegment
{
  double start = 0.0;
  PriorityStack stack;

  bool operator==(const ScheduleSegment&) const = default;
};

struct TaskRamp
{
  enum class Kind { kInsert, kRemove };
  int task = 0;
  Kind kind = Kind::kInsert;
  /// t_ins for insertions, t_rem for removals.
  double time = 0.0;
  /// Ramp length; 0 gives a step.
  double duration = 1.0;

  bool operator==(const TaskRamp&) const = default;
};

enum class TransitionProfile { kSmoothstep, kStep };

/// How K is interpolated inside a smoothstep window.
enum class BlendMode { kEntrywise, kRelaxed };

/**
 * Piecewise-constant priority stacks joined by smooth transitions, plus
 * insertion/removal ramps. K(t) is C^1 in t with the smoothstep profile.
 * The step profile switches K instantaneously and exists as a comparison
 * baseline.
 */
class PrioritySchedule
{
public:
  PrioritySchedule() = default;
  /// Throws CyclicOrder, IndexOutOfRange, ConfigError.
  PrioritySchedule(int num_tasks, std::vector<ScheduleSegment> segments, double transition_window,
                   std::vector<TaskRamp> ramps = {},
                   TransitionProfile profile = TransitionProfile::kSmoothstep,
                   BlendMode blend = BlendMode::kEntrywise);

  /// Single stack, no transitions.
  static PrioritySchedule constant(int num_tasks, PriorityStack stack);

  PrioritizationMatrix matrix(double t) const;
  double gain(int task, double t) const;

  /// True inside [start, start + window) of any segment after the first.
  bool in_transition(double t) const;
  /// Pairs with a row in K at t, or empty while a transition is in progress.
  std::vector<Precedence> static_pairs(double t) const;
  double kappa_at(double t) const;
  /// Segment starts and ramp starts, ascending.
  std::vector<double> event_times() const;

  int num_tasks() const { return num_tasks_; }
  const std::vector<ScheduleSegment>& segments() const { return segments_; }
  const std::vector<TaskRamp>& ramps() const { return ramps_; }
  double transition_window() const { return window_; }
  TransitionProfile profile() const { return profile_; }
  BlendMode blend_mode() const { return blend_; }

private:
  std::size_t segment_index(double t) const;

  int num_tasks_ = 0;
  std::vector<ScheduleSegment> segments_;
  std::vector<PrioritizationMatrix> matrices_;
  double window_ = 1.0;
  std::vector<TaskRamp> ramps_;
  TransitionProfile profile_ = TransitionProfile::kSmoothstep;
  BlendMode blend_ = BlendMode::kEntrywise;
};

inline PrioritizationMatrix schedule_matrix(const PrioritySchedule& sched, double t)
{
  return sched.matrix(t);
}

/// rho(t) in [0, 1]; 1 for tasks without a ramp.
inline double insertion_gain(const PrioritySchedule& sched, int task, double t)
{
  return sched.gain(task, t);
}

}  // namespace cbf_taskstack::priority
