#include "cbf_taskstack/errors.hpp"
#include "cbf_taskstack/priority.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace cbf_taskstack;
using namespace cbf_taskstack::priority;

namespace {

Eigen::MatrixXd rows(std::initializer_list<std::initializer_list<double>> r)
{
  Eigen::MatrixXd M(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : r) {
    Eigen::Index j = 0;
    for (double v : row) M(i, j++) = v;
    ++i;
  }
  return M;
}

PriorityStack pair_with_sc(int hi, int lo, double kappa)
{
  PriorityStack s;
  s.order = {{hi, lo}};
  s.kappa = kappa;
  s.safety_critical = {0};
  return s;
}

// T2 < T3 switching to T3 < T2 at t = 10 with T1 safety-critical.
PrioritySchedule swap_schedule(BlendMode blend = BlendMode::kEntrywise,
                               TransitionProfile profile = TransitionProfile::kSmoothstep)
{
  return PrioritySchedule(3, {{0.0, pair_with_sc(1, 2, 2.0)}, {10.0, pair_with_sc(2, 1, 2.0)}}, 1.0, {}, profile,
                          blend);
}

}  // namespace

TEST(StackToMatrix, ChainOfThree)
{
  // T1 < T3 < T2
  const auto K = stack_to_matrix(PriorityStack::chain({0, 2, 1}, 2.0), 3);
  EXPECT_EQ(K.K, rows({{-1, 0, 0.5}, {0, 0.5, -1}}));
  ASSERT_EQ(K.pairs.size(), 2u);
  EXPECT_EQ(K.pairs[0], (Precedence{0, 2}));
}

TEST(StackToMatrix, EmptyOrderHasNoRows)
{
  const auto K = stack_to_matrix({}, 3);
  EXPECT_EQ(K.rows(), 0);
  EXPECT_EQ(K.K.cols(), 3);
}

TEST(StackToMatrix, SafetyCriticalPairsDropped)
{
  EXPECT_EQ(stack_to_matrix(pair_with_sc(1, 2, 2.0), 3).K, rows({{0, -1, 0.5}}));
  auto s = PriorityStack::chain({0, 1, 2}, 2.0);
  s.safety_critical = {0};
  EXPECT_EQ(stack_to_matrix(s, 3).K, rows({{0, -1, 0.5}}));
}

TEST(StackToMatrix, StaticRowStructure)
{
  const auto K = stack_to_matrix(PriorityStack::chain({3, 0, 2, 1}, 7.0), 4).K;
  for (Eigen::Index r = 0; r < K.rows(); ++r) {
    EXPECT_EQ((K.row(r).array() == -1.0).count(), 1);
    EXPECT_EQ((K.row(r).array() == 1.0 / 7.0).count(), 1);
    EXPECT_EQ((K.row(r).array() == 0.0).count(), 2);
  }
}

TEST(StackToMatrix, FeasibleSlacksRespectEveryPair)
{
  const auto stack = PriorityStack::chain({2, 0, 3, 1}, 3.0);
  const auto K = stack_to_matrix(stack, 4).K;
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int feasible = 0;
  for (int k = 0; k < 200000; ++k) {
    Eigen::Vector4d d(u(rng), u(rng), u(rng), u(rng));
    d = d.array().pow(4).matrix();  // spread across magnitudes
    if (((K * d).array() < 0.0).any()) continue;
    ++feasible;
    for (const auto& p : stack.order) {
      EXPECT_LE(d(p.higher), d(p.lower) / 3.0 + 1e-15);
    }
  }
  EXPECT_GT(feasible, 10);
}

TEST(PriorityStack, RejectsCyclesIndicesAndKappa)
{
  PriorityStack two;
  two.order = {{0, 1}, {1, 0}};
  EXPECT_THROW(two.validate(2), CyclicOrder);

  PriorityStack three;
  three.order = {{0, 1}, {1, 2}, {2, 0}};
  EXPECT_THROW(three.validate(3), CyclicOrder);
  EXPECT_THROW(stack_to_matrix(three, 3), CyclicOrder);

  PriorityStack self;
  self.order = {{1, 1}};
  EXPECT_THROW(self.validate(2), CyclicOrder);

  PriorityStack out = PriorityStack::chain({0, 5});
  EXPECT_THROW(out.validate(3), IndexOutOfRange);

  PriorityStack k = PriorityStack::chain({0, 1}, 1.0);
  EXPECT_THROW(k.validate(2), ConfigError);

  EXPECT_NO_THROW(PriorityStack::chain({3, 1, 0, 2}).validate(4));
}

TEST(Smoothstep, EndpointsAndMidpoint)
{
  EXPECT_EQ(smoothstep(0.0), 0.0);
  EXPECT_EQ(smoothstep(1.0), 1.0);
  EXPECT_EQ(smoothstep(0.5), 0.5);
  EXPECT_EQ(smoothstep(-1.0), 0.0);
  EXPECT_EQ(smoothstep(2.0), 1.0);
}

TEST(ScheduleMatrix, WindowEndpoints)
{
  const auto sched = swap_schedule();
  EXPECT_EQ(sched.matrix(10.0).K, rows({{0, -1, 0.5}}));
  EXPECT_EQ(sched.matrix(11.0).K, rows({{0, 0.5, -1}}));
  EXPECT_EQ(sched.matrix(5.0).K, rows({{0, -1, 0.5}}));
  EXPECT_EQ(sched.matrix(-1.0).K, rows({{0, -1, 0.5}}));
}

TEST(ScheduleMatrix, EntrywiseMidpoint)
{
  EXPECT_LE((swap_schedule().matrix(10.5).K - rows({{0, -0.25, -0.25}})).norm(), 1e-15);
  EXPECT_TRUE(swap_schedule().in_transition(10.5));
  EXPECT_TRUE(swap_schedule().static_pairs(10.5).empty());
  EXPECT_EQ(swap_schedule().static_pairs(12.0).size(), 1u);
}

TEST(ScheduleMatrix, SampledLipschitzBound)
{
  const auto sched = swap_schedule();
  const double dK = (rows({{0, 0.5, -1}}) - rows({{0, -1, 0.5}})).norm();
  const double dt = 1e-3;
  double worst = 0.0;
  for (double t = 9.5; t < 11.5; t += dt) {
    worst = std::max(worst, (sched.matrix(t + dt).K - sched.matrix(t).K).norm() / dt);
  }
  EXPECT_LE(worst, 1.5 * dK);
  EXPECT_GT(worst, 1.4 * dK);  // the bound is tight at the window midpoint
}

TEST(ScheduleMatrix, ContinuousAcrossAllTimes)
{
  for (auto blend : {BlendMode::kEntrywise, BlendMode::kRelaxed}) {
    const auto sched = swap_schedule(blend);
    for (double dt : {1e-3, 1e-5}) {
      double worst = 0.0;
      for (double t = 9.9; t < 11.1; t += 1e-3) {
        worst = std::max(worst, (sched.matrix(t + dt).K - sched.matrix(t).K).norm());
      }
      EXPECT_LE(worst, 10.0 * dt);
    }
  }
}

TEST(ScheduleMatrix, StepProfileJumps)
{
  const auto sched = swap_schedule(BlendMode::kEntrywise, TransitionProfile::kStep);
  EXPECT_EQ(sched.matrix(10.0 - 1e-9).K, rows({{0, -1, 0.5}}));
  EXPECT_EQ(sched.matrix(10.0).K, rows({{0, 0.5, -1}}));
  EXPECT_FALSE(sched.in_transition(10.0));
}

TEST(ScheduleMatrix, RelaxedBlendKeepsEveryRowSatisfiable)
{
  for (double kappa : {2.0, 10.0, 100.0}) {
    const PrioritySchedule sched(3, {{0.0, pair_with_sc(1, 2, kappa)}, {1.0, pair_with_sc(2, 1, kappa)}}, 1.0, {},
                                 TransitionProfile::kSmoothstep, BlendMode::kRelaxed);
    EXPECT_EQ(sched.matrix(1.0).K, sched.matrix(0.5).K);
    for (double t = 0.0; t <= 2.0; t += 1e-3) {
      const auto K = sched.matrix(t).K;
      for (Eigen::Index r = 0; r < K.rows(); ++r) {
        EXPECT_GE(K.row(r).maxCoeff(), 1.0 / kappa - 1e-12) << "kappa " << kappa << " t " << t;
      }
    }
  }
}

TEST(ScheduleMatrix, PhantomRowsPadDifferentRowCounts)
{
  // no rows -> one row: the missing row fades in from its nonnegative part
  const PrioritySchedule sched(3, {{0.0, PriorityStack{}}, {1.0, PriorityStack::chain({0, 1}, 2.0)}}, 1.0);
  EXPECT_EQ(sched.matrix(0.5).rows(), 0);
  EXPECT_EQ(sched.matrix(1.0).K, rows({{0, 0.5, 0}}));
  EXPECT_LE((sched.matrix(1.5).K - rows({{-0.5, 0.5, 0}})).norm(), 1e-15);
  EXPECT_EQ(sched.matrix(2.0).K, rows({{-1, 0.5, 0}}));
}

TEST(ScheduleMatrix, RejectsBadSchedules)
{
  EXPECT_THROW(PrioritySchedule(3, {{1.0, {}}, {1.0, {}}}, 0.5), ConfigError);
  EXPECT_THROW(PrioritySchedule(3, {{0.0, {}}, {1.0, {}}, {2.0, {}}}, 1.5), ConfigError);  // windows overlap
  EXPECT_THROW(PrioritySchedule(3, {{0.0, {}}}, 0.0), ConfigError);
  EXPECT_THROW(PrioritySchedule(2, {{0.0, PriorityStack::chain({0, 2})}}, 1.0), IndexOutOfRange);
}

TEST(InsertionGain, Examples)
{
  const PrioritySchedule sched(2, {{0.0, {}}}, 1.0, {{1, TaskRamp::Kind::kInsert, 10.0, 2.0}});
  EXPECT_EQ(insertion_gain(sched, 1, 0.0), 0.0);
  EXPECT_EQ(insertion_gain(sched, 1, 10.0), 0.0);
  EXPECT_EQ(insertion_gain(sched, 1, 11.0), 0.5);
  EXPECT_EQ(insertion_gain(sched, 1, 12.0), 1.0);
  EXPECT_EQ(insertion_gain(sched, 1, 50.0), 1.0);
  EXPECT_EQ(insertion_gain(sched, 0, 10.0), 1.0);  // no ramp registered
}

TEST(InsertionGain, MonotoneAndContinuous)
{
  const PrioritySchedule sched(2, {{0.0, {}}}, 1.0,
                               {{0, TaskRamp::Kind::kInsert, 1.0, 1.0}, {1, TaskRamp::Kind::kRemove, 5.0, 1.0}});
  double prev_in = 0.0, prev_out = 1.0;
  for (double t = 0.0; t <= 6.0; t += 1e-3) {
    const double in = sched.gain(0, t), out = sched.gain(1, t);
    EXPECT_GE(in, prev_in);
    EXPECT_LE(out, prev_out);
    EXPECT_LE(std::abs(in - prev_in), 1.5e-3 + 1e-12);
    EXPECT_LE(std::abs(out - prev_out), 1.5e-3 + 1e-12);
    prev_in = in;
    prev_out = out;
  }
  EXPECT_EQ(sched.gain(1, 4.0), 1.0);
  EXPECT_EQ(sched.gain(1, 4.5), 0.5);
  EXPECT_EQ(sched.gain(1, 5.0), 0.0);
  EXPECT_EQ(sched.gain(1, 6.0), 0.0);
}

TEST(InsertionGain, ZeroDurationIsAStep)
{
  const PrioritySchedule sched(1, {{0.0, {}}}, 1.0, {{0, TaskRamp::Kind::kInsert, 2.0, 0.0}});
  EXPECT_EQ(sched.gain(0, 2.0), 0.0);
  EXPECT_EQ(sched.gain(0, 2.0 + 1e-12), 1.0);
}

TEST(Schedule, EventTimes)
{
  const PrioritySchedule sched(3, {{0.0, {}}, {10.0, PriorityStack::chain({1, 2})}, {20.0, PriorityStack::chain({2, 1})}},
                               1.0, {{1, TaskRamp::Kind::kInsert, 0.0, 1.0}, {2, TaskRamp::Kind::kInsert, 10.0, 1.0}});
  EXPECT_EQ(sched.event_times(), (std::vector<double>{0.0, 10.0, 20.0}));
  EXPECT_EQ(sched.kappa_at(15.0), 10.0);
}
