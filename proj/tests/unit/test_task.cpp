#include "cbf_taskstack/controller.hpp"
#include "cbf_taskstack/errors.hpp"
#include "cbf_taskstack/task.hpp"

#include "support/oracles.hpp"

#include <gtest/gtest.h>

using namespace cbf_taskstack;
using kin::RobotState;
using tasks::BarrierTask;

namespace {

std::shared_ptr<const kin::RobotModel> planar(std::vector<double> lengths)
{
  return std::make_shared<const kin::RobotModel>(kin::planar_arm(lengths));
}

BarrierTask make_task(std::string label, kin::TaskMap map, tasks::Barrier barrier, bool sc = false,
                      tasks::ClassKSpec gamma = {})
{
  return {std::move(label), std::move(map), std::move(barrier), gamma, sc};
}

// sigma_0(t) = (t, 0)
tasks::Reference moving_x()
{
  Eigen::MatrixXd c(2, 2);
  c << 0.0, 1.0, 0.0, 0.0;
  return tasks::Reference({{0.0, c}});
}

Eigen::MatrixXd planar_jacobian(const std::vector<double>& L, const Eigen::VectorXd& q)
{
  // rows x, y, z of the planar chain, written out directly
  const auto n = static_cast<Eigen::Index>(L.size());
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(3, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double angle = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      angle += q(i);
      if (i >= j) {
        J(0, j) -= L[static_cast<std::size_t>(i)] * std::sin(angle);
        J(1, j) += L[static_cast<std::size_t>(i)] * std::cos(angle);
      }
    }
  }
  return J;
}

}  // namespace

TEST(ClassK, Examples)
{
  EXPECT_EQ(tasks::class_k({tasks::ClassKSpec::Kind::kLinear, 2.0}, 0.0), 0.0);
  EXPECT_EQ(tasks::class_k({tasks::ClassKSpec::Kind::kLinear, 2.0}, -0.5), -1.0);
  EXPECT_EQ(tasks::class_k({tasks::ClassKSpec::Kind::kCubic, 1.0}, 2.0), 8.0);
}

TEST(ClassK, OddAndStrictlyIncreasing)
{
  for (auto kind : {tasks::ClassKSpec::Kind::kLinear, tasks::ClassKSpec::Kind::kCubic}) {
    const tasks::ClassKSpec spec{kind, 1.7};
    double prev = -std::numeric_limits<double>::infinity();
    for (double h = -3.0; h <= 3.0; h += 0.01) {
      const double g = tasks::class_k(spec, h);
      EXPECT_GT(g, prev);
      EXPECT_DOUBLE_EQ(g, -tasks::class_k(spec, -h));
      prev = g;
    }
  }
}

TEST(EvalBarrier, SetpointOnTarget)
{
  const auto task = make_task("s", kin::TaskMap::joint_identity(planar({1, 1})),
                              tasks::SetpointBarrier{Eigen::Vector2d(0.3, -0.2), 3.0});
  const auto v = tasks::eval_barrier(task, {Eigen::Vector2d(0.3, -0.2), 0.0}, 0.0);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].h, 0.0);
  EXPECT_EQ(v[0].dh_dsigma.norm(), 0.0);
  EXPECT_EQ(v[0].dh_dt, 0.0);
}

TEST(EvalBarrier, SetpointOffTarget)
{
  const auto task = make_task("s", kin::TaskMap::joint_identity(planar({1, 1})),
                              tasks::SetpointBarrier{Eigen::Vector2d(0.0, 0.0), 3.0});
  const auto v = tasks::eval_barrier_at(task, Eigen::Vector2d(1.0, 2.0), 0.0);
  EXPECT_DOUBLE_EQ(v[0].h, -15.0);
  EXPECT_LE((v[0].dh_dsigma - Eigen::RowVector2d(-6.0, -12.0)).norm(), 1e-15);
}

TEST(EvalBarrier, TrackingExample)
{
  const auto task = make_task("t", kin::TaskMap::joint_identity(planar({1, 1})), tasks::TrackingBarrier{moving_x()});
  const auto v = tasks::eval_barrier_at(task, Eigen::Vector2d(1.0, 0.0), 0.0);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_DOUBLE_EQ(v[0].h, -0.5);
  EXPECT_LE((v[0].dh_dsigma - Eigen::RowVector2d(-1.0, 0.0)).norm(), 1e-15);
  EXPECT_DOUBLE_EQ(v[0].dh_dt, 1.0);

  // dh/dt against a central difference in t
  const double e = 1e-6;
  const double fd = (tasks::eval_barrier_at(task, Eigen::Vector2d(1.0, 0.0), e)[0].h -
                     tasks::eval_barrier_at(task, Eigen::Vector2d(1.0, 0.0), -e)[0].h) /
                    (2 * e);
  EXPECT_NEAR(fd, 1.0, 1e-8);
}

TEST(EvalBarrier, JointBoxBoundaryAndMidpoint)
{
  const Eigen::Vector2d lo(-1.0, 0.0), hi(1.0, 3.0);
  const auto task =
      make_task("q", kin::TaskMap::joint_identity(planar({1, 1})), tasks::JointBoxBarrier{lo, hi, 2.0}, true);
  const auto at_lower = tasks::eval_barrier_at(task, lo, 0.0);
  ASSERT_EQ(at_lower.size(), 2u);
  EXPECT_EQ(at_lower[0].h, 0.0);
  EXPECT_EQ(at_lower[1].h, 0.0);

  const auto mid = tasks::eval_barrier_at(task, 0.5 * (lo + hi), 0.0);
  EXPECT_DOUBLE_EQ(mid[0].h, 2.0 * 1.0);
  EXPECT_DOUBLE_EQ(mid[1].h, 2.0 * 1.5 * 1.5);
  EXPECT_EQ(mid[0].dh_dsigma.norm(), 0.0);
}

TEST(EvalBarrier, JointBoxMinAggregation)
{
  const auto robot = planar({1, 1});
  const auto task = make_task("q", kin::TaskMap::joint_identity(robot),
                              tasks::JointBoxBarrier{Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, 1), 1.0}, true);
  const RobotState s{Eigen::Vector2d(0.1, 0.9), 0.0};
  const auto all = tasks::eval_barrier(task, s, 0.0);
  const auto m = tasks::eval_barrier_min(task, s, 0.0);
  EXPECT_DOUBLE_EQ(m.h, std::min(all[0].h, all[1].h));
  EXPECT_DOUBLE_EQ(m.h, (1 - 0.9) * (0.9 + 1));
  EXPECT_EQ(m.dh_dsigma, all[1].dh_dsigma);
}

TEST(EvalBarrier, GradientMatchesFiniteDifferences)
{
  const auto robot = planar({1, 1, 1});
  std::vector<BarrierTask> list = {
      make_task("s", kin::TaskMap::joint_identity(robot),
                tasks::SetpointBarrier{Eigen::Vector3d(0.2, -0.4, 1.0), 1.7}),
      make_task("t", kin::TaskMap::joint_identity(robot), tasks::TrackingBarrier{tasks::Reference::constant(
                                                              Eigen::Vector3d(0.5, 0.1, -0.3))}),
      make_task("q", kin::TaskMap::joint_identity(robot),
                tasks::JointBoxBarrier{Eigen::Vector3d::Constant(-2), Eigen::Vector3d::Constant(1.5), 0.7}),
  };
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (const auto& task : list) {
    for (int k = 0; k < 50; ++k) {
      const Eigen::Vector3d sigma(u(rng), u(rng), u(rng));
      const auto v = tasks::eval_barrier_at(task, sigma, 0.3);
      for (std::size_t r = 0; r < v.size(); ++r) {
        Eigen::RowVector3d fd;
        for (int i = 0; i < 3; ++i) {
          Eigen::Vector3d sp = sigma, sm = sigma;
          sp(i) += 1e-6;
          sm(i) -= 1e-6;
          fd(i) = (tasks::eval_barrier_at(task, sp, 0.3)[r].h - tasks::eval_barrier_at(task, sm, 0.3)[r].h) / 2e-6;
        }
        EXPECT_LE((fd - v[r].dh_dsigma).lpNorm<Eigen::Infinity>(), 1e-5) << task.label;
      }
    }
  }
}

TEST(EvalBarrier, JointBoxZeroSuperlevelSetIsTheBox)
{
  const auto task = make_task("q", kin::TaskMap::joint_identity(planar({1})),
                              tasks::JointBoxBarrier{Eigen::VectorXd::Constant(1, -0.7),
                                                     Eigen::VectorXd::Constant(1, 1.3), 5.0},
                              true);
  for (double z = -2.0; z <= 2.0; z += 0.001) {
    const bool inside = z >= -0.7 && z <= 1.3;
    EXPECT_EQ(tasks::eval_barrier_at(task, Eigen::VectorXd::Constant(1, z), 0)[0].h >= 0.0, inside) << z;
  }
}

TEST(EvalBarrier, BehindCameraPropagates)
{
  const auto robot = std::make_shared<const kin::RobotModel>(kin::demo_7dof());
  kin::CameraModel cam;
  cam.target_point = kin::forward_kinematics(*robot, Eigen::VectorXd::Zero(7)).position;
  const auto task =
      make_task("v", kin::TaskMap::image_feature(robot, std::make_shared<const kin::CameraModel>(cam)),
                tasks::SetpointBarrier{Eigen::Vector2d(320, 240), 1.0});
  EXPECT_THROW(tasks::eval_barrier(task, {Eigen::VectorXd::Zero(7), 0.0}, 0.0), BehindCamera);
}

TEST(BarrierTask, ValidateRejectsBadDimensions)
{
  const auto task = make_task("s", kin::TaskMap::joint_identity(planar({1, 1})),
                              tasks::SetpointBarrier{Eigen::Vector3d::Zero(), 1.0});
  EXPECT_THROW(task.validate(), ConfigError);
  const auto gain = make_task("s", kin::TaskMap::joint_identity(planar({1, 1})),
                              tasks::SetpointBarrier{Eigen::Vector2d::Zero(), -1.0});
  EXPECT_THROW(gain.validate(), ConfigError);
  const auto alpha = make_task("s", kin::TaskMap::joint_identity(planar({1, 1})),
                               tasks::SetpointBarrier{Eigen::Vector2d::Zero(), 1.0}, false,
                               {tasks::ClassKSpec::Kind::kLinear, 0.0});
  EXPECT_THROW(alpha.validate(), ConfigError);
}

TEST(Reference, PiecewisePolynomialValueAndRate)
{
  Eigen::MatrixXd c0(1, 3), c1(1, 2);
  c0 << 1.0, 2.0, 3.0;  // 1 + 2t + 3t^2
  c1 << 0.0, -1.0;      // -(t - 2)
  const tasks::Reference ref({{0.0, c0}, {2.0, c1}});
  EXPECT_DOUBLE_EQ(ref.value(1.0)(0), 6.0);
  EXPECT_DOUBLE_EQ(ref.rate(1.0)(0), 8.0);
  EXPECT_DOUBLE_EQ(ref.value(3.0)(0), -1.0);
  EXPECT_DOUBLE_EQ(ref.rate(3.0)(0), -1.0);
  EXPECT_DOUBLE_EQ(ref.value(-1.0)(0), 1.0 - 2.0 + 3.0);  // first segment extends backwards
}

TEST(ConstraintRow, SetpointAtTargetIsTrivial)
{
  const auto task = make_task("s", kin::TaskMap::joint_identity(planar({1, 1})),
                              tasks::SetpointBarrier{Eigen::Vector2d(0.3, 0.1), 1.0});
  const auto rows = tasks::build_constraint_rows(task, {Eigen::Vector2d(0.3, 0.1), 0.0},
                                                 kin::DynamicsModel::velocity_resolved(), 0.0);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].a.norm(), 0.0);
  EXPECT_EQ(rows[0].beta, 0.0);
}

TEST(ConstraintRow, TrackingRowStructureOnTwoLinkArm)
{
  // h = -1/2 |e|^2, e = sigma - sigma_0: the row is -e'J u >= -e' sigma_0_dot - gamma(h)
  const std::vector<double> L = {1.0, 0.7};
  const auto robot = planar(L);
  Eigen::MatrixXd c(3, 2);
  c << 0.9, 0.2, 0.8, -0.1, 0.0, 0.0;
  const tasks::Reference ref({{0.0, c}});
  const tasks::ClassKSpec gamma{tasks::ClassKSpec::Kind::kLinear, 1.3};
  const auto task = make_task("t", kin::TaskMap::ee_position(robot), tasks::TrackingBarrier{ref}, false, gamma);

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int k = 0; k < 20; ++k) {
    const Eigen::Vector2d q(u(rng), u(rng));
    const double t = 0.5 + 0.1 * k;
    const Eigen::Vector3d e = oracle::planar_position(L, q) - ref.value(t);
    const Eigen::MatrixXd J = planar_jacobian(L, q);
    const auto rows = tasks::build_constraint_rows(task, {q, t}, kin::DynamicsModel::velocity_resolved(), t);
    ASSERT_EQ(rows.size(), 1u);
    const Eigen::VectorXd a = -(e.transpose() * J).transpose();
    const double beta = -e.dot(ref.rate(t)) + 1.3 * 0.5 * e.squaredNorm();
    EXPECT_LE((rows[0].a - a).norm(), 1e-12);
    EXPECT_NEAR(rows[0].beta, beta, 1e-12);
  }
}

TEST(ConstraintRow, DriftAndInputMapEnter)
{
  const auto robot = planar({1, 1});
  const auto task = make_task("s", kin::TaskMap::joint_identity(robot),
                              tasks::SetpointBarrier{Eigen::Vector2d::Zero(), 1.0});
  kin::DynamicsModel dyn;
  dyn.drift = [](const Eigen::VectorXd&) { return Eigen::Vector2d(0.5, -1.0).eval(); };
  dyn.input_map = [](const Eigen::VectorXd&) { return Eigen::MatrixXd(2.0 * Eigen::MatrixXd::Identity(2, 2)); };
  const Eigen::Vector2d q(1.0, 1.0);
  const auto rows = tasks::build_constraint_rows(task, {q, 0.0}, dyn, 0.0);
  const Eigen::RowVector2d dh(-2.0, -2.0);
  EXPECT_LE((rows[0].a.transpose() - 2.0 * dh).norm(), 1e-15);
  EXPECT_DOUBLE_EQ(rows[0].beta, -dh.dot(Eigen::Vector2d(0.5, -1.0)) - (-2.0));
}

TEST(ConstraintRow, LinearInInput)
{
  const auto robot = std::make_shared<const kin::RobotModel>(kin::demo_7dof());
  const auto task = make_task("p", kin::TaskMap::ee_position(robot),
                              tasks::SetpointBarrier{Eigen::Vector3d(0.3, 0.2, 0.5), 2.0});
  const RobotState s{Eigen::VectorXd::LinSpaced(7, -0.5, 0.5), 0.0};
  const auto row = tasks::build_constraint_rows(task, s, kin::DynamicsModel::velocity_resolved(), 0.0)[0];
  std::mt19937_64 rng(10);
  std::normal_distribution<double> g;
  for (int k = 0; k < 20; ++k) {
    Eigen::VectorXd u(7);
    for (int i = 0; i < 7; ++i) u(i) = g(rng);
    EXPECT_EQ(row.a.dot(2.0 * u), 2.0 * row.a.dot(u));
  }
}

TEST(ConstraintRow, DiscreteCbfInequalityAlongClosedLoop)
{
  // single slacked setpoint task; h(t + dt) - h(t) >= (-gamma(h) - delta) dt - eps
  const std::vector<double> L = {1.0, 0.8, 0.6};
  const auto robot = planar(L);
  const tasks::ClassKSpec gamma{tasks::ClassKSpec::Kind::kLinear, 1.0};
  const std::vector<BarrierTask> list = {make_task("p", kin::TaskMap::ee_position(robot),
                                                   tasks::SetpointBarrier{Eigen::Vector3d(1.0, 1.2, 0.0), 1.0},
                                                   false, gamma)};
  const auto sched = priority::PrioritySchedule::constant(1, {});
  const auto dyn = kin::DynamicsModel::velocity_resolved();
  // Euler truncation is about dt * |h''| / 2; far from the target |h''| ~ 2.3,
  // which already costs 1.15e-3 at dt = 1 ms
  const double dt = 2.5e-4;
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int k = 0; k < 100; ++k) {
    RobotState s{Eigen::Vector3d(u(rng), u(rng), u(rng)), 0.0};
    for (int i = 0; i < 20; ++i) {
      const auto out = control::compute_control(list, sched, s, dyn, s.t, {});
      const double h0 = tasks::eval_barrier(list[0], s, s.t)[0].h;
      s.q += out.u_star * dt;
      s.t += dt;
      const double h1 = tasks::eval_barrier(list[0], s, s.t)[0].h;
      EXPECT_GE((h1 - h0) / dt, -tasks::class_k(gamma, h0) - out.delta_star(0) - 1e-3) << k << "," << i;
    }
  }
}
