#include "cbf_taskstack/controller.hpp"
#include "cbf_taskstack/qp.hpp"
#include "cbf_taskstack/scenario.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace cbf_taskstack;

namespace {

qp::QPProblem random_qp(std::mt19937_64& rng, int d, int m)
{
  std::normal_distribution<double> g;
  auto randn = [&](int r, int c) {
    Eigen::MatrixXd M(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) M(i, j) = g(rng);
    return M;
  };
  qp::QPProblem p;
  const Eigen::MatrixXd L = randn(d, d);
  p.H = L * L.transpose() + 0.1 * Eigen::MatrixXd::Identity(d, d);
  p.f = randn(d, 1);
  p.A = randn(m, d);
  p.b = p.A * randn(d, 1) - Eigen::VectorXd::Constant(m, 0.5);
  return p;
}

void BM_SolveQp(benchmark::State& state)
{
  std::mt19937_64 rng(1);
  std::vector<qp::QPProblem> problems;
  for (int k = 0; k < 64; ++k) {
    problems.push_back(random_qp(rng, static_cast<int>(state.range(0)), static_cast<int>(state.range(1))));
  }
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(qp::solve_qp(problems[i++ % problems.size()]));
  }
}
BENCHMARK(BM_SolveQp)->Args({5, 8})->Args({9, 12})->Args({12, 20});

void BM_ControllerStep(benchmark::State& state)
{
  const auto setup =
      scenario::make_setup(scenario::parse_scenario(scenario::resolve_scenario("paper_7dof")));
  control::Controller ctl(setup.controller);
  const double t = static_cast<double>(state.range(0));
  const kin::RobotState s{setup.q0, t};
  for (auto _ : state) {
    benchmark::DoNotOptimize(ctl.compute(setup.tasks, setup.schedule, s, setup.dynamics, t));
  }
}
// before insertion, after insertion, inside the swap window
BENCHMARK(BM_ControllerStep)->Arg(5)->Arg(15)->Arg(20)->Unit(benchmark::kMicrosecond);

void BM_Jacobian(benchmark::State& state)
{
  const auto robot = std::make_shared<const kin::RobotModel>(kin::demo_7dof());
  const auto map = kin::TaskMap::ee_position(robot);
  const kin::RobotState s{Eigen::VectorXd::LinSpaced(7, -0.5, 0.5), 0.0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(map.jacobian(s));
  }
}
BENCHMARK(BM_Jacobian);

void BM_SimulatePaperScenario(benchmark::State& state)
{
  auto sc = scenario::parse_scenario(scenario::resolve_scenario("paper_7dof"));
  sc.sim.horizon = 1.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(scenario::run_scenario(sc));
  }
}
BENCHMARK(BM_SimulatePaperScenario)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
