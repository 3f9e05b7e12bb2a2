#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "lyapnet/certify.hpp"
#include "lyapnet/dynamics.hpp"
#include "lyapnet/lyapunov_net.hpp"
#include "lyapnet/network.hpp"
#include "lyapnet/risk.hpp"
#include "lyapnet/rng.hpp"
#include "lyapnet/roa.hpp"

namespace {

using namespace lyapnet;

LyapunovNet bench_model(int dim, int width) {
  return make_lyapunov_net({dim, width, width, 1}, Activation::kTanh, 0.5,
                           Eigen::VectorXd::Zero(dim), 7, Psi::kSquare,
                           Augmentation::kSqNorm);
}

Eigen::VectorXd random_point(int dim, Rng& rng) {
  Eigen::VectorXd x(dim);
  for (int i = 0; i < dim; ++i) x[i] = rng.uniform(-1.0, 1.0);
  return x;
}

void bm_forward_value(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  const int width = static_cast<int>(state.range(1));
  const Network net = xavier_init({dim, width, width, 1}, Activation::kTanh, 7);
  NetWorkspace ws(net);
  Rng rng(1);
  const Eigen::VectorXd x = random_point(dim, rng);
  for (auto _ : state) benchmark::DoNotOptimize(forward_value_ws(net, x, ws));
}
BENCHMARK(bm_forward_value)->Args({2, 10})->Args({10, 20})->Args({30, 20});

void bm_forward_joint(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  const int width = static_cast<int>(state.range(1));
  const Network net = xavier_init({dim, width, width, 1}, Activation::kTanh, 7);
  NetWorkspace ws(net);
  Rng rng(1);
  const Eigen::VectorXd x = random_point(dim, rng);
  for (auto _ : state) {
    const JointEval ev = forward_joint_ws(net, x, ws);
    benchmark::DoNotOptimize(ev.value);
  }
}
BENCHMARK(bm_forward_joint)->Args({2, 10})->Args({10, 20})->Args({30, 20});

void bm_param_grad(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  const int width = static_cast<int>(state.range(1));
  const Network net = xavier_init({dim, width, width, 1}, Activation::kTanh, 7);
  GradAccumulator acc(net);
  Rng rng(1);
  const Eigen::VectorXd x = random_point(dim, rng);
  const Eigen::VectorXd wg = random_point(dim, rng);
  for (auto _ : state) {
    acc.add(x, 1.0, wg);
    benchmark::DoNotOptimize(acc);
  }
}
BENCHMARK(bm_param_grad)->Args({2, 10})->Args({10, 20})->Args({30, 20});

void bm_risk_eval(benchmark::State& state) {
  const long n = state.range(0);
  const DynamicalSystem sys = normalize(curve_tracking());
  const LyapunovNet model = bench_model(2, 10);
  const SampleSet samples = sample_uniform(sys.domain, n, 0.0, sys.equilibrium, 3);
  const RiskConfig rc;
  for (auto _ : state) benchmark::DoNotOptimize(risk_ln(model, sys, samples, rc).value);
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(bm_risk_eval)->Arg(1000)->Arg(10000);

void bm_risk_grad(benchmark::State& state) {
  const long n = state.range(0);
  const DynamicalSystem sys = normalize(curve_tracking());
  const LyapunovNet model = bench_model(2, 10);
  const SampleSet samples = sample_uniform(sys.domain, n, 0.0, sys.equilibrium, 3);
  const RiskConfig rc;
  Eigen::VectorXd grad;
  for (auto _ : state) benchmark::DoNotOptimize(risk_ln_grad(model, sys, samples, rc, grad).value);
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(bm_risk_grad)->Arg(1000)->Arg(10000);

void bm_grid_scan(benchmark::State& state) {
  // c = 0.02 gives a ~72k-point planar grid; the visitor mirrors the
  // certification residual evaluation.
  const CertGrid grid = build_grid(2, 0.1, 0.02, 1e6);
  const DynamicalSystem sys = linear_system(2, 1.0);
  const LyapunovNet model = bench_model(2, 10);
  LyapWorkspace ws(model);
  ws.refresh_star(model);
  Eigen::VectorXd f(2);
  for (auto _ : state) {
    double worst = -1e300;
    for_each_grid_point(grid, [&](const Eigen::VectorXd& x) {
      sys.eval(x, f);
      const LyapEval ev = lyap_eval_ws(model, x, ws);
      worst = std::max(worst, ev.grad.dot(f) + 0.05 * x.norm());
    });
    benchmark::DoNotOptimize(worst);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(grid.count));
}
BENCHMARK(bm_grid_scan);

void bm_rk4_integrate(benchmark::State& state) {
  const DynamicalSystem sys = normalize(curve_tracking());
  Eigen::VectorXd x0(2);
  x0 << 0.4, -0.3;
  for (auto _ : state) {
    const Trajectory tr = rk4_integrate(sys, x0, 0.01, 1.0, 0.0);
    benchmark::DoNotOptimize(tr.states.back());
  }
  state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(bm_rk4_integrate);

}  // namespace

BENCHMARK_MAIN();
