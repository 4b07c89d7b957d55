#include <benchmark/benchmark.h>

#include <random>

#include "sctd/harness.hpp"
#include "sctd/losses.hpp"
#include "sctd/solver.hpp"

namespace {

using namespace sctd;

ScoreModel default_score_model() {
  return ScoreModel{NoiseSchedule(0.002, 0.998), default_prior()};
}

Vec point(double x, double y) {
  Vec v(2);
  v << x, y;
  return v;
}

void BM_Epsilon(benchmark::State& state) {
  const ScoreModel model = default_score_model();
  const Condition y = Condition::prompt("upper");
  const Vec z = point(0.7, -1.2);
  for (auto _ : state) benchmark::DoNotOptimize(model.epsilon(z, 0.4, y));
}
BENCHMARK(BM_Epsilon);

void BM_EpsilonWithJacobian(benchmark::State& state) {
  const ScoreModel model = default_score_model();
  const Condition y = Condition::prompt("upper");
  const Vec z = point(0.7, -1.2);
  for (auto _ : state) benchmark::DoNotOptimize(model.epsilon_with_jacobian(z, 0.4, y));
}
BENCHMARK(BM_EpsilonWithJacobian);

// Reference integrator across one span; cost is linear in the step count.
void BM_ReferenceSolve(benchmark::State& state) {
  const ScoreModel model = default_score_model();
  const Condition y = Condition::prompt("upper");
  const Vec z = point(0.7, -1.2);
  const int steps = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(reference_solve(model, z, 0.9, 0.1, y, steps));
  state.SetComplexityN(steps);
}
BENCHMARK(BM_ReferenceSolve)->RangeMultiplier(4)->Range(16, 1024)->Complexity(benchmark::oN);

void BM_Loss(benchmark::State& state) {
  const ScoreModel model = default_score_model();
  const Segmentation seg = Segmentation::build(SegmentationStrategy::kEqual, 5, 1.0, 0.0);
  const Condition y = Condition::prompt("upper");
  LossConfig cfg;
  cfg.kind = static_cast<LossKind>(state.range(0));
  state.SetLabel(std::string(to_string(cfg.kind)));
  const Vec z0 = point(-2.5, 2.0), eps = point(0.3, -0.8);
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate_loss(model, z0, 0.55, 0.45, 0.1, eps, seg, y, cfg));
  }
}
BENCHMARK(BM_Loss)->DenseRange(0, 3);

// Full optimizer iterations: every view rendered, diffused, scored and pulled back.
void BM_DistillIterations(benchmark::State& state) {
  RunConfig cfg;
  cfg.loss.kind = static_cast<LossKind>(state.range(0));
  cfg.optimizer.iterations = 50;
  state.SetLabel(std::string(to_string(cfg.loss.kind)));
  for (auto _ : state) benchmark::DoNotOptimize(distill(cfg));
  state.SetItemsProcessed(state.iterations() * cfg.optimizer.iterations);
}
BENCHMARK(BM_DistillIterations)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
