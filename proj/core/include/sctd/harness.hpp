#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sctd/consistency.hpp"
#include "sctd/losses.hpp"
#include "sctd/metrics.hpp"
#include "sctd/optimizer.hpp"
#include "sctd/prior.hpp"
#include "sctd/scene.hpp"
#include "sctd/schedule.hpp"

namespace sctd {

struct ScheduleConfig {
  double t_min = 0.002;
  double t_max = 0.998;
  double horizon = 1.0;
  ScheduleKind kind = ScheduleKind::kCosine;
  NoiseCoeffForm coeff_form = NoiseCoeffForm::kRatio;

  NoiseSchedule build() const { return NoiseSchedule(t_min, t_max, horizon, kind); }
};

struct SegmentationConfig {
  SegmentationStrategy strategy = SegmentationStrategy::kEqual;
  int count = 5;
  // Length of the first segment for the increasing strategy (schedule time units).
  double t_tau = 0.1;

  Segmentation build(double horizon) const {
    return Segmentation::build(strategy, count, horizon, t_tau);
  }
};

struct SceneConfig {
  int points = 8;
  int dimension = 2;
  int views = 16;
  bool transform_prior = true;
  // theta_k ~ center + spread * N(0, I); center defaults to the unconditional prior mean.
  double init_spread = 1.5;
  std::optional<Vec> init_center;
  // When non-empty, replaces the random draw (exactly `points` entries).
  std::vector<Vec> initial_points;
};

struct OptimizerConfig {
  std::int64_t iterations = 2000;
  // beta2 is shorter than the usual 0.999: the cross-consistency gradient is heavy tailed
  // (it grows like 1/noise_coeff(t, s_m) as t approaches an edge) and a long second-moment
  // memory stalls the affected coordinates after a single spike.
  AdamOptions adam{0.05, 0.9, 0.99, 1e-8};
};

// Two well separated pairs of narrow components; "upper" and "lower" each select one pair.
MixturePrior default_prior();

struct RunConfig {
  std::uint64_t seed = 0;
  ScheduleConfig schedule;
  MixturePrior prior = default_prior();
  std::string prompt = "upper";
  SegmentationConfig segmentation;
  LossConfig loss;
  SceneConfig scene;
  TimestepSampler sampler;
  OptimizerConfig optimizer;

  void validate() const;
  Condition condition() const { return Condition::prompt(prompt); }
};

struct IterationRow {
  std::int64_t iteration = 0;
  double t = 0.0;
  double s = 0.0;
  double e = 0.0;
  int segment = 0;
  double loss = 0.0;
  // Unweighted squared residual norms, summed over points and averaged over views.
  std::map<std::string, double, std::less<>> terms;
  double grad_norm = 0.0;
  double max_point_error = 0.0;
};

struct RunResult {
  std::vector<IterationRow> rows;
  Vec initial_theta;
  Vec final_theta;
  std::vector<Vec> targets;
  RecoveryMetric recovery;
  // FNV-1a over the bytes of the fixed per-view noise.
  std::uint64_t noise_digest = 0;
  double wall_seconds = 0.0;
};

/// Multi-view distillation of the point scene against the configured prior.
///
/// Each iteration: sample t (and s, e as the loss requires), render every view, diffuse with
/// that view's fixed noise, evaluate the loss per point, pull the gradient back through the
/// renderer, average over views and take one Adam step. Deterministic for a given config.
/// Throws NumericalError on a non-finite loss, gradient or parameter.
RunResult distill(const RunConfig& cfg);

struct ComparisonRow {
  std::string label;
  LossConfig loss;
  double max_point_error = 0.0;
  double assignment_cost = 0.0;
  double final_loss = 0.0;
  // Mean over iterations of each reported term.
  std::map<std::string, double, std::less<>> mean_terms;
  double wall_seconds = 0.0;
};

/// Runs distill once per loss configuration on the shared scene, prior and seed.
/// Up to `jobs` runs execute concurrently; rows keep the order of `losses`.
std::vector<ComparisonRow> compare_losses(const RunConfig& base,
                                          const std::vector<std::pair<std::string, LossConfig>>& losses,
                                          int jobs);

// Runs `count` independent tasks on up to `jobs` threads; the first exception is rethrown.
void run_parallel(int count, int jobs, const std::function<void(int)>& task);

std::uint64_t fnv1a(const std::vector<Vec>& values);

}  // namespace sctd
