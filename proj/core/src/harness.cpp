#include "sctd/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <exception>
#include <mutex>
#include <random>
#include <string>
#include <thread>

namespace sctd {

MixturePrior default_prior() {
  auto component = [](double x, double y) {
    Vec mean(2);
    mean << x, y;
    return MixtureComponent{mean, 0.1, 0.25};
  };
  return MixturePrior({component(-3.0, 3.0), component(3.0, 3.0), component(-3.0, -3.0),
                       component(3.0, -3.0)},
                      {{"upper", {0, 1}}, {"lower", {2, 3}}});
}

void RunConfig::validate() const {
  if (optimizer.iterations < 1) throw PreconditionError("optimizer.iterations must be >= 1");
  optimizer.adam.validate();
  loss.validate();
  sampler.validate();
  if (prompt.empty()) throw PreconditionError("prompt must name a condition");
  (void)prior.active(condition());
  if (scene.points < 1 || scene.views < 1) {
    throw PreconditionError("scene needs at least one point and one view");
  }
  if (scene.dimension != prior.dimension()) {
    throw PreconditionError("scene dimension must match the prior dimension");
  }
  if (!(scene.init_spread >= 0.0)) throw PreconditionError("scene.init_spread must be >= 0");
  if (scene.init_center && scene.init_center->size() != scene.dimension) {
    throw PreconditionError("scene.init_center has the wrong dimension");
  }
  if (!scene.initial_points.empty()) {
    if (static_cast<int>(scene.initial_points.size()) != scene.points) {
      throw PreconditionError("scene.initial_points must list exactly scene.points entries");
    }
    for (const Vec& p : scene.initial_points) {
      if (p.size() != scene.dimension) {
        throw PreconditionError("scene.initial_points entry has the wrong dimension");
      }
    }
  }
  if (prior.means(condition()).size() > static_cast<std::size_t>(scene.points)) {
    throw PreconditionError("scene needs at least as many points as conditional components");
  }
  (void)schedule.build();
  (void)segmentation.build(schedule.horizon);
}

std::uint64_t fnv1a(const std::vector<Vec>& values) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (const Vec& v : values) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      unsigned char bytes[sizeof(double)];
      const double x = v[i];
      std::memcpy(bytes, &x, sizeof(double));
      for (unsigned char b : bytes) {
        hash ^= b;
        hash *= 1099511628211ULL;
      }
    }
  }
  return hash;
}

namespace {

Vec unconditional_mean(const MixturePrior& prior) {
  Vec mean = Vec::Zero(prior.dimension());
  for (const MixtureComponent& c : prior.components()) mean += c.weight * c.mean;
  return mean;
}

Vec gaussian(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Vec out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = normal(rng);
  return out;
}

double uniform(double lo, double hi, std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

void require_finite(double value, const char* what, std::int64_t iter) {
  if (!std::isfinite(value)) {
    throw NumericalError(std::string("non-finite ") + what + " at iteration " +
                         std::to_string(iter));
  }
}

}  // namespace

RunResult distill(const RunConfig& cfg) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();

  const NoiseSchedule schedule = cfg.schedule.build();
  const Segmentation seg = cfg.segmentation.build(cfg.schedule.horizon);
  const Condition y = cfg.condition();
  const int k_points = cfg.scene.points;
  const int dim = cfg.scene.dimension;
  const Eigen::Index n = static_cast<Eigen::Index>(k_points) * dim;

  std::mt19937_64 rng(cfg.seed);

  // Initialization order is part of the determinism contract: theta, views, noise.
  Vec theta(n);
  if (!cfg.scene.initial_points.empty()) {
    for (int k = 0; k < k_points; ++k) theta.segment(k * dim, dim) = cfg.scene.initial_points[k];
  } else {
    const Vec center = cfg.scene.init_center.value_or(unconditional_mean(cfg.prior));
    for (int k = 0; k < k_points; ++k) {
      theta.segment(k * dim, dim) = center + cfg.scene.init_spread * gaussian(dim, rng);
    }
  }

  std::vector<ViewTransform> views;
  std::vector<ScoreModel> models;
  views.reserve(cfg.scene.views);
  models.reserve(cfg.scene.views);
  for (int v = 0; v < cfg.scene.views; ++v) {
    ViewTransform view = ViewTransform::random(dim, rng);
    if (!cfg.scene.transform_prior) view = ViewTransform::from_matrix(view.matrix(), false);
    models.push_back(ScoreModel{schedule, view_prior(cfg.prior, view), cfg.schedule.coeff_form});
    views.push_back(std::move(view));
  }
  std::vector<Vec> noise;
  noise.reserve(cfg.scene.views);
  for (int v = 0; v < cfg.scene.views; ++v) noise.push_back(gaussian(n, rng));

  RunResult result;
  result.noise_digest = fnv1a(noise);
  result.targets = cfg.prior.means(y);
  result.initial_theta = theta;
  result.rows.reserve(static_cast<std::size_t>(cfg.optimizer.iterations));

  AdamState state = AdamState::start(theta);
  const double inv_views = 1.0 / cfg.scene.views;

  for (std::int64_t iter = 0; iter < cfg.optimizer.iterations; ++iter) {
    IterationRow row;
    row.iteration = iter;
    row.t = schedule.clamp(cfg.sampler.sample(iter, rng));
    row.segment = seg.locate(row.t * seg.horizon() / schedule.horizon()).index;
    const double edge = seg.edge_time(row.segment, schedule);
    switch (cfg.loss.kind) {
      case LossKind::kSds:
        row.s = row.t;
        row.e = row.t;
        break;
      case LossKind::kCds:
        row.s = uniform(schedule.t_min(), row.t, rng);
        row.e = schedule.t_min();
        break;
      case LossKind::kGcs:
        row.e = uniform(schedule.t_min(), row.t, rng);
        row.s = uniform(row.e, row.t, rng);
        break;
      case LossKind::kSctd:
        row.e = edge;
        row.s = uniform(edge, row.t, rng);
        break;
    }

    const SceneParams scene(k_points, dim, state.params);
    Vec grad_theta = Vec::Zero(n);
    for (std::size_t v = 0; v < views.size(); ++v) {
      const Vec z0 = render(scene, views[v]);
      const Vec view_noise = cfg.loss.kind == LossKind::kSds ? gaussian(n, rng) : noise[v];
      Vec grad_z0(n);
      for (int k = 0; k < k_points; ++k) {
        const LossReport report =
            evaluate_loss(models[v], z0.segment(k * dim, dim), row.t, row.s, row.e,
                          view_noise.segment(k * dim, dim), seg, y, cfg.loss);
        row.loss += inv_views * report.total;
        for (const auto& [name, value] : report.terms) row.terms[name] += inv_views * value;
        grad_z0.segment(k * dim, dim) = report.grad_z0;
      }
      grad_theta += inv_views * render_pullback(scene, views[v], grad_z0);
    }

    require_finite(row.loss, "loss", iter);
    row.grad_norm = grad_theta.norm();
    require_finite(row.grad_norm, "gradient", iter);
    state = adam_step(std::move(state), grad_theta, cfg.optimizer.adam);
    if (!state.params.allFinite()) require_finite(NAN, "parameter", iter);

    row.max_point_error =
        recovery_metric(SceneParams(k_points, dim, state.params).point_list(), result.targets)
            .max_point_error;
    result.rows.push_back(std::move(row));
  }

  result.final_theta = state.params;
  result.recovery =
      recovery_metric(SceneParams(k_points, dim, state.params).point_list(), result.targets);
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

void run_parallel(int count, int jobs, const std::function<void(int)>& task) {
  if (count <= 0) return;
  const int workers = std::max(1, std::min(jobs, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<ComparisonRow> compare_losses(
    const RunConfig& base, const std::vector<std::pair<std::string, LossConfig>>& losses,
    int jobs) {
  if (losses.size() < 2) throw PreconditionError("compare_losses needs at least two configs");
  std::vector<ComparisonRow> rows(losses.size());
  run_parallel(static_cast<int>(losses.size()), jobs, [&](int i) {
    RunConfig cfg = base;
    cfg.loss = losses[i].second;
    const RunResult run = distill(cfg);
    ComparisonRow& row = rows[i];
    row.label = losses[i].first;
    row.loss = cfg.loss;
    row.max_point_error = run.recovery.max_point_error;
    row.assignment_cost = run.recovery.assignment_cost;
    row.final_loss = run.rows.back().loss;
    for (const IterationRow& r : run.rows) {
      for (const auto& [name, value] : r.terms) row.mean_terms[name] += value;
    }
    for (auto& [name, value] : row.mean_terms) value /= static_cast<double>(run.rows.size());
    row.wall_seconds = run.wall_seconds;
  });
  return rows;
}

}  // namespace sctd
