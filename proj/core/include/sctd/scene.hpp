#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "sctd/prior.hpp"
#include "sctd/types.hpp"

namespace sctd {

// K points in dimension d stored contiguously: theta = [p_0; p_1; ...; p_{K-1}].
class SceneParams {
 public:
  SceneParams(int points, int dimension);
  SceneParams(int points, int dimension, Vec theta);

  int points() const { return points_; }
  int dimension() const { return dimension_; }
  const Vec& theta() const { return theta_; }
  Vec& theta() { return theta_; }

  Vec point(int k) const { return theta_.segment(k * dimension_, dimension_); }
  std::vector<Vec> point_list() const;

 private:
  int points_;
  int dimension_;
  Vec theta_;
};

// Camera-pose analog: a proper rotation applied to every point of the scene.
class ViewTransform {
 public:
  static ViewTransform identity(int dimension);
  // Planar rotation; requires dimension 2.
  static ViewTransform rotation(double angle);
  // Throws PreconditionError unless orthonormal with determinant +1 (within 1e-10).
  static ViewTransform from_matrix(Mat matrix, bool transform_prior = true);
  // Uniformly distributed rotation in any dimension.
  static ViewTransform random(int dimension, std::mt19937_64& rng);

  const Mat& matrix() const { return matrix_; }
  int dimension() const { return static_cast<int>(matrix_.rows()); }
  // When false the loss is scored against the untransformed prior for this view.
  bool transform_prior() const { return transform_prior_; }

  ViewTransform then(const ViewTransform& next) const;

 private:
  ViewTransform(Mat matrix, bool transform_prior)
      : matrix_(std::move(matrix)), transform_prior_(transform_prior) {}

  Mat matrix_;
  bool transform_prior_ = true;
};

// z0 = g(c, theta): each point rotated by the view.
Vec render(const SceneParams& scene, const ViewTransform& view);
// d z0 / d theta: block diagonal with one rotation block per point.
Mat render_jacobian(const SceneParams& scene, const ViewTransform& view);
// Chain rule through render: (d z0/d theta)^T grad_z0.
Vec render_pullback(const SceneParams& scene, const ViewTransform& view, const Vec& grad_z0);

// The target distribution seen from pose c.
MixturePrior view_prior(const MixturePrior& base, const ViewTransform& view);

/// Timestep sampler in integer diffusion-step units divided by `unit_scale`:
/// t ~ U(t_low, t_high_base + t_warm(iter)), t_warm decaying linearly from t_warm_init
/// to 0 over warm_iters iterations.
struct TimestepSampler {
  double t_low = 20.0;
  double t_high_base = 500.0;
  double t_warm_init = 480.0;
  std::int64_t warm_iters = 1500;
  double unit_scale = 1000.0;

  void validate() const;
  double warm(std::int64_t iter) const;
  // Support in schedule units.
  std::pair<double, double> support(std::int64_t iter) const;
  double sample(std::int64_t iter, std::mt19937_64& rng) const;
};

}  // namespace sctd
