#include "sctd/scene.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace sctd {

SceneParams::SceneParams(int points, int dimension)
    : SceneParams(points, dimension, Vec::Zero(static_cast<Eigen::Index>(points) * dimension)) {}

SceneParams::SceneParams(int points, int dimension, Vec theta)
    : points_(points), dimension_(dimension), theta_(std::move(theta)) {
  if (points < 1 || dimension < 1) throw PreconditionError("scene needs points, dimension >= 1");
  if (theta_.size() != static_cast<Eigen::Index>(points) * dimension) {
    throw PreconditionError("scene parameter vector has wrong length");
  }
  if (!theta_.allFinite()) throw PreconditionError("scene parameters must be finite");
}

std::vector<Vec> SceneParams::point_list() const {
  std::vector<Vec> out;
  out.reserve(points_);
  for (int k = 0; k < points_; ++k) out.push_back(point(k));
  return out;
}

ViewTransform ViewTransform::identity(int dimension) {
  return ViewTransform(Mat::Identity(dimension, dimension), true);
}

ViewTransform ViewTransform::rotation(double angle) {
  Mat r(2, 2);
  r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return ViewTransform(std::move(r), true);
}

ViewTransform ViewTransform::from_matrix(Mat matrix, bool transform_prior) {
  if (matrix.rows() != matrix.cols() || matrix.rows() < 1) {
    throw PreconditionError("view transform must be square");
  }
  const auto n = matrix.rows();
  const double off = (matrix.transpose() * matrix - Mat::Identity(n, n)).cwiseAbs().maxCoeff();
  if (off > 1e-10 || std::abs(matrix.determinant() - 1.0) > 1e-10) {
    throw PreconditionError("view transform must be orthonormal with determinant +1");
  }
  return ViewTransform(std::move(matrix), transform_prior);
}

ViewTransform ViewTransform::random(int dimension, std::mt19937_64& rng) {
  if (dimension == 2) {
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    return rotation(angle(rng));
  }
  std::normal_distribution<double> normal;
  Mat a(dimension, dimension);
  for (int i = 0; i < dimension; ++i)
    for (int j = 0; j < dimension; ++j) a(i, j) = normal(rng);
  Eigen::HouseholderQR<Mat> qr(a);
  Mat q = qr.householderQ() * Mat::Identity(dimension, dimension);
  const Mat r = qr.matrixQR();
  for (int i = 0; i < dimension; ++i) {
    if (r(i, i) < 0.0) q.col(i) *= -1.0;
  }
  if (q.determinant() < 0.0) q.col(0) *= -1.0;
  return ViewTransform(std::move(q), true);
}

ViewTransform ViewTransform::then(const ViewTransform& next) const {
  return ViewTransform(next.matrix_ * matrix_, transform_prior_ && next.transform_prior_);
}

Vec render(const SceneParams& scene, const ViewTransform& view) {
  if (view.dimension() != scene.dimension()) {
    throw PreconditionError("view and scene dimensions differ");
  }
  const int d = scene.dimension();
  Vec out(scene.theta().size());
  for (int k = 0; k < scene.points(); ++k) {
    out.segment(k * d, d) = view.matrix() * scene.theta().segment(k * d, d);
  }
  return out;
}

Mat render_jacobian(const SceneParams& scene, const ViewTransform& view) {
  const int d = scene.dimension();
  Mat jac = Mat::Zero(scene.theta().size(), scene.theta().size());
  for (int k = 0; k < scene.points(); ++k) jac.block(k * d, k * d, d, d) = view.matrix();
  return jac;
}

Vec render_pullback(const SceneParams& scene, const ViewTransform& view, const Vec& grad_z0) {
  if (grad_z0.size() != scene.theta().size()) {
    throw PreconditionError("gradient length does not match scene");
  }
  const int d = scene.dimension();
  Vec out(grad_z0.size());
  for (int k = 0; k < scene.points(); ++k) {
    out.segment(k * d, d) = view.matrix().transpose() * grad_z0.segment(k * d, d);
  }
  return out;
}

MixturePrior view_prior(const MixturePrior& base, const ViewTransform& view) {
  if (!view.transform_prior()) return base;
  return base.transformed(view.matrix());
}

void TimestepSampler::validate() const {
  if (!(t_low < t_high_base)) throw PreconditionError("sampler requires t_low < t_high_base");
  if (t_warm_init < 0.0 || warm_iters < 0) {
    throw PreconditionError("sampler warm-up must be non-negative");
  }
  if (!(unit_scale > 0.0)) throw PreconditionError("sampler unit_scale must be positive");
}

double TimestepSampler::warm(std::int64_t iter) const {
  if (iter < 0) throw PreconditionError("iteration must be >= 0");
  if (warm_iters == 0 || iter >= warm_iters) return 0.0;
  return t_warm_init * (1.0 - static_cast<double>(iter) / static_cast<double>(warm_iters));
}

std::pair<double, double> TimestepSampler::support(std::int64_t iter) const {
  return {t_low / unit_scale, (t_high_base + warm(iter)) / unit_scale};
}

double TimestepSampler::sample(std::int64_t iter, std::mt19937_64& rng) const {
  const auto [lo, hi] = support(iter);
  std::uniform_real_distribution<double> u(lo, hi);
  return u(rng);
}

}  // namespace sctd
