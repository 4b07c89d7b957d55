#include "sctd/prior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace sctd {

namespace {

const std::string kEmptyLabel;

constexpr double kWeightTolerance = 1e-12;

}  // namespace

const std::string& Condition::label() const { return label_ ? *label_ : kEmptyLabel; }

MixturePrior::MixturePrior(std::vector<MixtureComponent> components, ConditionMap conditions)
    : components_(std::move(components)), conditions_(std::move(conditions)) {
  if (components_.empty()) throw PreconditionError("mixture prior needs at least one component");
  dimension_ = static_cast<int>(components_.front().mean.size());
  if (dimension_ < 1) throw PreconditionError("mixture prior dimension must be >= 1");
  double total = 0.0;
  for (const auto& c : components_) {
    if (c.mean.size() != dimension_) {
      throw PreconditionError("mixture components must share one dimension");
    }
    if (!c.mean.allFinite() || !(c.scale >= 0.0) || !std::isfinite(c.scale)) {
      throw PreconditionError("component mean must be finite and scale >= 0");
    }
    if (!(c.weight > 0.0) || !std::isfinite(c.weight)) {
      throw PreconditionError("component weights must be positive");
    }
    total += c.weight;
  }
  if (std::abs(total - 1.0) > kWeightTolerance) {
    throw PreconditionError("component weights must sum to 1 (got " + std::to_string(total) +
                            ")");
  }
  for (const auto& [label, subset] : conditions_) {
    if (label.empty()) throw PreconditionError("condition labels must be non-empty");
    if (subset.empty()) {
      throw PreconditionError("condition '" + label + "' maps to an empty component subset");
    }
    for (std::size_t i : subset) {
      if (i >= components_.size()) {
        throw PreconditionError("condition '" + label + "' references component " +
                                std::to_string(i) + " out of range");
      }
    }
  }
}

std::vector<std::size_t> MixturePrior::active(const Condition& y) const {
  if (y.is_unconditional()) {
    std::vector<std::size_t> all(components_.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all;
  }
  auto it = conditions_.find(y.label());
  if (it == conditions_.end()) {
    throw PreconditionError("unknown condition label '" + y.label() + "'");
  }
  return it->second;
}

std::vector<Vec> MixturePrior::means(const Condition& y) const {
  std::vector<Vec> out;
  for (std::size_t i : active(y)) out.push_back(components_[i].mean);
  return out;
}

MixturePrior::Posterior MixturePrior::posterior(const Vec& z, double alpha, double sigma,
                                                const Condition& y) const {
  Posterior post;
  post.index = active(y);
  const std::size_t n = post.index.size();
  post.responsibility.resize(n);
  post.variance.resize(n);
  std::vector<double> log_terms(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto& c = components_[post.index[j]];
    const double v = alpha * alpha * c.scale * c.scale + sigma * sigma;
    post.variance[j] = v;
    log_terms[j] = std::log(c.weight) - 0.5 * dimension_ * std::log(v) -
                   0.5 * (z - alpha * c.mean).squaredNorm() / v;
  }
  const double top = *std::max_element(log_terms.begin(), log_terms.end());
  double norm = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    post.responsibility[j] = std::exp(log_terms[j] - top);
    norm += post.responsibility[j];
  }
  for (double& r : post.responsibility) r /= norm;
  return post;
}

Vec MixturePrior::epsilon(const Vec& z, double alpha, double sigma, const Condition& y) const {
  const Posterior post = posterior(z, alpha, sigma, y);
  Vec eps = Vec::Zero(dimension_);
  for (std::size_t j = 0; j < post.index.size(); ++j) {
    const auto& c = components_[post.index[j]];
    eps += (post.responsibility[j] / post.variance[j]) * (z - alpha * c.mean);
  }
  return sigma * eps;
}

Propagated MixturePrior::epsilon_with_jacobian(const Vec& z, double alpha, double sigma,
                                               const Condition& y) const {
  // With g_i = -(z - alpha mu_i)/v_i and gbar = sum r_i g_i:
  //   eps = -sigma gbar,  d eps/dz = sigma [ sum r_i / v_i I - sum r_i g_i g_i^T + gbar gbar^T ].
  const Posterior post = posterior(z, alpha, sigma, y);
  const std::size_t n = post.index.size();
  Vec gbar = Vec::Zero(dimension_);
  Mat second = Mat::Zero(dimension_, dimension_);
  double precision = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const auto& c = components_[post.index[j]];
    const double r = post.responsibility[j];
    const Vec g = -(z - alpha * c.mean) / post.variance[j];
    gbar += r * g;
    second.noalias() += r * g * g.transpose();
    precision += r / post.variance[j];
  }
  Propagated out;
  out.value = -sigma * gbar;
  out.jacobian = sigma * (precision * Mat::Identity(dimension_, dimension_) - second +
                          gbar * gbar.transpose());
  return out;
}

double MixturePrior::log_density(const Vec& z, double alpha, double sigma,
                                 const Condition& y) const {
  const auto idx = active(y);
  double subset_weight = 0.0;
  for (std::size_t i : idx) subset_weight += components_[i].weight;
  std::vector<double> log_terms;
  log_terms.reserve(idx.size());
  for (std::size_t i : idx) {
    const auto& c = components_[i];
    const double v = alpha * alpha * c.scale * c.scale + sigma * sigma;
    log_terms.push_back(std::log(c.weight / subset_weight) -
                        0.5 * dimension_ * std::log(2.0 * std::numbers::pi * v) -
                        0.5 * (z - alpha * c.mean).squaredNorm() / v);
  }
  const double top = *std::max_element(log_terms.begin(), log_terms.end());
  double acc = 0.0;
  for (double l : log_terms) acc += std::exp(l - top);
  return top + std::log(acc);
}

MixturePrior MixturePrior::transformed(const Mat& rotation) const {
  if (rotation.rows() != dimension_ || rotation.cols() != dimension_) {
    throw PreconditionError("prior transform must be a dimension x dimension matrix");
  }
  std::vector<MixtureComponent> moved = components_;
  for (auto& c : moved) c.mean = rotation * c.mean;
  return MixturePrior(std::move(moved), conditions_);
}

Vec ScoreModel::epsilon(const Vec& z, double t, const Condition& y) const {
  return prior.epsilon(z, schedule.alpha(t), schedule.sigma(t), y);
}

Propagated ScoreModel::epsilon_with_jacobian(const Vec& z, double t, const Condition& y) const {
  return prior.epsilon_with_jacobian(z, schedule.alpha(t), schedule.sigma(t), y);
}

Vec ScoreModel::epsilon_cfg(const Vec& z, double t, const Condition& y,
                            double guidance_scale) const {
  if (y.is_unconditional()) {
    throw PreconditionError("classifier-free guidance needs a prompt condition");
  }
  const Vec cond = epsilon(z, t, y);
  const Vec uncond = epsilon(z, t, Condition::unconditional());
  return cond + guidance_scale * (cond - uncond);
}

Propagated ScoreModel::epsilon_cfg_with_jacobian(const Vec& z, double t, const Condition& y,
                                                 double guidance_scale) const {
  if (y.is_unconditional()) {
    throw PreconditionError("classifier-free guidance needs a prompt condition");
  }
  const Propagated cond = epsilon_with_jacobian(z, t, y);
  const Propagated uncond = epsilon_with_jacobian(z, t, Condition::unconditional());
  return {cond.value + guidance_scale * (cond.value - uncond.value),
          cond.jacobian + guidance_scale * (cond.jacobian - uncond.jacobian)};
}

}  // namespace sctd
