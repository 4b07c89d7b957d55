#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sctd/schedule.hpp"
#include "sctd/types.hpp"

namespace sctd {

// The guidance signal: either the null prompt or a named prompt label.
class Condition {
 public:
  static Condition unconditional() { return Condition(); }
  static Condition prompt(std::string label) { return Condition(std::move(label)); }

  bool is_unconditional() const { return !label_.has_value(); }
  // Empty for the unconditional branch.
  const std::string& label() const;

  friend bool operator==(const Condition&, const Condition&) = default;

 private:
  Condition() = default;
  explicit Condition(std::string label) : label_(std::move(label)) {}

  std::optional<std::string> label_;
};

struct MixtureComponent {
  Vec mean;
  double scale = 0.0;  // isotropic standard deviation, 0 is a point mass
  double weight = 1.0;
};

/// Isotropic Gaussian-mixture data distribution with labeled component subsets.
///
/// Diffused to time t the branch for condition y is
///   p_t(z | y) = sum_{i in y} w~_i N(z; alpha_t mu_i, (alpha_t^2 c_i^2 + sigma_t^2) I)
/// with the weights renormalized over the subset. The unconditional branch uses every
/// component with its original weight.
class MixturePrior {
 public:
  using ConditionMap = std::map<std::string, std::vector<std::size_t>>;

  MixturePrior(std::vector<MixtureComponent> components, ConditionMap conditions);

  int dimension() const { return dimension_; }
  const std::vector<MixtureComponent>& components() const { return components_; }
  const ConditionMap& conditions() const { return conditions_; }

  // Component indices active under y; throws PreconditionError for unknown labels.
  std::vector<std::size_t> active(const Condition& y) const;
  std::vector<Vec> means(const Condition& y) const;

  // -sigma * grad_z log p(z | y) at noise level (alpha, sigma).
  Vec epsilon(const Vec& z, double alpha, double sigma, const Condition& y) const;
  // Same, with d eps / dz (symmetric).
  Propagated epsilon_with_jacobian(const Vec& z, double alpha, double sigma,
                                   const Condition& y) const;
  double log_density(const Vec& z, double alpha, double sigma, const Condition& y) const;

  // Means mapped through an orthonormal matrix; scales, weights and labels unchanged.
  MixturePrior transformed(const Mat& rotation) const;

 private:
  struct Posterior {
    std::vector<std::size_t> index;
    std::vector<double> responsibility;
    std::vector<double> variance;
  };
  Posterior posterior(const Vec& z, double alpha, double sigma, const Condition& y) const;

  std::vector<MixtureComponent> components_;
  ConditionMap conditions_;
  int dimension_ = 0;
};

/// A schedule bound to a prior: the closed-form stand-in for a trained eps network.
struct ScoreModel {
  NoiseSchedule schedule;
  MixturePrior prior;
  NoiseCoeffForm coeff_form = NoiseCoeffForm::kRatio;

  Vec epsilon(const Vec& z, double t, const Condition& y) const;
  Propagated epsilon_with_jacobian(const Vec& z, double t, const Condition& y) const;

  // (1 + w) eps(y) - w eps(null). Requires a prompt condition.
  Vec epsilon_cfg(const Vec& z, double t, const Condition& y, double guidance_scale) const;
  Propagated epsilon_cfg_with_jacobian(const Vec& z, double t, const Condition& y,
                                       double guidance_scale) const;

  DdimCoefficients coefficients(double t, double s) const {
    return schedule.ddim_coefficients(t, s, coeff_form);
  }
};

}  // namespace sctd
