#pragma once

#include <cmath>
#include <functional>
#include <random>

#include "sctd/harness.hpp"
#include "sctd/prior.hpp"

namespace sctd::testing {

inline Vec gaussian_vec(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal;
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = scale * normal(rng);
  return v;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Point mass at mu under the single label "a".
inline ScoreModel delta_model(const Vec& mu) {
  MixturePrior prior({{mu, 0.0, 1.0}}, {{"a", {0}}});
  return ScoreModel{NoiseSchedule(0.002, 0.998), prior};
}

inline ScoreModel single_gaussian_model(const Vec& mu, double scale) {
  MixturePrior prior({{mu, scale, 1.0}}, {{"a", {0}}});
  return ScoreModel{NoiseSchedule(0.002, 0.998), prior};
}

// Two unequal, overlapping components; "left" selects the first.
inline ScoreModel two_component_model() {
  Vec a(2), b(2);
  a << -1.0, 0.5;
  b << 1.5, -0.25;
  MixturePrior prior({{a, 0.4, 0.3}, {b, 0.7, 0.7}}, {{"left", {0}}, {"both", {0, 1}}});
  return ScoreModel{NoiseSchedule(0.002, 0.998), prior};
}

inline ScoreModel default_model() {
  return ScoreModel{NoiseSchedule(0.002, 0.998), default_prior()};
}

// Central differences of a scalar function.
inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x,
                       double h = 1e-6) {
  Vec g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double step = h * std::max(1.0, std::abs(x[i]));
    Vec xp = x, xm = x;
    xp[i] += step;
    xm[i] -= step;
    g[i] = (f(xp) - f(xm)) / (2.0 * step);
  }
  return g;
}

// Central differences of a vector function, one column per input coordinate.
inline Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double h = 1e-6) {
  const Vec f0 = f(x);
  Mat j(f0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double step = h * std::max(1.0, std::abs(x[i]));
    Vec xp = x, xm = x;
    xp[i] += step;
    xm[i] -= step;
    j.col(i) = (f(xp) - f(xm)) / (2.0 * step);
  }
  return j;
}

inline double rel_error(const Vec& a, const Vec& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-300});
  return (a - b).norm() / scale;
}

inline double rel_error(const Mat& a, const Mat& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-300});
  return (a - b).norm() / scale;
}

}  // namespace sctd::testing
