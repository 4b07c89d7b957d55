#include "sctd/schedule.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "sctd/types.hpp"

namespace sctd {

namespace {

constexpr double kDomainSlack = 1e-12;

}  // namespace

ScheduleKind parse_schedule_kind(std::string_view name) {
  if (name == "cosine") return ScheduleKind::kCosine;
  throw PreconditionError("unknown schedule kind '" + std::string(name) + "'");
}

std::string_view to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::kCosine:
      return "cosine";
  }
  return "unknown";
}

NoiseCoeffForm parse_noise_coeff_form(std::string_view name) {
  if (name == "ratio") return NoiseCoeffForm::kRatio;
  if (name == "log_snr") return NoiseCoeffForm::kLogSnr;
  throw PreconditionError("unknown noise coefficient form '" + std::string(name) + "'");
}

std::string_view to_string(NoiseCoeffForm form) {
  return form == NoiseCoeffForm::kRatio ? "ratio" : "log_snr";
}

DdimCoefficients ddim_coefficients(double alpha_t, double sigma_t, double alpha_s,
                                   double sigma_s) {
  return {alpha_s / alpha_t, alpha_s * (sigma_t / alpha_t - sigma_s / alpha_s)};
}

NoiseSchedule::NoiseSchedule(double t_min, double t_max, double horizon, ScheduleKind kind)
    : t_min_(t_min), t_max_(t_max), horizon_(horizon), kind_(kind) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw PreconditionError("schedule horizon must be positive and finite");
  }
  if (!(t_min > 0.0) || !(t_max < horizon) || !(t_min < t_max)) {
    throw PreconditionError("schedule requires 0 < t_min < t_max < horizon");
  }
}

bool NoiseSchedule::contains(double t) const {
  return t >= t_min_ - kDomainSlack && t <= t_max_ + kDomainSlack;
}

double NoiseSchedule::clamp(double t) const {
  return t < t_min_ ? t_min_ : (t > t_max_ ? t_max_ : t);
}

void NoiseSchedule::check(double t) const {
  if (!contains(t)) {
    throw DomainError("time " + std::to_string(t) + " outside schedule domain [" +
                      std::to_string(t_min_) + ", " + std::to_string(t_max_) + "]");
  }
}

double NoiseSchedule::angle(double t) const {
  return std::numbers::pi * t / (2.0 * horizon_);
}

double NoiseSchedule::alpha(double t) const {
  check(t);
  return std::cos(angle(t));
}

double NoiseSchedule::sigma(double t) const {
  check(t);
  return std::sin(angle(t));
}

double NoiseSchedule::log_snr(double t) const {
  check(t);
  const double a = angle(t);
  return std::log(std::cos(a) / std::sin(a));
}

double NoiseSchedule::inverse_log_snr(double lambda) const {
  const double hi = std::log(std::cos(angle(t_min_)) / std::sin(angle(t_min_)));
  const double lo = std::log(std::cos(angle(t_max_)) / std::sin(angle(t_max_)));
  const double slack = kDomainSlack * (1.0 + std::abs(lambda));
  if (!(lambda >= lo - slack && lambda <= hi + slack)) {
    throw DomainError("log-SNR " + std::to_string(lambda) + " outside attainable range [" +
                      std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  return clamp(2.0 * horizon_ / std::numbers::pi * std::atan(std::exp(-lambda)));
}

double NoiseSchedule::noise_to_signal(double t) const {
  check(t);
  return std::tan(angle(t));
}

double NoiseSchedule::time_from_noise_to_signal(double kappa) const {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) {
    throw DomainError("noise-to-signal ratio must be positive and finite");
  }
  const double t = 2.0 * horizon_ / std::numbers::pi * std::atan(kappa);
  check(t);
  return clamp(t);
}

double NoiseSchedule::drift(double t) const {
  check(t);
  return -std::numbers::pi / (2.0 * horizon_) * std::tan(angle(t));
}

double NoiseSchedule::diffusion_squared(double t) const {
  check(t);
  return std::numbers::pi / horizon_ * std::tan(angle(t));
}

DdimCoefficients NoiseSchedule::ddim_coefficients(double t, double s,
                                                  NoiseCoeffForm form) const {
  const double alpha_t = alpha(t);
  const double alpha_s = alpha(s);
  if (form == NoiseCoeffForm::kLogSnr) {
    return {alpha_s / alpha_t, alpha_s * (std::exp(-log_snr(t)) - std::exp(-log_snr(s)))};
  }
  return sctd::ddim_coefficients(alpha_t, sigma(t), alpha_s, sigma(s));
}

}  // namespace sctd
