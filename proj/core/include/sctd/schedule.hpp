#pragma once

#include <cmath>
#include <string_view>

namespace sctd {

enum class ScheduleKind { kCosine };

// Which algebraic route evaluates alpha_s * int_{lambda_t}^{lambda_s} e^{-lambda} dlambda.
//   kRatio:  alpha_s * (sigma_t/alpha_t - sigma_s/alpha_s)
//   kLogSnr: alpha_s * (exp(-lambda_t) - exp(-lambda_s))
enum class NoiseCoeffForm { kRatio, kLogSnr };

ScheduleKind parse_schedule_kind(std::string_view name);
std::string_view to_string(ScheduleKind kind);
NoiseCoeffForm parse_noise_coeff_form(std::string_view name);
std::string_view to_string(NoiseCoeffForm form);

// One-step DDIM / DPM-Solver-1 map z_s = scale * z_t - noise_coeff * eps.
struct DdimCoefficients {
  double scale = 1.0;
  double noise_coeff = 0.0;
};

// Coefficients from raw (alpha, sigma) pairs; no domain checks.
DdimCoefficients ddim_coefficients(double alpha_t, double sigma_t, double alpha_s,
                                   double sigma_s);

/// Continuous variance-preserving schedule on [t_min, t_max] within [0, horizon].
///
/// For the cosine kind alpha_t = cos(pi t / 2T) and sigma_t = sin(pi t / 2T), so the
/// half log-SNR lambda_t = ln(alpha_t / sigma_t) and its inverse are closed form.
/// The noise-to-signal ratio kappa_t = sigma_t / alpha_t = exp(-lambda_t) is the
/// variable in which the probability-flow ODE becomes dx/dkappa = eps with x = z/alpha.
class NoiseSchedule {
 public:
  NoiseSchedule() = default;
  NoiseSchedule(double t_min, double t_max, double horizon = 1.0,
                ScheduleKind kind = ScheduleKind::kCosine);

  double t_min() const { return t_min_; }
  double t_max() const { return t_max_; }
  double horizon() const { return horizon_; }
  ScheduleKind kind() const { return kind_; }

  bool contains(double t) const;
  double clamp(double t) const;

  double alpha(double t) const;
  double sigma(double t) const;
  double log_snr(double t) const;
  double inverse_log_snr(double lambda) const;

  // kappa = sigma/alpha and its inverse map back to time.
  double noise_to_signal(double t) const;
  double time_from_noise_to_signal(double kappa) const;

  // PF-ODE coefficients: f = d ln(alpha)/dt, g^2 = d(sigma^2)/dt - 2 f sigma^2.
  double drift(double t) const;
  double diffusion_squared(double t) const;

  DdimCoefficients ddim_coefficients(double t, double s,
                                     NoiseCoeffForm form = NoiseCoeffForm::kRatio) const;

 private:
  void check(double t) const;
  double angle(double t) const;

  double t_min_ = 0.002;
  double t_max_ = 0.998;
  double horizon_ = 1.0;
  ScheduleKind kind_ = ScheduleKind::kCosine;
};

// alpha and sigma recovered from kappa alone (VP: alpha^2 + sigma^2 = 1).
inline double alpha_from_kappa(double kappa) { return 1.0 / std::sqrt(1.0 + kappa * kappa); }
inline double sigma_from_kappa(double kappa) { return kappa / std::sqrt(1.0 + kappa * kappa); }

}  // namespace sctd
