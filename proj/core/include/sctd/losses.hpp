#pragma once

#include <map>
#include <string>
#include <string_view>

#include "sctd/consistency.hpp"
#include "sctd/prior.hpp"
#include "sctd/types.hpp"

namespace sctd {

enum class LossKind { kSds, kCds, kGcs, kSctd };
enum class Weighting { kConstant, kSigmaSquared };

LossKind parse_loss_kind(std::string_view name);
std::string_view to_string(LossKind kind);
Weighting parse_weighting(std::string_view name);
std::string_view to_string(Weighting weighting);

struct GcsWeights {
  double cc = 1.0;
  double cg = 1.0;
  double cp = 1.0;
};

struct LossConfig {
  LossKind kind = LossKind::kSctd;
  double guidance_scale = 7.5;
  Weighting weighting = Weighting::kConstant;
  // Replace the online self-consistency branch G^m(z~_t, t, null) by z_{s_m}.
  bool use_approximation = true;
  // SDS: drop d eps/dz from the gradient.
  bool sds_omit_jacobian = true;
  GcsWeights gcs_weights;
  // t above which z~_t is produced by two unconditional steps s_m -> s -> t.
  double forward_threshold = 0.1;

  void validate() const;
};

// Term names used in LossReport::terms and the emitted CSV/JSONL columns.
namespace term {
inline constexpr std::string_view kSelfConsistency = "self_consistency";
inline constexpr std::string_view kCrossConsistency = "cross_consistency";
inline constexpr std::string_view kGenerativePrior = "generative_prior";
inline constexpr std::string_view kCc = "cc";
inline constexpr std::string_view kCg = "cg";
inline constexpr std::string_view kCp = "cp";
inline constexpr std::string_view kNoiseResidual = "noise_residual";
}  // namespace term

struct LossReport {
  double total = 0.0;
  std::map<std::string, double, std::less<>> terms;
  Vec grad_z0;
};

// omega(t): constant 1 or sigma_t^2.
double time_weight(const NoiseSchedule& schedule, Weighting weighting, double t);

/// SDS with CFG: omega(t) || eps^(z_t, t, y) - eps ||^2, z_t = alpha_t z0 + sigma_t eps.
/// With sds_omit_jacobian the gradient is 2 omega(t) alpha_t (eps^ - eps).
LossReport sds_loss(const ScoreModel& model, const Vec& z0, double t, const Vec& noise,
                    const Condition& y, const LossConfig& cfg);

/// Consistency distillation sampling: c(t) || F(z_t, t, y) - sg(F(z^_s, s, y)) ||^2 with
/// c(t) = omega(t) (alpha_t/sigma_t)^2 and z^_s one DDIM step from z_t.
LossReport cds_loss(const ScoreModel& model, const Vec& z0, double t, double s,
                    const Vec& noise, const Condition& y, const LossConfig& cfg);

/// Guided consistency sampling: w_cc L_cc + w_cg L_cg + w_cp L_cp with an identity decoder.
/// Forward path z_e -> z~_s -> z~_t is unconditional; z^_s is one conditional step back.
LossReport gcs_loss(const ScoreModel& model, const Vec& z0, double t, double s, double e,
                    const Vec& noise, const Condition& y, const LossConfig& cfg);

/// Pieces of the segmented loss before reduction; the stop-gradient targets are plain values.
struct SctdParts {
  SegmentLocation segment;
  double edge = 0.0;   // s_m in schedule time
  double weight = 0.0; // b(t)
  Vec z_edge;          // z_{s_m}
  Vec z_forward;       // z~_t
  Vec z_back;          // z^_s
  Propagated online;       // G^m(z~_t, t, null) and its Jacobian w.r.t. z0
  Propagated self_online;  // online branch of the self term (z_{s_m} under approximation)
  Vec self_target;         // sg(G^m(z^_s, s, null))
  Vec cross_target;        // sg(G^m(z~_t, t, y))
};

SctdParts sctd_parts(const ScoreModel& model, const Vec& z0, double t, double s,
                     const Vec& noise, const Segmentation& seg, const Condition& y,
                     const LossConfig& cfg);

// Reduction of the parts: b(t)[||self||^2 + (w+1)^2 ||cross||^2] and its gradient.
LossReport reduce_sctd(const SctdParts& parts, double guidance_scale);

/// Segmented consistency trajectory distillation loss.
LossReport sctd_loss(const ScoreModel& model, const Vec& z0, double t, double s,
                     const Vec& noise, const Segmentation& seg, const Condition& y,
                     const LossConfig& cfg);

// Single-sample dispatch on cfg.kind. `s` and `e` are ignored by losses that do not use them.
LossReport evaluate_loss(const ScoreModel& model, const Vec& z0, double t, double s, double e,
                         const Vec& noise, const Segmentation& seg, const Condition& y,
                         const LossConfig& cfg);

struct SdsDecomposition {
  double sds = 0.0;        // omega(t) || eps^ - eps* ||^2
  double sctd_form = 0.0;  // b(t) || self + w cross + generative prior ||^2, conditional G
  double regrouped = 0.0;  // b(t) || self + (w+1) cross + generative prior ||^2, null G
  double weight_bridge = 0.0;  // b(t) * noise_coeff(t, s_m)^2, equals omega(t)
};

/// Evaluates SDS and its segmented-consistency rewritings at the same point
/// (z_t = alpha_t z0 + sigma_t eps*, z^_s = phi(z_t, t, s, y)).
SdsDecomposition sds_as_sctd_decomposition(const ScoreModel& model, const Vec& z0, double t,
                                           double s, const Vec& noise, const Segmentation& seg,
                                           const Condition& y, double guidance_scale,
                                           Weighting weighting);

/// Norm gap between the two target-dependent exact eps averages
///   int_{lambda_t}^{lambda_e} e^{-lambda} eps(z_lambda) dlambda / int_{lambda_t}^{lambda_e} e^{-lambda} dlambda
/// for targets e and e' along the exact trajectory through z_t. Substituting
/// kappa = e^{-lambda} turns each into the plain mean of eps over kappa in [kappa_e, kappa_t],
/// evaluated by composite Simpson on n_grid nodes with RK4 transport between nodes.
double gcs_flaw_probe(const ScoreModel& model, const Vec& z_t, double t, double e,
                      double e_prime, const Condition& y, int n_grid);

}  // namespace sctd
