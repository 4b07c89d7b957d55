#include "sctd/losses.hpp"

#include <cmath>
#include <string>

#include "sctd/solver.hpp"

namespace sctd {

LossKind parse_loss_kind(std::string_view name) {
  if (name == "sds") return LossKind::kSds;
  if (name == "cds") return LossKind::kCds;
  if (name == "gcs") return LossKind::kGcs;
  if (name == "sctd") return LossKind::kSctd;
  throw PreconditionError("unknown loss kind '" + std::string(name) + "'");
}

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kSds:
      return "sds";
    case LossKind::kCds:
      return "cds";
    case LossKind::kGcs:
      return "gcs";
    case LossKind::kSctd:
      return "sctd";
  }
  return "unknown";
}

Weighting parse_weighting(std::string_view name) {
  if (name == "constant") return Weighting::kConstant;
  if (name == "sigma_sq") return Weighting::kSigmaSquared;
  throw PreconditionError("unknown weighting '" + std::string(name) + "'");
}

std::string_view to_string(Weighting weighting) {
  return weighting == Weighting::kConstant ? "constant" : "sigma_sq";
}

void LossConfig::validate() const {
  if (!std::isfinite(guidance_scale) || guidance_scale < 0.0) {
    throw PreconditionError("guidance_scale must be finite and >= 0");
  }
  if (!(gcs_weights.cc >= 0.0 && gcs_weights.cg >= 0.0 && gcs_weights.cp >= 0.0)) {
    throw PreconditionError("gcs weights must be >= 0");
  }
  if (!std::isfinite(forward_threshold)) {
    throw PreconditionError("forward_threshold must be finite");
  }
}

double time_weight(const NoiseSchedule& schedule, Weighting weighting, double t) {
  if (weighting == Weighting::kSigmaSquared) {
    const double sigma = schedule.sigma(t);
    return sigma * sigma;
  }
  return 1.0;
}

namespace {

const Condition kNull = Condition::unconditional();

// Prompt branches of CDS and GCS carry the guidance: eps^ = eps(y) + w (eps(y) - eps(null)).
Propagated guided_epsilon(const ScoreModel& model, const Vec& z, double t, const Condition& y,
                          double guidance_scale) {
  if (y.is_unconditional()) return model.epsilon_with_jacobian(z, t, y);
  return model.epsilon_cfg_with_jacobian(z, t, y, guidance_scale);
}

Vec guided_value(const ScoreModel& model, const Vec& z, double t, const Condition& y,
                 double guidance_scale) {
  if (y.is_unconditional()) return model.epsilon(z, t, y);
  return model.epsilon_cfg(z, t, y, guidance_scale);
}

Vec guided_phi(const ScoreModel& model, const Vec& z, double t, double s, const Condition& y,
               double guidance_scale) {
  const DdimCoefficients k = model.coefficients(t, s);
  return k.scale * z - k.noise_coeff * guided_value(model, z, t, y, guidance_scale);
}

Vec guided_f(const ScoreModel& model, const Vec& z, double t, const Condition& y,
             double guidance_scale) {
  const double alpha = model.schedule.alpha(t);
  const double sigma = model.schedule.sigma(t);
  return (z - sigma * guided_value(model, z, t, y, guidance_scale)) / alpha;
}

Vec diffuse(const ScoreModel& model, const Vec& z0, double t, const Vec& noise) {
  return model.schedule.alpha(t) * z0 + model.schedule.sigma(t) * noise;
}

void check_noise(const Vec& z0, const Vec& noise) {
  if (z0.size() != noise.size()) {
    throw PreconditionError("noise and z0 dimensions differ");
  }
}

}  // namespace

LossReport sds_loss(const ScoreModel& model, const Vec& z0, double t, const Vec& noise,
                    const Condition& y, const LossConfig& cfg) {
  check_noise(z0, noise);
  const double alpha = model.schedule.alpha(t);
  const double weight = time_weight(model.schedule, cfg.weighting, t);
  const Vec z_t = diffuse(model, z0, t, noise);

  LossReport report;
  if (cfg.sds_omit_jacobian) {
    const Vec residual = model.epsilon_cfg(z_t, t, y, cfg.guidance_scale) - noise;
    report.total = weight * residual.squaredNorm();
    report.terms[std::string(term::kNoiseResidual)] = residual.squaredNorm();
    report.grad_z0 = 2.0 * weight * alpha * residual;
  } else {
    const Propagated eps = model.epsilon_cfg_with_jacobian(z_t, t, y, cfg.guidance_scale);
    const Vec residual = eps.value - noise;
    report.total = weight * residual.squaredNorm();
    report.terms[std::string(term::kNoiseResidual)] = residual.squaredNorm();
    report.grad_z0 = 2.0 * weight * alpha * (eps.jacobian.transpose() * residual);
  }
  return report;
}

LossReport cds_loss(const ScoreModel& model, const Vec& z0, double t, double s,
                    const Vec& noise, const Condition& y, const LossConfig& cfg) {
  check_noise(z0, noise);
  if (s > t) throw PreconditionError("cds_loss requires s <= t");
  const double alpha = model.schedule.alpha(t);
  const double sigma = model.schedule.sigma(t);
  const double weight =
      time_weight(model.schedule, cfg.weighting, t) * (alpha / sigma) * (alpha / sigma);
  const Vec z_t = diffuse(model, z0, t, noise);

  const Vec z_back = guided_phi(model, z_t, t, s, y, cfg.guidance_scale);
  const Vec target = guided_f(model, z_back, s, y, cfg.guidance_scale);

  const Propagated eps = guided_epsilon(model, z_t, t, y, cfg.guidance_scale);
  const Vec online = (z_t - sigma * eps.value) / alpha;
  // dF/dz0 = (I - sigma J_eps)/alpha * alpha
  const Mat jac = Mat::Identity(z0.size(), z0.size()) - sigma * eps.jacobian;

  const Vec residual = online - target;
  LossReport report;
  report.terms[std::string(term::kSelfConsistency)] = residual.squaredNorm();
  report.total = weight * residual.squaredNorm();
  report.grad_z0 = 2.0 * weight * (jac.transpose() * residual);
  return report;
}

LossReport gcs_loss(const ScoreModel& model, const Vec& z0, double t, double s, double e,
                    const Vec& noise, const Condition& y, const LossConfig& cfg) {
  check_noise(z0, noise);
  if (!(e <= s && s <= t && e < t)) {
    throw PreconditionError("gcs_loss requires e <= s <= t and e < t");
  }
  const double omega = cfg.guidance_scale;
  const double alpha_e = model.schedule.alpha(e);
  const Vec z_e = diffuse(model, z0, e, noise);

  const Propagated up1 = phi_with_jacobian(model, z_e, e, s, kNull);
  const Propagated up2 = phi_with_jacobian(model, up1.value, s, t, kNull);
  const Vec& z_fwd = up2.value;
  const Mat jac_fwd = up2.jacobian * up1.jacobian * alpha_e;
  const Vec z_back = guided_phi(model, z_fwd, t, s, y, omega);

  // Compact consistency: G(z~_t, t, e, null) against sg(G(z^_s, s, e, null)).
  const Propagated g_online = phi_with_jacobian(model, z_fwd, t, e, kNull);
  const Mat jac_cc = g_online.jacobian * jac_fwd;
  const Vec cc_target = phi(model, z_back, s, e, kNull);

  // Conditional guidance and pixel terms pull F(z_e, e, null) toward the guided estimate.
  const Propagated f_online = f_theta_with_jacobian(model, z_e, e, kNull);
  const Mat jac_f = f_online.jacobian * alpha_e;
  const Vec g_cond = guided_phi(model, z_fwd, t, e, y, omega);
  const Vec cg_target = f_theta(model, g_cond, e, kNull);
  const Vec cp_target = guided_f(model, g_cond, e, y, omega);

  const Vec r_cc = g_online.value - cc_target;
  const Vec r_cg = f_online.value - cg_target;
  const Vec r_cp = f_online.value - cp_target;
  const GcsWeights& w = cfg.gcs_weights;

  LossReport report;
  report.terms[std::string(term::kCc)] = r_cc.squaredNorm();
  report.terms[std::string(term::kCg)] = r_cg.squaredNorm();
  report.terms[std::string(term::kCp)] = r_cp.squaredNorm();
  report.total = w.cc * r_cc.squaredNorm() + w.cg * r_cg.squaredNorm() + w.cp * r_cp.squaredNorm();
  report.grad_z0 = 2.0 * w.cc * (jac_cc.transpose() * r_cc) +
                   2.0 * (jac_f.transpose() * (w.cg * r_cg + w.cp * r_cp));
  return report;
}

SctdParts sctd_parts(const ScoreModel& model, const Vec& z0, double t, double s,
                     const Vec& noise, const Segmentation& seg, const Condition& y,
                     const LossConfig& cfg) {
  check_noise(z0, noise);
  const NoiseSchedule& sched = model.schedule;
  SctdParts parts;
  parts.segment = seg.locate(t * seg.horizon() / sched.horizon());
  parts.edge = seg.edge_time(parts.segment.index, sched);
  const double right = seg.edge_time(parts.segment.index + 1, sched);
  if (!(parts.edge <= s && s <= t && parts.edge < t && t <= right)) {
    throw PreconditionError("sctd_loss requires s_m <= s <= t <= s_{m+1} with s_m < t (s_m=" +
                            std::to_string(parts.edge) + ", s=" + std::to_string(s) +
                            ", t=" + std::to_string(t) + ")");
  }

  const double alpha_edge = sched.alpha(parts.edge);
  const double nc = model.coefficients(t, parts.edge).noise_coeff;
  parts.weight = time_weight(sched, cfg.weighting, t) / (nc * nc);
  parts.z_edge = diffuse(model, z0, parts.edge, noise);

  const Propagated fwd =
      dynamic_forward_with_jacobian(model, parts.z_edge, parts.edge, t, s, cfg.forward_threshold);
  parts.z_forward = fwd.value;
  parts.z_back = phi(model, parts.z_forward, t, s, y);

  const Propagated g = g_theta_m_with_jacobian(model, parts.z_forward, t, parts.edge, kNull);
  parts.online = {g.value, g.jacobian * fwd.jacobian * alpha_edge};
  parts.self_target = g_theta_m(model, parts.z_back, s, parts.edge, kNull);
  parts.cross_target = g_theta_m(model, parts.z_forward, t, parts.edge, y);

  if (cfg.use_approximation) {
    const auto d = z0.size();
    parts.self_online = {parts.z_edge, alpha_edge * Mat::Identity(d, d)};
  } else {
    parts.self_online = parts.online;
  }
  return parts;
}

LossReport reduce_sctd(const SctdParts& parts, double guidance_scale) {
  const double k = (guidance_scale + 1.0) * (guidance_scale + 1.0);
  const Vec r_self = parts.self_online.value - parts.self_target;
  const Vec r_cross = parts.online.value - parts.cross_target;

  LossReport report;
  report.terms[std::string(term::kSelfConsistency)] = r_self.squaredNorm();
  report.terms[std::string(term::kCrossConsistency)] = r_cross.squaredNorm();
  report.total = parts.weight * (r_self.squaredNorm() + k * r_cross.squaredNorm());
  report.grad_z0 = 2.0 * parts.weight *
                   (parts.self_online.jacobian.transpose() * r_self +
                    k * (parts.online.jacobian.transpose() * r_cross));
  return report;
}

LossReport sctd_loss(const ScoreModel& model, const Vec& z0, double t, double s,
                     const Vec& noise, const Segmentation& seg, const Condition& y,
                     const LossConfig& cfg) {
  return reduce_sctd(sctd_parts(model, z0, t, s, noise, seg, y, cfg), cfg.guidance_scale);
}

LossReport evaluate_loss(const ScoreModel& model, const Vec& z0, double t, double s, double e,
                         const Vec& noise, const Segmentation& seg, const Condition& y,
                         const LossConfig& cfg) {
  switch (cfg.kind) {
    case LossKind::kSds:
      return sds_loss(model, z0, t, noise, y, cfg);
    case LossKind::kCds:
      return cds_loss(model, z0, t, s, noise, y, cfg);
    case LossKind::kGcs:
      return gcs_loss(model, z0, t, s, e, noise, y, cfg);
    case LossKind::kSctd:
      return sctd_loss(model, z0, t, s, noise, seg, y, cfg);
  }
  throw PreconditionError("unhandled loss kind");
}

SdsDecomposition sds_as_sctd_decomposition(const ScoreModel& model, const Vec& z0, double t,
                                           double s, const Vec& noise, const Segmentation& seg,
                                           const Condition& y, double guidance_scale,
                                           Weighting weighting) {
  check_noise(z0, noise);
  const NoiseSchedule& sched = model.schedule;
  const SegmentLocation loc = seg.locate(t * seg.horizon() / sched.horizon());
  const double edge = seg.edge_time(loc.index, sched);
  if (!(edge <= s && s <= t && edge < t)) {
    throw PreconditionError("decomposition requires s_m <= s <= t with s_m < t");
  }
  const double omega = guidance_scale;
  const double weight = time_weight(sched, weighting, t);
  const double nc = model.coefficients(t, edge).noise_coeff;
  const double b = weight / (nc * nc);

  const Vec z_t = diffuse(model, z0, t, noise);
  const Vec z_edge = diffuse(model, z0, edge, noise);
  const Vec z_back = phi(model, z_t, t, s, y);

  const Vec gy_back = g_theta_m(model, z_back, s, edge, y);
  const Vec gy_t = g_theta_m(model, z_t, t, edge, y);
  const Vec g0_back = g_theta_m(model, z_back, s, edge, kNull);
  const Vec g0_t = g_theta_m(model, z_t, t, edge, kNull);

  SdsDecomposition out;
  out.sds = weight * (model.epsilon_cfg(z_t, t, y, omega) - noise).squaredNorm();
  out.sctd_form =
      b * ((gy_back - gy_t) + omega * (g0_t - gy_t) + (z_edge - gy_back)).squaredNorm();
  out.regrouped =
      b * ((g0_back - g0_t) + (omega + 1.0) * (g0_t - gy_t) + (z_edge - g0_back)).squaredNorm();
  out.weight_bridge = b * nc * nc;
  return out;
}

namespace {

// Mean of eps over kappa in [kappa_target, kappa_t] along the trajectory through z_t,
// written as the e^{-lambda}-weighted average over lambda in [lambda_t, lambda_target].
Vec exact_epsilon_average(const ScoreModel& model, const Vec& z_t, double t, double target,
                          const Condition& y, int nodes) {
  const NoiseSchedule& sched = model.schedule;
  const double lambda_t = sched.log_snr(t);
  const double lambda_target = sched.log_snr(target);
  const double h = (lambda_target - lambda_t) / (nodes - 1);
  constexpr int kSubsteps = 4;

  auto eps_at = [&](double kappa, const Vec& x) {
    const double a = alpha_from_kappa(kappa);
    return model.prior.epsilon(a * x, a, sigma_from_kappa(kappa), y);
  };

  Vec x = z_t / sched.alpha(t);
  Vec numerator = Vec::Zero(z_t.size());
  double denominator = 0.0;
  for (int j = 0; j < nodes; ++j) {
    const double lambda = lambda_t + h * j;
    const double kappa = std::exp(-lambda);
    if (j > 0) {
      // RK4 transport in kappa from the previous node.
      const double kappa_prev = std::exp(-(lambda - h));
      for (int k = 0; k < kSubsteps; ++k) {
        const double k0 = kappa_prev + (kappa - kappa_prev) * k / kSubsteps;
        const double k1 = kappa_prev + (kappa - kappa_prev) * (k + 1) / kSubsteps;
        const double dk = k1 - k0;
        const Vec a1 = eps_at(k0, x);
        const Vec a2 = eps_at(k0 + 0.5 * dk, x + 0.5 * dk * a1);
        const Vec a3 = eps_at(k0 + 0.5 * dk, x + 0.5 * dk * a2);
        const Vec a4 = eps_at(k1, x + dk * a3);
        x += (dk / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
      }
    }
    const double simpson = (j == 0 || j == nodes - 1) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
    numerator += simpson * kappa * eps_at(kappa, x);
    denominator += simpson * kappa;
  }
  return numerator / denominator;
}

}  // namespace

double gcs_flaw_probe(const ScoreModel& model, const Vec& z_t, double t, double e,
                      double e_prime, const Condition& y, int n_grid) {
  if (!(e <= e_prime && e_prime < t)) {
    throw PreconditionError("gcs_flaw_probe requires e <= e' < t");
  }
  if (n_grid < 3) throw PreconditionError("gcs_flaw_probe needs n_grid >= 3");
  const int nodes = n_grid % 2 == 1 ? n_grid : n_grid + 1;
  const Vec near = exact_epsilon_average(model, z_t, t, e_prime, y, nodes);
  const Vec far = exact_epsilon_average(model, z_t, t, e, y, nodes);
  return (far - near).norm();
}

}  // namespace sctd
