#include "sctd/solver.hpp"

#include <cmath>
#include <string>

namespace sctd {

Vec phi(const ScoreModel& model, const Vec& z, double t, double s, const Condition& y) {
  const DdimCoefficients k = model.coefficients(t, s);
  if (t == s) return z;
  return k.scale * z - k.noise_coeff * model.epsilon(z, t, y);
}

Propagated phi_with_jacobian(const ScoreModel& model, const Vec& z, double t, double s,
                             const Condition& y) {
  const DdimCoefficients k = model.coefficients(t, s);
  const Propagated eps = model.epsilon_with_jacobian(z, t, y);
  Propagated out;
  out.value = k.scale * z - k.noise_coeff * eps.value;
  out.jacobian = k.scale * Mat::Identity(z.size(), z.size()) - k.noise_coeff * eps.jacobian;
  return out;
}

Vec phi_chain(const ScoreModel& model, const Vec& z, double t, double s, const Condition& y,
              int n_steps) {
  if (n_steps < 1) throw PreconditionError("phi_chain needs n_steps >= 1");
  Vec x = z;
  for (int i = 0; i < n_steps; ++i) {
    const double from = t + (s - t) * static_cast<double>(i) / n_steps;
    const double to = i + 1 == n_steps ? s : t + (s - t) * static_cast<double>(i + 1) / n_steps;
    x = phi(model, x, from, to, y);
  }
  return x;
}

Vec reference_solve(const ScoreModel& model, const Vec& z, double t, double s,
                    const Condition& y, int n_steps) {
  if (n_steps < 1) throw PreconditionError("reference_solve needs n_steps >= 1");
  const NoiseSchedule& sched = model.schedule;
  const double lambda_t = sched.log_snr(t);
  const double lambda_s = sched.log_snr(s);
  if (t == s) return z;

  // Right-hand side dx/dkappa = eps(alpha(kappa) x, ...).
  auto rhs = [&](double kappa, const Vec& x) {
    const double a = alpha_from_kappa(kappa);
    return model.prior.epsilon(a * x, a, sigma_from_kappa(kappa), y);
  };

  Vec x = z / sched.alpha(t);
  double kappa = std::exp(-lambda_t);
  for (int i = 1; i <= n_steps; ++i) {
    const double lambda_next =
        i == n_steps ? lambda_s : lambda_t + (lambda_s - lambda_t) * static_cast<double>(i) / n_steps;
    const double kappa_next = std::exp(-lambda_next);
    const double h = kappa_next - kappa;
    const Vec k1 = rhs(kappa, x);
    const Vec k2 = rhs(kappa + 0.5 * h, x + 0.5 * h * k1);
    const Vec k3 = rhs(kappa + 0.5 * h, x + 0.5 * h * k2);
    const Vec k4 = rhs(kappa_next, x + h * k3);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    kappa = kappa_next;
  }
  return sched.alpha(s) * x;
}

namespace {

void check_forward_order(double edge, double t, double s) {
  if (!(edge <= s && s <= t)) {
    throw PreconditionError("dynamic_forward requires edge <= s <= t (got edge=" +
                            std::to_string(edge) + ", s=" + std::to_string(s) +
                            ", t=" + std::to_string(t) + ")");
  }
}

}  // namespace

Vec dynamic_forward(const ScoreModel& model, const Vec& z_edge, double edge, double t, double s,
                    double threshold) {
  check_forward_order(edge, t, s);
  const Condition null = Condition::unconditional();
  if (t > threshold) {
    return phi(model, phi(model, z_edge, edge, s, null), s, t, null);
  }
  return phi(model, z_edge, edge, t, null);
}

Propagated dynamic_forward_with_jacobian(const ScoreModel& model, const Vec& z_edge,
                                         double edge, double t, double s, double threshold) {
  check_forward_order(edge, t, s);
  const Condition null = Condition::unconditional();
  if (t > threshold) {
    const Propagated first = phi_with_jacobian(model, z_edge, edge, s, null);
    const Propagated second = phi_with_jacobian(model, first.value, s, t, null);
    return {second.value, second.jacobian * first.jacobian};
  }
  return phi_with_jacobian(model, z_edge, edge, t, null);
}

}  // namespace sctd
