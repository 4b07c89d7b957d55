#pragma once

#include "sctd/prior.hpp"
#include "sctd/types.hpp"

namespace sctd {

// One step of the first-order PF-ODE solver (DDIM / DPM-Solver-1) from t to s:
//   z_s = (alpha_s/alpha_t) z - alpha_s (int_{lambda_t}^{lambda_s} e^{-lambda} dlambda) eps(z, t, y).
// Either direction in time is allowed.
Vec phi(const ScoreModel& model, const Vec& z, double t, double s, const Condition& y);

// phi together with d phi / dz.
Propagated phi_with_jacobian(const ScoreModel& model, const Vec& z, double t, double s,
                             const Condition& y);

// n_steps chained phi steps equally spaced in time.
Vec phi_chain(const ScoreModel& model, const Vec& z, double t, double s, const Condition& y,
              int n_steps);

/// High-accuracy oracle for the PF-ODE dz/dt = f(t) z + g(t)^2/(2 sigma_t) eps(z, t, y).
///
/// Integrates the equivalent form dx/dkappa = eps(alpha x, t(kappa), y), x = z/alpha,
/// kappa = sigma/alpha, with classical fixed-step RK4 on a grid equally spaced in
/// log-SNR. Trajectories that are straight in (kappa, x) -- e.g. any point-mass prior --
/// are integrated exactly for every n_steps.
Vec reference_solve(const ScoreModel& model, const Vec& z, double t, double s,
                    const Condition& y, int n_steps);

/// Dynamic multi-step forward sampling from the segment edge s_m to t, unconditional:
/// two steps s_m -> s -> t when t > threshold, otherwise a single step s_m -> t.
Vec dynamic_forward(const ScoreModel& model, const Vec& z_edge, double edge, double t,
                    double s, double threshold);
Propagated dynamic_forward_with_jacobian(const ScoreModel& model, const Vec& z_edge,
                                         double edge, double t, double s, double threshold);

}  // namespace sctd
