#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sctd/consistency.hpp"
#include "sctd/losses.hpp"
#include "sctd/prior.hpp"

namespace sctd {

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
};

// Least-squares line through (log x, log y).
SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

// ---------------------------------------------------------------------------
// Distillation error scaling.

struct Theorem1Options {
  std::vector<int> segment_counts{32, 64, 128, 256};
  std::vector<double> step_sizes{1.0 / 8192, 1.0 / 4096, 1.0 / 2048, 1.0 / 1024};
  int trajectories = 6;
  // Evaluation times per segment, spaced evenly up to and including the right edge.
  int time_samples = 4;
  int reference_steps = 16;
  std::uint64_t seed = 0;
};

struct Theorem1Cell {
  int segment_count = 0;
  double segment_length = 0.0;
  double dt = 0.0;
  double sup_error = 0.0;
};

struct Theorem1Report {
  std::vector<Theorem1Cell> cells;  // segment_counts-major, step_sizes-minor
  // Slope of log sup_error against log segment_length, one fit per step size.
  std::vector<SlopeFit> length_slopes;
  // Slope of log sup_error against log dt, one fit per segment count.
  std::vector<SlopeFit> dt_slopes;
};

/// For every (N_s, dt) cell: equal segmentation into N_s pieces; on each segment a
/// trajectory starts at z_{s_m} = alpha z0 + sigma eps and runs forward with first-order
/// steps of size <= dt to each evaluation time t. The consistency map G^m is the backward
/// chain with the same step, so it is exactly self-consistent along the trajectory, and
/// the error is its distance to the accurate solution from (z~_t, t) to s_m.
/// sup_error is the maximum over segments, evaluation times and trajectories.
Theorem1Report verify_theorem1(const ScoreModel& model, const Condition& y,
                               const Theorem1Options& options, int jobs);

// ---------------------------------------------------------------------------
// Solver convergence orders.

struct SolverOrderOptions {
  double t = 0.9;
  double s = 0.1;
  // Start point; empty selects alpha_t * (first active mean) + sigma_t * 0.5.
  Vec z;
  std::vector<int> phi_steps{16, 32, 64, 128, 256, 512};
  std::vector<int> reference_steps{8, 16, 32, 64};
  int truth_steps = 8192;
};

struct SolverOrderRow {
  std::string solver;  // "phi" or "reference"
  int steps = 0;
  double h = 0.0;      // |t - s| / steps
  double error = 0.0;
};

struct SolverOrderReport {
  std::vector<SolverOrderRow> rows;
  double phi_order = 0.0;
  double reference_order = 0.0;
};

/// phi error is measured against a truth_steps reference solution; the reference
/// integrator's error by step doubling, ||R(n) - R(2n)||.
SolverOrderReport solver_order(const ScoreModel& model, const Condition& y,
                               const SolverOrderOptions& options);

// ---------------------------------------------------------------------------
// Algebraic identities behind the segmented loss.

struct IdentityCheck {
  std::string name;
  int draws = 0;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct DerivationOptions {
  int draws = 200;
  double tolerance = 1e-8;
  std::uint64_t seed = 0;
  double max_guidance = 10.0;
};

/// Random-draw checks of:
///   diffusion_identity      G^m with the true noise returns z_{s_m}
///   cfg_regrouping          guided residual regrouped around the null branch
///   weight_bridge           b(t) noise_coeff(t, s_m)^2 = omega(t)
///   sds_unguided            SDS at w = 0 equals b(t) ||z_{s_m} - G^m(z_t, t, y)||^2
///   sds_equals_sctd_form    SDS equals the three-term conditional form
///   sds_equals_regrouped    SDS equals the null-branch regrouping
std::vector<IdentityCheck> check_derivations(const ScoreModel& model, const Segmentation& seg,
                                             const Condition& y,
                                             const DerivationOptions& options);

// ---------------------------------------------------------------------------
// Dependence of the GCS target on the chosen endpoint.

struct GcsFlawOptions {
  std::vector<double> t_values{0.5, 0.7, 0.9};
  std::vector<double> e_values{0.002, 0.1};
  std::vector<double> e_prime_values{0.2, 0.4};
  int n_grid = 65;
  std::uint64_t seed = 0;
};

struct GcsFlawRow {
  double t = 0.0;
  double e = 0.0;
  double e_prime = 0.0;
  double gap = 0.0;
  // Quadrature discretization estimate: |gap(n_grid) - gap(2 n_grid - 1)| plus rounding.
  double noise_floor = 0.0;
};

/// Evaluates gcs_flaw_probe on every valid (t, e, e') with e <= e' < t, at
/// z_t = alpha_t * (first active mean) + sigma_t * eps for a seeded eps.
std::vector<GcsFlawRow> gcs_flaw_grid(const ScoreModel& model, const Condition& y,
                                      const GcsFlawOptions& options);

}  // namespace sctd
