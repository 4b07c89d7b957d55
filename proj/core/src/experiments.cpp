#include "sctd/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "sctd/harness.hpp"
#include "sctd/solver.hpp"

namespace sctd {

SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw PreconditionError("fit_loglog needs two or more paired samples");
  }
  const double n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0)) throw PreconditionError("fit_loglog needs positive data");
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw PreconditionError("fit_loglog needs distinct x values");
  SlopeFit fit;
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / n;
  return fit;
}

namespace {

Vec gaussian(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Vec out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = normal(rng);
  return out;
}

double relative_gap(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), std::numeric_limits<double>::min()});
  return std::abs(a - b) / scale;
}

double relative_gap(const Vec& a, const Vec& b) {
  const double scale = std::max({a.norm(), b.norm(), std::numeric_limits<double>::min()});
  return (a - b).norm() / scale;
}

}  // namespace

Theorem1Report verify_theorem1(const ScoreModel& model, const Condition& y,
                               const Theorem1Options& options, int jobs) {
  if (options.segment_counts.empty() || options.step_sizes.empty()) {
    throw PreconditionError("verify_theorem1 needs non-empty grids");
  }
  if (options.trajectories < 1 || options.time_samples < 1 || options.reference_steps < 1) {
    throw PreconditionError("verify_theorem1 needs positive sample counts");
  }
  for (double dt : options.step_sizes) {
    if (!(dt > 0.0)) throw PreconditionError("verify_theorem1 step sizes must be positive");
  }
  const NoiseSchedule& sched = model.schedule;
  const std::vector<std::size_t> active = model.prior.active(y);

  // Trajectory seeds are shared by every cell.
  std::mt19937_64 rng(options.seed);
  std::vector<Vec> clean;
  std::vector<Vec> noise;
  for (int j = 0; j < options.trajectories; ++j) {
    const MixtureComponent& c = model.prior.components()[active[j % active.size()]];
    clean.push_back(c.mean + c.scale * gaussian(c.mean.size(), rng));
    noise.push_back(gaussian(c.mean.size(), rng));
  }

  const std::size_t n_dt = options.step_sizes.size();
  Theorem1Report report;
  report.cells.resize(options.segment_counts.size() * n_dt);
  run_parallel(static_cast<int>(report.cells.size()), jobs, [&](int cell_index) {
    const int ns = options.segment_counts[cell_index / n_dt];
    const double dt = options.step_sizes[cell_index % n_dt];
    const Segmentation seg =
        Segmentation::build(SegmentationStrategy::kEqual, ns, sched.horizon(), 0.0);
    double sup = 0.0;
    for (int m = 0; m < ns; ++m) {
      const double edge = seg.edge_time(m, sched);
      const double right = seg.edge_time(m + 1, sched);
      for (std::size_t j = 0; j < clean.size(); ++j) {
        const Vec z_edge = sched.alpha(edge) * clean[j] + sched.sigma(edge) * noise[j];
        for (int i = 1; i <= options.time_samples; ++i) {
          const double t = edge + (right - edge) * i / options.time_samples;
          const int steps = std::max(1, static_cast<int>(std::ceil((t - edge) / dt - 1e-9)));
          const Vec z_t = phi_chain(model, z_edge, edge, t, y, steps);
          const Vec g = phi_chain(model, z_t, t, edge, y, steps);
          const Vec truth = reference_solve(model, z_t, t, edge, y, options.reference_steps);
          sup = std::max(sup, (g - truth).norm());
        }
      }
    }
    report.cells[cell_index] = {ns, sched.horizon() / ns, dt, sup};
  });

  const std::size_t n_seg = options.segment_counts.size();
  auto positive = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x > 0.0; });
  };
  if (n_seg >= 2) {
    for (std::size_t k = 0; k < n_dt; ++k) {
      std::vector<double> xs, ys;
      for (std::size_t i = 0; i < n_seg; ++i) {
        xs.push_back(report.cells[i * n_dt + k].segment_length);
        ys.push_back(report.cells[i * n_dt + k].sup_error);
      }
      report.length_slopes.push_back(positive(ys) ? fit_loglog(xs, ys) : SlopeFit{});
    }
  }
  if (n_dt >= 2) {
    for (std::size_t i = 0; i < n_seg; ++i) {
      std::vector<double> xs, ys;
      for (std::size_t k = 0; k < n_dt; ++k) {
        xs.push_back(report.cells[i * n_dt + k].dt);
        ys.push_back(report.cells[i * n_dt + k].sup_error);
      }
      report.dt_slopes.push_back(positive(ys) ? fit_loglog(xs, ys) : SlopeFit{});
    }
  }
  return report;
}

SolverOrderReport solver_order(const ScoreModel& model, const Condition& y,
                               const SolverOrderOptions& options) {
  if (options.phi_steps.size() < 2 || options.reference_steps.size() < 2) {
    throw PreconditionError("solver_order needs at least two step counts per solver");
  }
  const NoiseSchedule& sched = model.schedule;
  const double span = std::abs(options.t - options.s);
  if (span == 0.0) throw PreconditionError("solver_order needs t != s");

  Vec z = options.z;
  if (z.size() == 0) {
    const Vec& mean = model.prior.components()[model.prior.active(y).front()].mean;
    z = sched.alpha(options.t) * mean + sched.sigma(options.t) * Vec::Constant(mean.size(), 0.5);
  }

  SolverOrderReport report;
  const Vec truth = reference_solve(model, z, options.t, options.s, y, options.truth_steps);
  std::vector<double> hs, errs;
  for (int n : options.phi_steps) {
    const double err = (phi_chain(model, z, options.t, options.s, y, n) - truth).norm();
    report.rows.push_back({"phi", n, span / n, err});
    hs.push_back(span / n);
    errs.push_back(err);
  }
  report.phi_order = fit_loglog(hs, errs).slope;

  hs.clear();
  errs.clear();
  for (int n : options.reference_steps) {
    const Vec coarse = reference_solve(model, z, options.t, options.s, y, n);
    const Vec fine = reference_solve(model, z, options.t, options.s, y, 2 * n);
    const double err = (coarse - fine).norm();
    report.rows.push_back({"reference", n, span / n, err});
    hs.push_back(span / n);
    errs.push_back(err);
  }
  report.reference_order = fit_loglog(hs, errs).slope;
  return report;
}

std::vector<IdentityCheck> check_derivations(const ScoreModel& model, const Segmentation& seg,
                                             const Condition& y,
                                             const DerivationOptions& options) {
  if (options.draws < 1) throw PreconditionError("check_derivations needs draws >= 1");
  if (y.is_unconditional()) throw PreconditionError("check_derivations needs a prompt");
  const NoiseSchedule& sched = model.schedule;
  const Condition null = Condition::unconditional();
  const int dim = model.prior.dimension();

  std::vector<IdentityCheck> checks;
  for (const char* name : {"diffusion_identity", "cfg_regrouping", "weight_bridge",
                           "sds_unguided", "sds_equals_sctd_form", "sds_equals_regrouped"}) {
    checks.push_back({name, 0, 0.0, options.tolerance, false});
  }
  auto record = [&](std::size_t index, double err) {
    checks[index].draws += 1;
    checks[index].max_rel_error = std::max(checks[index].max_rel_error, err);
  };

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int accepted = 0;
  while (accepted < options.draws) {
    const double t = sched.t_min() + (sched.t_max() - sched.t_min()) * unit(rng);
    const SegmentLocation loc = seg.locate(t * seg.horizon() / sched.horizon());
    const double edge = seg.edge_time(loc.index, sched);
    const double s = edge + (t - edge) * unit(rng);
    const double omega = options.max_guidance * unit(rng);
    const Weighting weighting = accepted % 2 == 0 ? Weighting::kConstant : Weighting::kSigmaSquared;
    const Vec z0 = 3.0 * gaussian(dim, rng);
    const Vec eps = gaussian(dim, rng);
    // Very short spans amplify rounding in the 1/noise_coeff weight; they carry no extra signal.
    if (t - edge < 1e-3) continue;
    ++accepted;

    const Vec z_t = sched.alpha(t) * z0 + sched.sigma(t) * eps;
    const Vec z_edge = sched.alpha(edge) * z0 + sched.sigma(edge) * eps;
    const DdimCoefficients k = model.coefficients(t, edge);
    record(0, relative_gap(Vec(k.scale * z_t - k.noise_coeff * eps), z_edge));

    const Vec eps_y = model.epsilon(z_t, t, y);
    const Vec eps_0 = model.epsilon(z_t, t, null);
    const Vec guided = (eps_y - eps) + omega * (eps_y - eps_0);
    const Vec regrouped = (eps_0 - eps) + (omega + 1.0) * (eps_y - eps_0);
    record(1, relative_gap(guided, regrouped));

    const SdsDecomposition dec =
        sds_as_sctd_decomposition(model, z0, t, s, eps, seg, y, omega, weighting);
    record(2, relative_gap(dec.weight_bridge, time_weight(sched, weighting, t)));

    const SdsDecomposition plain =
        sds_as_sctd_decomposition(model, z0, t, s, eps, seg, y, 0.0, weighting);
    const double b = time_weight(sched, weighting, t) / (k.noise_coeff * k.noise_coeff);
    const double direct = b * (z_edge - g_theta_m(model, z_t, t, edge, y)).squaredNorm();
    record(3, relative_gap(plain.sds, direct));

    record(4, relative_gap(dec.sds, dec.sctd_form));
    record(5, relative_gap(dec.sds, dec.regrouped));
  }
  for (IdentityCheck& c : checks) c.pass = c.max_rel_error <= c.tolerance;
  return checks;
}

std::vector<GcsFlawRow> gcs_flaw_grid(const ScoreModel& model, const Condition& y,
                                      const GcsFlawOptions& options) {
  if (options.n_grid < 3) throw PreconditionError("gcs_flaw_grid needs n_grid >= 3");
  const NoiseSchedule& sched = model.schedule;
  std::mt19937_64 rng(options.seed);
  const Vec& mean = model.prior.components()[model.prior.active(y).front()].mean;
  const Vec eps = gaussian(mean.size(), rng);

  std::vector<GcsFlawRow> rows;
  for (double t : options.t_values) {
    const Vec z_t = sched.alpha(t) * mean + sched.sigma(t) * eps;
    for (double e : options.e_values) {
      for (double e_prime : options.e_prime_values) {
        if (!(e <= e_prime && e_prime < t)) continue;
        GcsFlawRow row{t, e, e_prime, 0.0, 0.0};
        row.gap = gcs_flaw_probe(model, z_t, t, e, e_prime, y, options.n_grid);
        const double refined = gcs_flaw_probe(model, z_t, t, e, e_prime, y, 2 * options.n_grid - 1);
        row.noise_floor = std::abs(row.gap - refined) +
                          64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, z_t.norm());
        rows.push_back(row);
      }
    }
  }
  return rows;
}

}  // namespace sctd
