#include "sctd/consistency.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sctd/solver.hpp"

namespace sctd {

SegmentationStrategy parse_segmentation_strategy(std::string_view name) {
  if (name == "equal") return SegmentationStrategy::kEqual;
  if (name == "increasing") return SegmentationStrategy::kIncreasing;
  throw PreconditionError("unknown segmentation strategy '" + std::string(name) + "'");
}

std::string_view to_string(SegmentationStrategy strategy) {
  return strategy == SegmentationStrategy::kEqual ? "equal" : "increasing";
}

Segmentation Segmentation::build(SegmentationStrategy strategy, int count, double horizon,
                                 double t_tau) {
  if (count < 1) throw PreconditionError("segmentation needs at least one segment");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw PreconditionError("segmentation horizon must be positive");
  }
  std::vector<double> edges(count + 1);
  edges[0] = 0.0;
  if (strategy == SegmentationStrategy::kEqual) {
    for (int m = 1; m <= count; ++m) edges[m] = horizon * m / count;
  } else {
    if (count < 2) throw PreconditionError("increasing segmentation needs count >= 2");
    // A zero first length would collapse s_0 and s_1.
    if (!(t_tau > 0.0) || t_tau > horizon / count * (1.0 + 1e-12)) {
      throw PreconditionError("increasing segmentation requires 0 < t_tau <= horizon/count (t_tau=" +
                              std::to_string(t_tau) + ")");
    }
    const double growth = 2.0 * (horizon - count * t_tau) / (count * (count - 1.0));
    double acc = 0.0;
    for (int m = 0; m < count; ++m) {
      acc += t_tau + m * growth;
      edges[m + 1] = acc;
    }
  }
  edges[count] = horizon;
  return Segmentation(strategy, std::move(edges), t_tau);
}

std::vector<double> Segmentation::lengths() const {
  std::vector<double> out(count());
  for (int m = 0; m < count(); ++m) out[m] = edges_[m + 1] - edges_[m];
  return out;
}

SegmentLocation Segmentation::locate(double t) const {
  const int n = count();
  // upper_bound over s_0..s_{N-1}: first edge strictly greater than t.
  auto it = std::upper_bound(edges_.begin(), edges_.begin() + n, t);
  int m = static_cast<int>(it - edges_.begin()) - 1;
  m = std::clamp(m, 0, n - 1);
  return {m, edges_[m], edges_[m + 1]};
}

double Segmentation::edge_time(int m, const NoiseSchedule& schedule) const {
  if (m < 0 || m > count()) throw PreconditionError("segment edge index out of range");
  return schedule.clamp(edges_[m] * schedule.horizon() / horizon());
}

Vec f_theta(const ScoreModel& model, const Vec& z, double t, const Condition& y) {
  const double alpha = model.schedule.alpha(t);
  const double sigma = model.schedule.sigma(t);
  return (z - sigma * model.prior.epsilon(z, alpha, sigma, y)) / alpha;
}

Propagated f_theta_with_jacobian(const ScoreModel& model, const Vec& z, double t,
                                 const Condition& y) {
  const double alpha = model.schedule.alpha(t);
  const double sigma = model.schedule.sigma(t);
  const Propagated eps = model.prior.epsilon_with_jacobian(z, alpha, sigma, y);
  return {(z - sigma * eps.value) / alpha,
          (Mat::Identity(z.size(), z.size()) - sigma * eps.jacobian) / alpha};
}

namespace {

void check_edge(double t, double edge) {
  if (t < edge) {
    throw PreconditionError("consistency target edge " + std::to_string(edge) +
                            " lies after t=" + std::to_string(t));
  }
}

}  // namespace

Vec g_theta_m(const ScoreModel& model, const Vec& z, double t, double edge, const Condition& y) {
  check_edge(t, edge);
  return phi(model, z, t, edge, y);
}

Propagated g_theta_m_with_jacobian(const ScoreModel& model, const Vec& z, double t, double edge,
                                   const Condition& y) {
  check_edge(t, edge);
  return phi_with_jacobian(model, z, t, edge, y);
}

}  // namespace sctd
