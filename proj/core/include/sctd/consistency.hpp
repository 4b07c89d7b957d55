#pragma once

#include <string_view>
#include <vector>

#include "sctd/prior.hpp"
#include "sctd/types.hpp"

namespace sctd {

enum class SegmentationStrategy { kEqual, kIncreasing };

SegmentationStrategy parse_segmentation_strategy(std::string_view name);
std::string_view to_string(SegmentationStrategy strategy);

struct SegmentLocation {
  int index = 0;
  double start = 0.0;  // nominal left edge s_m
  double end = 0.0;    // nominal right edge s_{m+1}
};

/// Partition of the nominal axis [0, horizon] into `count` sub-trajectories.
///
/// Equal: every segment has length horizon/count.
/// Increasing: length_m = t_tau + 2m(horizon - count*t_tau) / (count(count-1)), so the first
/// segment has length t_tau and lengths grow linearly; t_tau = horizon/count recovers Equal.
class Segmentation {
 public:
  static Segmentation build(SegmentationStrategy strategy, int count, double horizon,
                            double t_tau);

  SegmentationStrategy strategy() const { return strategy_; }
  int count() const { return static_cast<int>(edges_.size()) - 1; }
  double horizon() const { return edges_.back(); }
  double t_tau() const { return t_tau_; }
  const std::vector<double>& edges() const { return edges_; }
  std::vector<double> lengths() const;

  // Largest edge s_m <= t among s_0..s_{N-1}; t = horizon belongs to the last segment.
  SegmentLocation locate(double t) const;

  // Edge m intersected with the schedule domain: s_0 -> t_min, s_N -> t_max.
  double edge_time(int m, const NoiseSchedule& schedule) const;

 private:
  Segmentation(SegmentationStrategy strategy, std::vector<double> edges, double t_tau)
      : strategy_(strategy), edges_(std::move(edges)), t_tau_(t_tau) {}

  SegmentationStrategy strategy_;
  std::vector<double> edges_;
  double t_tau_;
};

// F(z, t, y) = (z - sigma_t eps(z, t, y)) / alpha_t: one-step estimate of the clean point.
Vec f_theta(const ScoreModel& model, const Vec& z, double t, const Condition& y);
Propagated f_theta_with_jacobian(const ScoreModel& model, const Vec& z, double t,
                                 const Condition& y);

// G^m(z, t, y): one-step solver map from t back to the segment edge s_m <= t.
Vec g_theta_m(const ScoreModel& model, const Vec& z, double t, double edge, const Condition& y);
Propagated g_theta_m_with_jacobian(const ScoreModel& model, const Vec& z, double t, double edge,
                                   const Condition& y);

}  // namespace sctd
