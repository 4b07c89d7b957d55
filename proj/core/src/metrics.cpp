#include "sctd/metrics.hpp"

#include <algorithm>
#include <limits>

namespace sctd {

namespace {

struct Search {
  const Mat& dist;
  std::vector<bool> used;
  std::vector<std::size_t> current;
  std::vector<std::size_t> best;
  double best_cost = std::numeric_limits<double>::infinity();

  void run(std::size_t target, double cost) {
    if (cost >= best_cost) return;
    if (target == current.size()) {
      best_cost = cost;
      best = current;
      return;
    }
    for (std::size_t p = 0; p < used.size(); ++p) {
      if (used[p]) continue;
      used[p] = true;
      current[target] = p;
      run(target + 1, cost + dist(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(target)));
      used[p] = false;
    }
  }
};

}  // namespace

RecoveryMetric recovery_metric(const std::vector<Vec>& points, const std::vector<Vec>& targets) {
  if (points.size() < targets.size()) {
    throw PreconditionError("recovery metric needs at least as many points as targets");
  }
  const auto n_points = static_cast<Eigen::Index>(points.size());
  const auto n_targets = static_cast<Eigen::Index>(targets.size());
  Mat dist(n_points, n_targets);
  for (Eigen::Index p = 0; p < n_points; ++p) {
    for (Eigen::Index j = 0; j < n_targets; ++j) {
      if (points[p].size() != targets[j].size()) {
        throw PreconditionError("point and target dimensions differ");
      }
      dist(p, j) = (points[p] - targets[j]).norm();
    }
  }

  RecoveryMetric out;
  out.assignment.assign(targets.size(), 0);
  if (targets.empty()) return out;

  if (points.size() <= kExhaustiveAssignmentLimit) {
    Search search{dist, std::vector<bool>(points.size(), false),
                  std::vector<std::size_t>(targets.size(), 0), {}};
    search.run(0, 0.0);
    out.assignment = search.best;
  } else {
    std::vector<bool> point_used(points.size(), false);
    std::vector<bool> target_used(targets.size(), false);
    for (std::size_t round = 0; round < targets.size(); ++round) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t bp = 0;
      std::size_t bt = 0;
      for (std::size_t j = 0; j < targets.size(); ++j) {
        if (target_used[j]) continue;
        for (std::size_t p = 0; p < points.size(); ++p) {
          if (point_used[p]) continue;
          const double d = dist(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(j));
          if (d < best) {
            best = d;
            bp = p;
            bt = j;
          }
        }
      }
      point_used[bp] = true;
      target_used[bt] = true;
      out.assignment[bt] = bp;
    }
  }

  for (std::size_t j = 0; j < targets.size(); ++j) {
    const double d = dist(static_cast<Eigen::Index>(out.assignment[j]), static_cast<Eigen::Index>(j));
    out.assignment_cost += d;
    out.max_point_error = std::max(out.max_point_error, d);
  }
  return out;
}

double min_separation(const std::vector<Vec>& targets) {
  double best = targets.size() < 2 ? 0.0 : std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < targets.size(); ++i) {
    for (std::size_t j = i + 1; j < targets.size(); ++j) {
      best = std::min(best, (targets[i] - targets[j]).norm());
    }
  }
  return best;
}

}  // namespace sctd
