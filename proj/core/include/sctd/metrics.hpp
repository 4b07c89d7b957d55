#pragma once

#include <cstddef>
#include <vector>

#include "sctd/types.hpp"

namespace sctd {

struct RecoveryMetric {
  double assignment_cost = 0.0;    // sum of matched Euclidean distances
  double max_point_error = 0.0;    // largest matched distance
  std::vector<std::size_t> assignment;  // assignment[j] = point matched to target j
};

// Largest number of points for which the one-to-one matching is solved exhaustively.
inline constexpr std::size_t kExhaustiveAssignmentLimit = 8;

/// Minimum-cost one-to-one matching of every target to a distinct point.
///
/// Up to kExhaustiveAssignmentLimit points the optimum is found by enumerating all
/// injective maps. Beyond that the greedy rule repeatedly matches the globally closest
/// unmatched (point, target) pair, ties broken by lowest target then lowest point index;
/// this is not guaranteed optimal.
RecoveryMetric recovery_metric(const std::vector<Vec>& points, const std::vector<Vec>& targets);

// Smallest pairwise distance between distinct targets; 0 for fewer than two.
double min_separation(const std::vector<Vec>& targets);

}  // namespace sctd
