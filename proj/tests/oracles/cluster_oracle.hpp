#pragma once

// Brute-force clustering criterion: every assignment of n points to k
// labels is scored with its centroids, which are optimal for the squared
// Euclidean criterion once the partition is fixed.

#include <cstddef>
#include <limits>
#include <vector>

namespace oracle {

inline double partition_cost(const std::vector<std::vector<double>>& pts, const std::vector<int>& part, int k) {
  const std::size_t m = pts.front().size();
  std::vector<std::vector<double>> sum(static_cast<std::size_t>(k), std::vector<double>(m, 0.0));
  std::vector<double> count(static_cast<std::size_t>(k), 0.0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    count[static_cast<std::size_t>(part[i])] += 1.0;
    for (std::size_t d = 0; d < m; ++d) {
      sum[static_cast<std::size_t>(part[i])][d] += pts[i][d];
    }
  }
  double cost = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto c = static_cast<std::size_t>(part[i]);
    for (std::size_t d = 0; d < m; ++d) {
      const double diff = pts[i][d] - sum[c][d] / count[c];
      cost += diff * diff;
    }
  }
  return cost;
}

/// Minimum criterion over all partitions into at most k non-empty groups.
inline double best_criterion(const std::vector<std::vector<double>>& pts, int k) {
  const std::size_t n = pts.size();
  std::vector<int> part(n, 0);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    best = std::min(best, partition_cost(pts, part, k));
    std::size_t i = 0;
    while (i < n && part[i] == k - 1) {
      part[i] = 0;
      ++i;
    }
    if (i == n) {
      break;
    }
    ++part[i];
  }
  return best;
}

/// sum_i min_j ||x_i - c_j||^2 computed directly.
inline double criterion(const std::vector<std::vector<double>>& pts, const std::vector<std::vector<double>>& centers) {
  double total = 0.0;
  for (const auto& p : pts) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : centers) {
      double d = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        d += (p[i] - c[i]) * (p[i] - c[i]);
      }
      best = std::min(best, d);
    }
    total += best;
  }
  return total;
}

} // namespace oracle
