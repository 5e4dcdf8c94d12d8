#pragma once

// Exact hard-margin separator in 2-D by geometric enumeration. The optimal
// unit normal is either the direction between two opposite-class points or
// perpendicular to the segment between two same-class points; for each
// candidate direction u the margin is (min_{+} u.x - max_{-} u.x) / 2.

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

namespace oracle {

struct MaxMargin {
  std::array<double, 2> w{}; // canonical: min_i l_i (w.x_i + b) = 1
  double b = 0.0;
  double margin = 0.0; // geometric margin 1 / ||w||
};

inline std::optional<MaxMargin> max_margin_2d(const std::vector<std::array<double, 2>>& x,
                                              const std::vector<int>& labels) {
  std::vector<std::array<double, 2>> dirs;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double dx = x[i][0] - x[j][0];
      const double dy = x[i][1] - x[j][1];
      const double len = std::hypot(dx, dy);
      if (len == 0.0) {
        continue;
      }
      if (labels[i] != labels[j]) {
        const double sgn = labels[i] > 0 ? 1.0 : -1.0;
        dirs.push_back({sgn * dx / len, sgn * dy / len});
      } else {
        dirs.push_back({-dy / len, dx / len});
        dirs.push_back({dy / len, -dx / len});
      }
    }
  }
  std::optional<MaxMargin> best;
  for (const auto& u : dirs) {
    double min_pos = INFINITY;
    double max_neg = -INFINITY;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double p = u[0] * x[i][0] + u[1] * x[i][1];
      if (labels[i] > 0) {
        min_pos = std::min(min_pos, p);
      } else {
        max_neg = std::max(max_neg, p);
      }
    }
    const double gamma = (min_pos - max_neg) / 2.0;
    if (gamma > 0.0 && (!best || gamma > best->margin)) {
      const double mid = (min_pos + max_neg) / 2.0;
      best = MaxMargin{{u[0] / gamma, u[1] / gamma}, -mid / gamma, gamma};
    }
  }
  return best;
}

} // namespace oracle
