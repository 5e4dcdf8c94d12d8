#pragma once

// Random formulas, signals and trees for property tests.

#include "svmstl/inference.hpp"
#include "svmstl/logic.hpp"
#include "svmstl/random.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <vector>

namespace gen {

/// Random formula of nesting depth <= depth whose horizon is <= max_horizon.
inline svmstl::Formula formula(svmstl::Rng& rng, std::size_t depth, std::size_t dims, std::size_t max_horizon,
                               bool allow_weighted = false) {
  using svmstl::Formula;
  const auto atom = [&] {
    const auto j = 1 + rng.index(dims);
    const auto cmp = rng.index(2) ? svmstl::Comparison::greater : svmstl::Comparison::less_equal;
    const double r = std::round(rng.uniform(-2.0, 2.0) * 4.0) / 4.0;
    return Formula::atom(j, cmp, r);
  };
  if (depth == 0) {
    const auto roll = rng.index(20);
    if (roll == 0) {
      return Formula::truth();
    }
    if (roll == 1) {
      return Formula::falsity();
    }
    return atom();
  }
  switch (rng.index(allow_weighted ? 8 : 6)) {
    case 0: return atom();
    case 1: return Formula::negation(formula(rng, depth - 1, dims, max_horizon, allow_weighted));
    case 2:
    case 3: {
      std::vector<Formula> kids;
      const auto n = 2 + rng.index(2);
      for (std::size_t i = 0; i < n; ++i) {
        kids.push_back(formula(rng, depth - 1, dims, max_horizon, allow_weighted));
      }
      return rng.index(2) ? Formula::conjunction(std::move(kids)) : Formula::disjunction(std::move(kids));
    }
    case 4:
    case 5: {
      const std::size_t budget = max_horizon;
      const std::size_t a = rng.index(budget / 2 + 1);
      const std::size_t b = a + rng.index(budget / 2 - std::min(budget / 2, a) + 1);
      auto body = formula(rng, depth - 1, dims, max_horizon - b, allow_weighted);
      return rng.index(2) ? Formula::always(a, b, std::move(body)) : Formula::eventually(a, b, std::move(body));
    }
    default: {
      std::vector<Formula> kids;
      std::vector<double> w;
      const auto n = 2 + rng.index(2);
      for (std::size_t i = 0; i < n; ++i) {
        kids.push_back(formula(rng, depth - 1, dims, max_horizon, allow_weighted));
        w.push_back(rng.uniform(0.1, 3.0));
      }
      return rng.index(2) ? Formula::weighted_and(std::move(w), std::move(kids))
                          : Formula::weighted_or(std::move(w), std::move(kids));
    }
  }
}

/// Signal with `steps` rows of values on a quarter grid in [-2.5, 2.5], so
/// ties with thresholds occur.
inline svmstl::StSignal signal(svmstl::Rng& rng, std::size_t steps, std::size_t dims, bool continuous = false) {
  std::vector<double> v(steps * dims);
  for (double& x : v) {
    x = continuous ? rng.uniform(-2.5, 2.5) : std::round(rng.uniform(-2.5, 2.5) * 4.0) / 4.0;
  }
  return svmstl::StSignal(steps, dims, std::move(v));
}

inline svmstl::Primitive primitive(svmstl::Rng& rng, std::size_t dims, std::size_t horizon,
                                   const std::vector<double>& thresholds) {
  svmstl::Primitive p;
  p.kind = rng.index(2) ? svmstl::PrimitiveKind::eventually : svmstl::PrimitiveKind::always;
  p.j = 1 + rng.index(dims);
  p.cmp = rng.index(2) ? svmstl::Comparison::greater : svmstl::Comparison::less_equal;
  p.r = thresholds[rng.index(thresholds.size())];
  p.a = rng.index(horizon + 1);
  p.b = p.a + rng.index(horizon - p.a + 1);
  return p;
}

/// Random tree of exactly the given depth with random leaf labels.
inline svmstl::StlTree tree(svmstl::Rng& rng, std::size_t depth, std::size_t dims, std::size_t horizon,
                            const std::vector<double>& thresholds) {
  svmstl::StlTree t;
  std::function<int(std::size_t)> grow = [&](std::size_t d) -> int {
    const int id = static_cast<int>(t.nodes.size());
    t.nodes.emplace_back();
    if (d == 0) {
      t.nodes[static_cast<std::size_t>(id)].leaf = true;
      t.nodes[static_cast<std::size_t>(id)].label = rng.index(2) ? 1 : -1;
      return id;
    }
    t.nodes[static_cast<std::size_t>(id)].leaf = false;
    t.nodes[static_cast<std::size_t>(id)].primitive = primitive(rng, dims, horizon, thresholds);
    const int l = grow(d - 1);
    const int r = grow(d - 1);
    t.nodes[static_cast<std::size_t>(id)].left = l;
    t.nodes[static_cast<std::size_t>(id)].right = r;
    return id;
  };
  grow(depth);
  return t;
}

/// Smooth random-walk signal, used for planted-target datasets.
inline svmstl::StSignal walk(svmstl::Rng& rng, std::size_t steps, std::size_t dims) {
  std::vector<double> v(steps * dims);
  for (std::size_t d = 0; d < dims; ++d) {
    double x = rng.uniform(-1.0, 1.0);
    for (std::size_t k = 0; k < steps; ++k) {
      v[k * dims + d] = x;
      x += rng.normal() * 0.3;
    }
  }
  return svmstl::StSignal(steps, dims, std::move(v));
}

/// Depth-2 target over 2-D signals with T = 10:
/// (F[0,5](h1 > 0.5) & G[2,6](h2 <= 1)) | (!F[0,5](h1 > 0.5) & F[6,9](h2 > 0.8)).
inline svmstl::StlTree planted_tree() {
  using svmstl::Comparison;
  using svmstl::PrimitiveKind;
  svmstl::StlTree t;
  t.nodes.resize(7);
  t.nodes[0] = {false, 1, {PrimitiveKind::eventually, 1, Comparison::greater, 0.5, 0, 5}, 1, 4};
  t.nodes[1] = {false, 1, {PrimitiveKind::always, 2, Comparison::less_equal, 1.0, 2, 6}, 2, 3};
  t.nodes[2].label = 1;
  t.nodes[3].label = -1;
  t.nodes[4] = {false, -1, {PrimitiveKind::eventually, 2, Comparison::greater, 0.8, 6, 9}, 5, 6};
  t.nodes[5].label = 1;
  t.nodes[6].label = -1;
  return t;
}

struct Labeled {
  std::vector<svmstl::StSignal> signals;
  std::vector<int> labels;
};

/// Depth-2 target with two primitives over 2-D signals with T = 10:
/// F[0,5](h1 > 0.5) & G[2,6](h2 <= 1).
inline svmstl::StlTree planted_pair_tree() {
  using svmstl::Comparison;
  using svmstl::PrimitiveKind;
  svmstl::StlTree t;
  t.nodes.resize(5);
  t.nodes[0] = {false, 1, {PrimitiveKind::eventually, 1, Comparison::greater, 0.5, 0, 5}, 1, 4};
  t.nodes[1] = {false, 1, {PrimitiveKind::always, 2, Comparison::less_equal, 1.0, 2, 6}, 2, 3};
  t.nodes[2].label = 1;
  t.nodes[3].label = -1;
  t.nodes[4].label = -1;
  return t;
}

/// n signals of 11 steps in 2 dimensions, values uniform in [-1.5, 1.5],
/// labeled by `target`.
inline Labeled planted(svmstl::Rng& rng, std::size_t n, const svmstl::StlTree& target) {
  Labeled out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(22);
    for (auto& x : v) {
      x = rng.uniform(-1.5, 1.5);
    }
    out.signals.emplace_back(11, 2, std::move(v));
    out.labels.push_back(target.classify(out.signals.back()));
  }
  return out;
}

struct Separable2d {
  std::vector<std::array<double, 2>> points;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
};

/// n linearly separable points in [-2, 2]^2 around a random line; points
/// closer than `gap` to the line are resampled. Both labels occur.
inline Separable2d separable_2d(svmstl::Rng& rng, std::size_t n, double gap) {
  const double angle = rng.uniform(0.0, 6.283185307179586);
  const double nx = std::cos(angle);
  const double ny = std::sin(angle);
  const double offset = rng.uniform(-0.5, 0.5);
  Separable2d d;
  while (d.points.size() < n) {
    const double x = rng.uniform(-2.0, 2.0);
    const double y = rng.uniform(-2.0, 2.0);
    const double s = nx * x + ny * y + offset;
    if (std::abs(s) < gap) {
      continue;
    }
    const int label = s > 0 ? 1 : -1;
    if (d.points.size() == n - 1 && std::all_of(d.labels.begin(), d.labels.end(), [&](int l) { return l == label; })) {
      continue;
    }
    d.points.push_back({x, y});
    d.rows.push_back({x, y});
    d.labels.push_back(label);
  }
  return d;
}

} // namespace gen
