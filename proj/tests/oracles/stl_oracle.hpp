#pragma once

// Direct recursive STL semantics: every temporal operator is evaluated by
// looping over its window and recursing, with no shared traces.

#include "svmstl/logic.hpp"

#include <algorithm>
#include <cfloat>
#include <limits>

namespace oracle {

inline double rho(const svmstl::StSignal& s, const svmstl::Formula& f, std::size_t k, bool weighted = false) {
  using svmstl::NodeKind;
  switch (f.kind) {
    case NodeKind::truth: return DBL_MAX;
    case NodeKind::predicate: {
      const double h = s.at(k, f.predicate - 1);
      return f.comparison == svmstl::Comparison::greater ? h - f.threshold : f.threshold - h;
    }
    case NodeKind::negation: return -rho(s, f.children[0], k, weighted);
    case NodeKind::always: {
      double v = std::numeric_limits<double>::infinity();
      for (std::size_t t = k + f.lo; t <= k + f.hi; ++t) {
        v = std::min(v, rho(s, f.children[0], t, weighted));
      }
      return v;
    }
    case NodeKind::eventually: {
      double v = -std::numeric_limits<double>::infinity();
      for (std::size_t t = k + f.lo; t <= k + f.hi; ++t) {
        v = std::max(v, rho(s, f.children[0], t, weighted));
      }
      return v;
    }
    default: {
      const bool is_or = f.kind == NodeKind::disjunction || f.kind == NodeKind::weighted_or;
      const bool use_w = weighted && !f.weights.empty();
      double sum = 0.0;
      for (double w : f.weights) {
        sum += w;
      }
      double v = is_or ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < f.children.size(); ++i) {
        double c = rho(s, f.children[i], k, weighted);
        if (use_w) {
          c = std::clamp(f.weights[i] * static_cast<double>(f.children.size()) / sum * c, -DBL_MAX, DBL_MAX);
        }
        v = is_or ? std::max(v, c) : std::min(v, c);
      }
      return v;
    }
  }
}

inline bool sat(const svmstl::StSignal& s, const svmstl::Formula& f, std::size_t k) {
  using svmstl::NodeKind;
  switch (f.kind) {
    case NodeKind::truth: return true;
    case NodeKind::predicate: {
      const double h = s.at(k, f.predicate - 1);
      return f.comparison == svmstl::Comparison::greater ? h > f.threshold : h <= f.threshold;
    }
    case NodeKind::negation: return !sat(s, f.children[0], k);
    case NodeKind::always:
      for (std::size_t t = k + f.lo; t <= k + f.hi; ++t) {
        if (!sat(s, f.children[0], t)) {
          return false;
        }
      }
      return true;
    case NodeKind::eventually:
      for (std::size_t t = k + f.lo; t <= k + f.hi; ++t) {
        if (sat(s, f.children[0], t)) {
          return true;
        }
      }
      return false;
    case NodeKind::conjunction:
    case NodeKind::weighted_and:
      for (const auto& c : f.children) {
        if (!sat(s, c, k)) {
          return false;
        }
      }
      return true;
    default:
      for (const auto& c : f.children) {
        if (sat(s, c, k)) {
          return true;
        }
      }
      return false;
  }
}

} // namespace oracle
