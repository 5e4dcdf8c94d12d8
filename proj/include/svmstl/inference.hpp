#pragma once

#include "svmstl/core.hpp"
#include "svmstl/logic.hpp"
#include "svmstl/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace svmstl {

/// F_[a,b](h_j ~ r) or G_[a,b](h_j ~ r), evaluated at k = 0.
struct Primitive {
  PrimitiveKind kind = PrimitiveKind::eventually;
  std::size_t j = 1;
  Comparison cmp = Comparison::greater;
  double r = 0.0;
  std::size_t a = 0;
  std::size_t b = 0;

  friend bool operator==(const Primitive&, const Primitive&) = default;

  Formula formula() const {
    Formula atom = Formula::atom(j, cmp, r);
    return kind == PrimitiveKind::eventually ? Formula::eventually(a, b, std::move(atom))
                                             : Formula::always(a, b, std::move(atom));
  }

  /// F with > and G with <= are decided by the window maximum; the other
  /// two by the window minimum.
  bool uses_max() const noexcept {
    return (kind == PrimitiveKind::eventually) == (cmp == Comparison::greater);
  }

  double statistic(const StSignal& s) const {
    if (b > s.horizon()) {
      throw HorizonError(b, s.horizon());
    }
    if (j == 0 || j > s.dims()) {
      throw ShapeError("primitive uses h" + std::to_string(j) + " but the signal has " + std::to_string(s.dims()) +
                       " dimensions");
    }
    double v = s.at(a, j - 1);
    for (std::size_t k = a + 1; k <= b; ++k) {
      v = uses_max() ? std::max(v, s.at(k, j - 1)) : std::min(v, s.at(k, j - 1));
    }
    return v;
  }

  bool satisfied(const StSignal& s) const {
    const double v = statistic(s);
    return cmp == Comparison::greater ? v > r : v <= r;
  }
};

/// Candidate windows [a, b]. Explicit `windows` win; otherwise every (a, b)
/// with b <= T, b - a in `lengths` (all lengths when empty) and a on `stride`.
struct WindowGrid {
  std::vector<std::pair<std::size_t, std::size_t>> windows;
  std::vector<std::size_t> lengths;
  std::size_t stride = 1;

  std::vector<std::pair<std::size_t, std::size_t>> enumerate(std::size_t horizon) const {
    if (!windows.empty()) {
      for (const auto& [a, b] : windows) {
        if (a > b || b > horizon) {
          throw ConfigError("window [" + std::to_string(a) + "," + std::to_string(b) + "] outside [0," +
                            std::to_string(horizon) + "]");
        }
      }
      return windows;
    }
    if (stride == 0) {
      throw ConfigError("window stride must be positive");
    }
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t a = 0; a <= horizon; a += stride) {
      for (std::size_t b = a; b <= horizon; ++b) {
        if (lengths.empty() || std::find(lengths.begin(), lengths.end(), b - a) != lengths.end()) {
          out.emplace_back(a, b);
        }
      }
    }
    if (out.empty()) {
      throw ConfigError("window grid is empty");
    }
    return out;
  }
};

/// Threshold candidates: midpoints between consecutive distinct statistic
/// values (exact), q evenly spaced quantiles of the observed h_j values, or
/// an explicit list.
enum class ThresholdMode { midpoints, quantiles, explicit_values };

struct ThresholdGrid {
  ThresholdMode mode = ThresholdMode::midpoints;
  std::size_t quantiles = 20;
  std::vector<double> values;
};

struct SearchOptions {
  WindowGrid windows;
  ThresholdGrid thresholds;
  std::size_t jobs = 1;
};

struct PrimitiveChoice {
  Primitive primitive;
  double impurity = std::numeric_limits<double>::infinity();
  bool degenerate = false;
};

namespace detail {

inline constexpr double impurity_tolerance = 1e-12;

struct Candidate {
  Primitive p;
  double impurity = std::numeric_limits<double>::infinity();
  bool valid = false;
};

// Tie order after impurity: window length, j, r, a, max-statistic first.
inline bool better(const Candidate& x, const Candidate& y) {
  if (!y.valid) {
    return x.valid;
  }
  if (!x.valid) {
    return false;
  }
  if (x.impurity < y.impurity - impurity_tolerance) {
    return true;
  }
  if (y.impurity < x.impurity - impurity_tolerance) {
    return false;
  }
  const auto key = [](const Candidate& c) {
    return std::make_tuple(c.p.b - c.p.a, c.p.j, c.p.r, c.p.a, c.p.uses_max() ? 0 : 1);
  };
  return key(x) < key(y);
}

inline std::vector<double> quantile_levels(std::vector<double> values, std::size_t q) {
  std::sort(values.begin(), values.end());
  std::vector<double> out;
  if (values.empty() || q == 0) {
    return out;
  }
  for (std::size_t i = 0; i < q; ++i) {
    const double pos = q == 1 ? 0.5 * static_cast<double>(values.size() - 1)
                              : static_cast<double>(i) * static_cast<double>(values.size() - 1) /
                                    static_cast<double>(q - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    out.push_back(values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]));
  }
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

} // namespace detail

/// Exhaustive search over kind x j x comparison x window x threshold for the
/// primitive whose split minimizes the weighted misclassification impurity
/// sum over children of min(W+, W-). Of the two primitives inducing the same
/// partition, the one whose satisfying side holds the larger share of
/// positive weight is returned.
inline PrimitiveChoice optimize_primitive(std::span<const StSignal> signals, std::span<const int> labels,
                                          std::span<const double> weights, std::span<const std::size_t> subset,
                                          const SearchOptions& opt) {
  if (subset.empty()) {
    throw DegenerateDataError("cannot optimize a primitive on an empty node");
  }
  PrimitiveChoice out;
  bool has_pos = false;
  bool has_neg = false;
  for (std::size_t i : subset) {
    (labels[i] > 0 ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) {
    out.degenerate = true;
    return out;
  }
  const std::size_t horizon = signals[subset.front()].horizon();
  const std::size_t dims = signals[subset.front()].dims();
  for (std::size_t i : subset) {
    if (signals[i].horizon() != horizon || signals[i].dims() != dims) {
      throw ShapeError("signals in one node must share horizon and dimension");
    }
  }
  const auto windows = opt.windows.enumerate(horizon);

  std::vector<std::vector<double>> quantile_grid(dims);
  if (opt.thresholds.mode == ThresholdMode::quantiles) {
    for (std::size_t d = 0; d < dims; ++d) {
      std::vector<double> all;
      for (std::size_t i : subset) {
        for (std::size_t k = 0; k <= horizon; ++k) {
          all.push_back(signals[i].at(k, d));
        }
      }
      quantile_grid[d] = detail::quantile_levels(std::move(all), opt.thresholds.quantiles);
    }
  } else if (opt.thresholds.mode == ThresholdMode::explicit_values && opt.thresholds.values.empty()) {
    throw ConfigError("explicit threshold grid is empty");
  }

  std::vector<detail::Candidate> per_window(windows.size());
  parallel_for(windows.size(), opt.jobs, [&](std::size_t w) {
    const auto [a, b] = windows[w];
    detail::Candidate best;
    std::vector<std::pair<double, std::size_t>> order(subset.size());
    for (std::size_t d = 0; d < dims; ++d) {
      for (int use_max = 1; use_max >= 0; --use_max) {
        for (std::size_t n = 0; n < subset.size(); ++n) {
          const StSignal& s = signals[subset[n]];
          double v = s.at(a, d);
          for (std::size_t k = a + 1; k <= b; ++k) {
            v = use_max ? std::max(v, s.at(k, d)) : std::min(v, s.at(k, d));
          }
          order[n] = {v, subset[n]};
        }
        std::sort(order.begin(), order.end());
        double total_pos = 0.0;
        double total_neg = 0.0;
        for (const auto& [v, i] : order) {
          (labels[i] > 0 ? total_pos : total_neg) += weights[i];
        }
        const auto offer = [&](double low_pos, double low_neg, double r) {
          const double high_pos = total_pos - low_pos;
          const double high_neg = total_neg - low_neg;
          detail::Candidate c;
          c.valid = true;
          c.impurity = std::min(low_pos, low_neg) + std::min(high_pos, high_neg);
          const double low_share = low_pos + low_neg > 0 ? low_pos / (low_pos + low_neg) : 0.0;
          const double high_share = high_pos + high_neg > 0 ? high_pos / (high_pos + high_neg) : 0.0;
          const bool sat_high = high_share >= low_share;
          c.p.j = d + 1;
          c.p.r = r;
          c.p.a = a;
          c.p.b = b;
          c.p.cmp = sat_high ? Comparison::greater : Comparison::less_equal;
          if (use_max) {
            c.p.kind = sat_high ? PrimitiveKind::eventually : PrimitiveKind::always;
          } else {
            c.p.kind = sat_high ? PrimitiveKind::always : PrimitiveKind::eventually;
          }
          if (detail::better(c, best)) {
            best = c;
          }
        };
        if (opt.thresholds.mode == ThresholdMode::midpoints) {
          // Sweep the cut between consecutive distinct values; order[0..n]
          // is the "<= r" side.
          double low_pos = 0.0;
          double low_neg = 0.0;
          for (std::size_t n = 0; n + 1 < order.size(); ++n) {
            (labels[order[n].second] > 0 ? low_pos : low_neg) += weights[order[n].second];
            const double lo_v = order[n].first;
            const double hi_v = order[n + 1].first;
            if (!(lo_v < hi_v)) {
              continue;
            }
            double r = lo_v + (hi_v - lo_v) / 2.0;
            if (!(r < hi_v)) {
              r = lo_v;
            }
            offer(low_pos, low_neg, r);
          }
        } else {
          const auto& grid = opt.thresholds.mode == ThresholdMode::quantiles ? quantile_grid[d] : opt.thresholds.values;
          for (double r : grid) {
            double low_pos = 0.0;
            double low_neg = 0.0;
            for (std::size_t n = 0; n < order.size() && order[n].first <= r; ++n) {
              (labels[order[n].second] > 0 ? low_pos : low_neg) += weights[order[n].second];
            }
            offer(low_pos, low_neg, r);
          }
        }
      }
    }
    per_window[w] = best;
  });

  detail::Candidate best;
  for (const auto& c : per_window) {
    if (detail::better(c, best)) {
      best = c;
    }
  }
  if (!best.valid) {
    out.degenerate = true;
    return out;
  }
  out.primitive = best.p;
  out.impurity = best.impurity;
  return out;
}

// ---------------------------------------------------------------------------
// Decision trees over primitives

struct TreeNode {
  bool leaf = true;
  int label = 1; // leaves only; internal nodes keep +1
  Primitive primitive;
  int left = -1;  // satisfies the primitive
  int right = -1; // violates it
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct StlTree {
  std::vector<TreeNode> nodes; // nodes[0] is the root

  int classify(const StSignal& s) const {
    int n = 0;
    while (!nodes[static_cast<std::size_t>(n)].leaf) {
      const auto& node = nodes[static_cast<std::size_t>(n)];
      n = node.primitive.satisfied(s) ? node.left : node.right;
    }
    return nodes[static_cast<std::size_t>(n)].label;
  }

  std::size_t horizon() const {
    std::size_t h = 0;
    for (const auto& node : nodes) {
      if (!node.leaf) {
        h = std::max(h, node.primitive.b);
      }
    }
    return h;
  }

  std::size_t depth() const { return depth_from(0); }

  friend bool operator==(const StlTree&, const StlTree&) = default;

private:
  std::size_t depth_from(int n) const {
    const auto& node = nodes[static_cast<std::size_t>(n)];
    return node.leaf ? 0 : 1 + std::max(depth_from(node.left), depth_from(node.right));
  }
};

struct TreeOptions {
  std::size_t depth = 2;
  SearchOptions search;
};

namespace detail {

inline int weighted_majority(std::span<const int> labels, std::span<const double> weights,
                             std::span<const std::size_t> subset) {
  double pos = 0.0;
  double neg = 0.0;
  for (std::size_t i : subset) {
    (labels[i] > 0 ? pos : neg) += weights[i];
  }
  return pos >= neg ? 1 : -1;
}

inline int grow(StlTree& tree, std::span<const StSignal> signals, std::span<const int> labels,
                std::span<const double> weights, const std::vector<std::size_t>& subset, std::size_t depth_left,
                int parent_majority, const TreeOptions& opt) {
  const int index = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  if (subset.empty()) {
    tree.nodes[static_cast<std::size_t>(index)].label = parent_majority;
    return index;
  }
  const int majority = weighted_majority(labels, weights, subset);
  tree.nodes[static_cast<std::size_t>(index)].label = majority;
  if (depth_left == 0) {
    return index;
  }
  const auto choice = optimize_primitive(signals, labels, weights, subset, opt.search);
  if (choice.degenerate) {
    return index;
  }
  std::vector<std::size_t> sat;
  std::vector<std::size_t> unsat;
  for (std::size_t i : subset) {
    (choice.primitive.satisfied(signals[i]) ? sat : unsat).push_back(i);
  }
  const int left = grow(tree, signals, labels, weights, sat, depth_left - 1, majority, opt);
  const int right = grow(tree, signals, labels, weights, unsat, depth_left - 1, majority, opt);
  auto& node = tree.nodes[static_cast<std::size_t>(index)];
  node.leaf = false;
  node.label = 1;
  node.primitive = choice.primitive;
  node.left = left;
  node.right = right;
  return index;
}

inline void check_binary(std::span<const StSignal> signals, std::span<const int> labels) {
  if (signals.empty() || signals.size() != labels.size()) {
    throw ShapeError("need one label per signal");
  }
  for (int l : labels) {
    if (l != 1 && l != -1) {
      throw ConfigError("binary labels must be +1 or -1");
    }
  }
}

} // namespace detail

/// Grows a tree of depth <= opt.depth on weighted signals. Signals that
/// satisfy a node's primitive go left. Leaves take the weighted majority
/// (ties -> +1); an empty branch takes its parent's majority.
inline StlTree build_tree(std::span<const StSignal> signals, std::span<const int> labels,
                          std::span<const double> weights, const TreeOptions& opt) {
  detail::check_binary(signals, labels);
  if (weights.size() != signals.size()) {
    throw ShapeError("need one weight per signal");
  }
  if (opt.depth == 0) {
    throw ConfigError("tree depth must be at least 1");
  }
  std::vector<std::size_t> all(signals.size());
  std::iota(all.begin(), all.end(), 0);
  StlTree tree;
  detail::grow(tree, signals, labels, weights, all, opt.depth, 1, opt);
  return tree;
}

struct TreeFormula {
  Formula formula;
  bool always_false = false; // no +1 leaf; formula is !TRUE
};

/// Disjunction over root-to-(+1 leaf) paths of the conjunction of the
/// primitives along the path, negated where the path takes the right branch.
inline TreeFormula tree_to_formula(const StlTree& tree) {
  std::vector<Formula> paths;
  std::vector<Formula> literals;
  std::function<void(int)> walk = [&](int n) {
    const auto& node = tree.nodes[static_cast<std::size_t>(n)];
    if (node.leaf) {
      if (node.label > 0) {
        if (literals.empty()) {
          paths.push_back(Formula::truth());
        } else if (literals.size() == 1) {
          paths.push_back(literals.front());
        } else {
          paths.push_back(Formula::conjunction(literals));
        }
      }
      return;
    }
    literals.push_back(node.primitive.formula());
    walk(node.left);
    literals.back() = Formula::negation(node.primitive.formula());
    walk(node.right);
    literals.pop_back();
  };
  walk(0);
  if (paths.empty()) {
    return {Formula::falsity(), true};
  }
  if (paths.size() == 1) {
    return {std::move(paths.front()), false};
  }
  return {Formula::disjunction(std::move(paths)), false};
}

// ---------------------------------------------------------------------------
// Boosting

struct BoostOptions {
  std::size_t rounds = 3; // K
  TreeOptions tree;
  double epsilon_min = 1e-10;
};

/// alpha = 1/2 ln(1/eps - 1) with eps clamped into [eps_min, 1 - eps_min].
inline double boost_alpha(double epsilon, double epsilon_min = 1e-10) {
  const double e = std::clamp(epsilon, epsilon_min, 1.0 - epsilon_min);
  return 0.5 * std::log(1.0 / e - 1.0);
}

struct BdtClassifier {
  std::vector<StlTree> trees;
  std::vector<double> alphas;
  std::vector<double> errors;

  double score(const StSignal& s) const {
    double sum = 0.0;
    for (std::size_t k = 0; k < trees.size(); ++k) {
      sum += alphas[k] * trees[k].classify(s);
    }
    return sum;
  }

  /// sign of the weighted vote; an exact tie votes +1.
  int classify(const StSignal& s) const { return score(s) >= 0.0 ? 1 : -1; }

  std::size_t horizon() const {
    std::size_t h = 0;
    for (const auto& t : trees) {
      h = std::max(h, t.horizon());
    }
    return h;
  }

  friend bool operator==(const BdtClassifier&, const BdtClassifier&) = default;
};

/// D_1 .. D_{K+1} from a boosting run, for inspection and tests.
struct BoostTrace {
  std::vector<std::vector<double>> distributions;
};

/// AdaBoost over shallow STL trees.
inline BdtClassifier boost(std::span<const StSignal> signals, std::span<const int> labels, const BoostOptions& opt,
                           BoostTrace* trace = nullptr) {
  detail::check_binary(signals, labels);
  if (opt.rounds < 1) {
    throw ConfigError("number of boosting rounds K must be at least 1");
  }
  const bool has_pos = std::find(labels.begin(), labels.end(), 1) != labels.end();
  const bool has_neg = std::find(labels.begin(), labels.end(), -1) != labels.end();
  if (!has_pos || !has_neg) {
    throw DegenerateDataError("boosting needs both labels present");
  }
  for (const auto& s : signals) {
    if (s.horizon() != signals.front().horizon()) {
      throw ShapeError("all signals must share one horizon");
    }
  }
  const std::size_t n = signals.size();
  std::vector<double> dist(n, 1.0 / static_cast<double>(n));
  if (trace != nullptr) {
    trace->distributions = {dist};
  }
  BdtClassifier bdt;
  for (std::size_t k = 0; k < opt.rounds; ++k) {
    StlTree tree = build_tree(signals, labels, dist, opt.tree);
    std::vector<int> predicted(n);
    double epsilon = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      predicted[i] = tree.classify(signals[i]);
      if (predicted[i] != labels[i]) {
        epsilon += dist[i];
      }
    }
    const double alpha = boost_alpha(epsilon, opt.epsilon_min);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dist[i] *= std::exp(-alpha * labels[i] * predicted[i]);
      z += dist[i];
    }
    for (double& d : dist) {
      d /= z;
    }
    bdt.trees.push_back(std::move(tree));
    bdt.alphas.push_back(alpha);
    bdt.errors.push_back(epsilon);
    if (trace != nullptr) {
      trace->distributions.push_back(dist);
    }
  }
  return bdt;
}

struct WeightedExport {
  Formula formula;
  std::vector<std::size_t> omitted; // trees with alpha <= 0
  std::string caveat;
};

/// AND{alpha_1..alpha_K}(tree formulas) for human reading. The weighted
/// conjunction does not reproduce the vote of classify(); trees whose alpha
/// is not positive cannot carry a weight and are omitted.
inline WeightedExport bdt_to_weighted_formula(const BdtClassifier& bdt) {
  WeightedExport out;
  std::vector<double> weights;
  std::vector<Formula> parts;
  for (std::size_t k = 0; k < bdt.trees.size(); ++k) {
    if (bdt.alphas[k] > 0.0) {
      weights.push_back(bdt.alphas[k]);
      parts.push_back(tree_to_formula(bdt.trees[k]).formula);
    } else {
      out.omitted.push_back(k);
    }
  }
  out.caveat = "interpretability export: satisfaction of the weighted conjunction is not equivalent to the "
               "ensemble's weighted vote";
  if (parts.empty()) {
    out.formula = Formula::truth();
    out.caveat += "; no tree has positive weight";
    return out;
  }
  out.formula = Formula::weighted_and(std::move(weights), std::move(parts));
  return out;
}

// ---------------------------------------------------------------------------
// Misclassification rate

struct McrResult {
  double rate = 0.0;
  std::size_t errors = 0;
  std::size_t horizon_violations = 0;
};

/// MCR of a formula: s |= phi at k = 0 predicts +1. Items too short for the
/// formula count as misclassified and are reported.
inline McrResult mcr(const Formula& phi, std::span<const StSignal> signals, std::span<const int> labels) {
  detail::check_binary(signals, labels);
  McrResult out;
  for (std::size_t i = 0; i < signals.size(); ++i) {
    try {
      const bool sat = satisfies(signals[i], phi, 0);
      if ((sat && labels[i] == -1) || (!sat && labels[i] == 1)) {
        ++out.errors;
      }
    } catch (const HorizonError&) {
      ++out.errors;
      ++out.horizon_violations;
    }
  }
  out.rate = static_cast<double>(out.errors) / static_cast<double>(signals.size());
  return out;
}

/// MCR of any +-1 classifier.
template <typename Classifier>
inline McrResult mcr_classifier(const Classifier& clf, std::span<const StSignal> signals, std::span<const int> labels) {
  detail::check_binary(signals, labels);
  McrResult out;
  for (std::size_t i = 0; i < signals.size(); ++i) {
    try {
      if (clf.classify(signals[i]) != labels[i]) {
        ++out.errors;
      }
    } catch (const HorizonError&) {
      ++out.errors;
      ++out.horizon_violations;
    }
  }
  out.rate = static_cast<double>(out.errors) / static_cast<double>(signals.size());
  return out;
}

// ---------------------------------------------------------------------------
// Model file

inline std::string format_bdt(const BdtClassifier& bdt) {
  std::string out = "# bdt trees=" + std::to_string(bdt.trees.size()) + "\n";
  for (std::size_t k = 0; k < bdt.trees.size(); ++k) {
    const auto& tree = bdt.trees[k];
    out += "tree alpha=" + text::format_double(bdt.alphas[k]) + " error=" + text::format_double(bdt.errors[k]) +
           " nodes=" + std::to_string(tree.nodes.size()) + "\n";
    for (const auto& node : tree.nodes) {
      if (node.leaf) {
        out += "leaf " + std::string(node.label > 0 ? "+1" : "-1") + "\n";
      } else {
        const auto& p = node.primitive;
        out += "split " + std::string(p.kind == PrimitiveKind::eventually ? "F" : "G") + " " + std::to_string(p.j) +
               " " + (p.cmp == Comparison::greater ? ">" : "<=") + " " + text::format_double(p.r) + " " +
               std::to_string(p.a) + " " + std::to_string(p.b) + " " + std::to_string(node.left) + " " +
               std::to_string(node.right) + "\n";
      }
    }
    out += "formula " + unparse(tree_to_formula(tree).formula) + "\n";
  }
  return out;
}

inline BdtClassifier parse_bdt(std::string_view contents) {
  const auto rows = text::lines(contents);
  if (rows.empty() || rows.front().rfind("# bdt", 0) != 0) {
    throw ParseError("missing '# bdt' header", 1);
  }
  BdtClassifier bdt;
  std::size_t expected_nodes = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto row = text::trim(rows[i]);
    if (row.empty() || row.rfind("formula ", 0) == 0) {
      continue;
    }
    const auto tok = text::split(row, ' ');
    if (tok[0] == "tree") {
      if (!bdt.trees.empty() && bdt.trees.back().nodes.size() != expected_nodes) {
        throw ParseError("tree has fewer nodes than declared", i + 1);
      }
      bdt.trees.emplace_back();
      for (std::size_t t = 1; t < tok.size(); ++t) {
        const auto eq = tok[t].find('=');
        if (eq == std::string_view::npos) {
          throw ParseError("malformed tree field", i + 1);
        }
        const auto key = tok[t].substr(0, eq);
        const auto value = tok[t].substr(eq + 1);
        if (key == "alpha") {
          bdt.alphas.push_back(text::parse_double(value, i + 1));
        } else if (key == "error") {
          bdt.errors.push_back(text::parse_double(value, i + 1));
        } else if (key == "nodes") {
          expected_nodes = static_cast<std::size_t>(text::parse_int(value, i + 1));
        }
      }
      continue;
    }
    if (bdt.trees.empty()) {
      throw ParseError("node before any 'tree' line", i + 1);
    }
    TreeNode node;
    if (tok[0] == "leaf" && tok.size() == 2) {
      if (tok[1] != "+1" && tok[1] != "-1") {
        throw ParseError("leaf label must be +1 or -1", i + 1);
      }
      node.label = tok[1] == "+1" ? 1 : -1;
    } else if (tok[0] == "split" && tok.size() == 9) {
      node.leaf = false;
      if (tok[1] != "F" && tok[1] != "G") {
        throw ParseError("primitive kind must be F or G", i + 1);
      }
      node.primitive.kind = tok[1] == "F" ? PrimitiveKind::eventually : PrimitiveKind::always;
      node.primitive.j = static_cast<std::size_t>(text::parse_int(tok[2], i + 1));
      if (tok[3] != ">" && tok[3] != "<=") {
        throw ParseError("comparison must be > or <=", i + 1);
      }
      node.primitive.cmp = tok[3] == ">" ? Comparison::greater : Comparison::less_equal;
      node.primitive.r = text::parse_double(tok[4], i + 1);
      node.primitive.a = static_cast<std::size_t>(text::parse_int(tok[5], i + 1));
      node.primitive.b = static_cast<std::size_t>(text::parse_int(tok[6], i + 1));
      node.left = static_cast<int>(text::parse_int(tok[7], i + 1));
      node.right = static_cast<int>(text::parse_int(tok[8], i + 1));
    } else {
      throw ParseError("expected 'tree', 'leaf' or 'split'", i + 1);
    }
    bdt.trees.back().nodes.push_back(node);
  }
  if (bdt.trees.empty() || bdt.alphas.size() != bdt.trees.size() || bdt.errors.size() != bdt.trees.size() ||
      bdt.trees.back().nodes.size() != expected_nodes) {
    throw ParseError("incomplete BDT model");
  }
  for (const auto& tree : bdt.trees) {
    for (const auto& node : tree.nodes) {
      if (!node.leaf && (node.left < 0 || node.right < 0 || static_cast<std::size_t>(node.left) >= tree.nodes.size() ||
                         static_cast<std::size_t>(node.right) >= tree.nodes.size())) {
        throw ParseError("split references a missing node");
      }
    }
  }
  return bdt;
}

} // namespace svmstl
