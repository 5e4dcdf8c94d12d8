#pragma once

#include "svmstl/core.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace svmstl {

enum class Comparison { greater, less_equal };

enum class NodeKind { truth, predicate, negation, conjunction, disjunction, always, eventually, weighted_and, weighted_or };

/// Robustness surrogate for TRUE: the largest finite double.
inline constexpr double robustness_top = std::numeric_limits<double>::max();

/// SVM-STL formula (with the weighted conjunction/disjunction fragment).
/// Plain value type; build through the static factories, which validate.
struct Formula {
  NodeKind kind = NodeKind::truth;
  std::size_t predicate = 0; // 1-based class index j of h_j
  Comparison comparison = Comparison::greater;
  double threshold = 0.0;
  std::size_t lo = 0; // inclusive window [lo, hi]
  std::size_t hi = 0;
  std::vector<double> weights;
  std::vector<Formula> children;

  friend bool operator==(const Formula&, const Formula&) = default;

  static Formula truth() { return {}; }

  /// Encoded as !TRUE.
  static Formula falsity() { return negation(truth()); }

  static Formula atom(std::size_t j, Comparison cmp, double r) {
    if (j == 0) {
      throw ConfigError("predicate index is 1-based; h0 does not exist");
    }
    if (!std::isfinite(r)) {
      throw ConfigError("predicate threshold must be finite");
    }
    Formula f;
    f.kind = NodeKind::predicate;
    f.predicate = j;
    f.comparison = cmp;
    f.threshold = r;
    return f;
  }

  static Formula negation(Formula child) {
    Formula f;
    f.kind = NodeKind::negation;
    f.children.push_back(std::move(child));
    return f;
  }

  static Formula conjunction(std::vector<Formula> children) { return nary(NodeKind::conjunction, std::move(children)); }
  static Formula disjunction(std::vector<Formula> children) { return nary(NodeKind::disjunction, std::move(children)); }

  static Formula always(std::size_t a, std::size_t b, Formula child) {
    return temporal(NodeKind::always, a, b, std::move(child));
  }
  static Formula eventually(std::size_t a, std::size_t b, Formula child) {
    return temporal(NodeKind::eventually, a, b, std::move(child));
  }

  static Formula weighted_and(std::vector<double> weights, std::vector<Formula> children) {
    return weighted(NodeKind::weighted_and, std::move(weights), std::move(children));
  }
  static Formula weighted_or(std::vector<double> weights, std::vector<Formula> children) {
    return weighted(NodeKind::weighted_or, std::move(weights), std::move(children));
  }

  bool is_temporal() const noexcept { return kind == NodeKind::always || kind == NodeKind::eventually; }
  bool is_nary() const noexcept {
    return kind == NodeKind::conjunction || kind == NodeKind::disjunction || kind == NodeKind::weighted_and ||
           kind == NodeKind::weighted_or;
  }

private:
  static Formula nary(NodeKind kind, std::vector<Formula> children) {
    if (children.empty()) {
      throw ConfigError("conjunction/disjunction needs at least one operand");
    }
    Formula f;
    f.kind = kind;
    f.children = std::move(children);
    return f;
  }

  static Formula temporal(NodeKind kind, std::size_t a, std::size_t b, Formula child) {
    if (a > b) {
      throw ConfigError("empty time window [" + std::to_string(a) + "," + std::to_string(b) + "]");
    }
    Formula f;
    f.kind = kind;
    f.lo = a;
    f.hi = b;
    f.children.push_back(std::move(child));
    return f;
  }

  static Formula weighted(NodeKind kind, std::vector<double> weights, std::vector<Formula> children) {
    if (weights.size() != children.size()) {
      throw ConfigError("weighted operator has " + std::to_string(weights.size()) + " weights for " +
                        std::to_string(children.size()) + " operands");
    }
    for (double w : weights) {
      if (!(w > 0.0) || !std::isfinite(w)) {
        throw ConfigError("weights must be finite and strictly positive");
      }
    }
    Formula f = nary(kind, std::move(children));
    f.weights = std::move(weights);
    return f;
  }
};

// ---------------------------------------------------------------------------
// Structural queries

/// Number of future samples (beyond k) that evaluating at k reads.
inline std::size_t horizon(const Formula& f) {
  switch (f.kind) {
    case NodeKind::truth:
    case NodeKind::predicate: return 0;
    case NodeKind::always:
    case NodeKind::eventually: return f.hi + horizon(f.children[0]);
    default: {
      std::size_t h = 0;
      for (const auto& c : f.children) {
        h = std::max(h, horizon(c));
      }
      return h;
    }
  }
}

/// Largest predicate index used (0 if none).
inline std::size_t max_predicate(const Formula& f) {
  std::size_t j = f.kind == NodeKind::predicate ? f.predicate : 0;
  for (const auto& c : f.children) {
    j = std::max(j, max_predicate(c));
  }
  return j;
}

inline bool is_weighted(const Formula& f) {
  if (f.kind == NodeKind::weighted_and || f.kind == NodeKind::weighted_or) {
    return true;
  }
  return std::any_of(f.children.begin(), f.children.end(), [](const Formula& c) { return is_weighted(c); });
}

// ---------------------------------------------------------------------------
// Concrete syntax

namespace detail {

inline bool needs_group(const Formula& f) {
  return f.kind == NodeKind::conjunction || f.kind == NodeKind::disjunction;
}

inline void unparse_into(const Formula& f, std::string& out);

inline void unparse_operand(const Formula& f, std::string& out) {
  if (needs_group(f)) {
    out += "(";
    unparse_into(f, out);
    out += ")";
  } else {
    unparse_into(f, out);
  }
}

inline void unparse_into(const Formula& f, std::string& out) {
  switch (f.kind) {
    case NodeKind::truth: out += "TRUE"; break;
    case NodeKind::predicate:
      out += "h" + std::to_string(f.predicate) + (f.comparison == Comparison::greater ? " > " : " <= ") +
             text::format_double(f.threshold);
      break;
    case NodeKind::negation:
      out += "!";
      if (f.children[0].kind == NodeKind::predicate || needs_group(f.children[0])) {
        out += "(";
        unparse_into(f.children[0], out);
        out += ")";
      } else {
        unparse_into(f.children[0], out);
      }
      break;
    case NodeKind::conjunction:
    case NodeKind::disjunction: {
      const char* sep = f.kind == NodeKind::conjunction ? " & " : " | ";
      for (std::size_t i = 0; i < f.children.size(); ++i) {
        if (i > 0) {
          out += sep;
        }
        unparse_operand(f.children[i], out);
      }
      break;
    }
    case NodeKind::always:
    case NodeKind::eventually:
      out += f.kind == NodeKind::always ? "G[" : "F[";
      out += std::to_string(f.lo) + "," + std::to_string(f.hi) + "](";
      unparse_into(f.children[0], out);
      out += ")";
      break;
    case NodeKind::weighted_and:
    case NodeKind::weighted_or: {
      out += f.kind == NodeKind::weighted_and ? "AND{" : "OR{";
      for (std::size_t i = 0; i < f.weights.size(); ++i) {
        out += (i ? "," : "") + text::format_double(f.weights[i]);
      }
      out += "}(";
      for (std::size_t i = 0; i < f.children.size(); ++i) {
        if (i > 0) {
          out += "; ";
        }
        unparse_into(f.children[i], out);
      }
      out += ")";
      break;
    }
  }
}

} // namespace detail

/// Canonical text form; parse(unparse(f)) == f.
inline std::string unparse(const Formula& f) {
  std::string out;
  detail::unparse_into(f, out);
  return out;
}

// ---------------------------------------------------------------------------
// Parametric templates (declared before the parser, which fills them)

/// A value bound to a template hole: numbers for a, b, r and j; a
/// comparison for a `$cmp`-style hole.
using Binding = std::variant<double, Comparison>;
using Valuation = std::map<std::string, Binding>;

enum class HoleField { lower_bound, upper_bound, threshold, predicate, comparison };

struct Hole {
  std::string name;
  HoleField field;
  std::vector<std::size_t> path; // child indices from the root
};

/// PSVM-STL formula: a skeleton whose hole fields are filled by a valuation.
struct ParametricTemplate {
  Formula skeleton;
  std::vector<Hole> holes;

  std::vector<std::string> parameter_names() const {
    std::vector<std::string> names;
    for (const auto& h : holes) {
      if (std::find(names.begin(), names.end(), h.name) == names.end()) {
        names.push_back(h.name);
      }
    }
    return names;
  }
};

namespace detail {

class Parser {
public:
  Parser(std::string_view src, bool allow_holes) : src_(src), allow_holes_(allow_holes) {}

  Formula parse_all() {
    Formula f = parse_or();
    skip_ws();
    if (pos_ != src_.size()) {
      fail("unexpected '" + std::string(1, src_[pos_]) + "'");
    }
    return f;
  }

  std::vector<Hole> take_holes() { return std::move(holes_); }

private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError("formula syntax error: " + msg, 0, pos_); }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) {
      ++pos_;
    }
  }

  bool accept(std::string_view tok) {
    skip_ws();
    if (src_.substr(pos_, tok.size()) == tok) {
      pos_ += tok.size();
      return true;
    }
    return false;
  }

  void expect(std::string_view tok) {
    if (!accept(tok)) {
      fail("expected '" + std::string(tok) + "'");
    }
  }

  char next_non_space(std::size_t from) const {
    while (from < src_.size() && std::isspace(static_cast<unsigned char>(src_[from]))) {
      ++from;
    }
    return from < src_.size() ? src_[from] : '\0';
  }

  bool keyword_ahead(std::string_view kw) {
    skip_ws();
    if (src_.substr(pos_, kw.size()) != kw) {
      return false;
    }
    const std::size_t end = pos_ + kw.size();
    return end >= src_.size() || !std::isalnum(static_cast<unsigned char>(src_[end]));
  }

  std::optional<std::string> hole_name() {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == '$') {
      if (!allow_holes_) {
        fail("parameter holes are only allowed in templates");
      }
      ++pos_;
      const std::size_t start = pos_;
      while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
        ++pos_;
      }
      if (start == pos_) {
        fail("empty parameter name after '$'");
      }
      return std::string(src_.substr(start, pos_ - start));
    }
    return std::nullopt;
  }

  void add_hole(std::string name, HoleField field) { holes_.push_back({std::move(name), field, {}}); }

  double number() {
    skip_ws();
    const std::size_t start = pos_;
    if (pos_ < src_.size() && (src_[pos_] == '-' || src_[pos_] == '+')) {
      ++pos_;
    }
    while (pos_ < src_.size() &&
           (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.' || src_[pos_] == 'e' ||
            src_[pos_] == 'E' ||
            ((src_[pos_] == '-' || src_[pos_] == '+') && pos_ > start &&
             (src_[pos_ - 1] == 'e' || src_[pos_ - 1] == 'E')))) {
      ++pos_;
    }
    if (start == pos_) {
      fail("expected a number");
    }
    try {
      return text::parse_double(src_.substr(start, pos_ - start));
    } catch (const ParseError&) {
      pos_ = start;
      fail("malformed number");
    }
  }

  std::size_t integer() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
      ++pos_;
    }
    if (start == pos_) {
      fail("expected a non-negative integer");
    }
    return static_cast<std::size_t>(std::stoull(std::string(src_.substr(start, pos_ - start))));
  }

  Formula parse_and() {
    std::vector<Formula> parts;
    const std::size_t hole_mark = holes_.size();
    parts.push_back(parse_unary());
    std::vector<std::size_t> marks{hole_mark};
    while (true) {
      skip_ws();
      if (pos_ < src_.size() && src_[pos_] == '&') {
        ++pos_;
        marks.push_back(holes_.size());
        parts.push_back(parse_unary());
      } else {
        break;
      }
    }
    if (parts.size() > 1) {
      // Holes were recorded relative to this node; prepend the operand index.
      marks.push_back(holes_.size());
      for (std::size_t i = 0; i + 1 < marks.size(); ++i) {
        for (std::size_t h = marks[i]; h < marks[i + 1]; ++h) {
          insert_path_index(holes_[h], i);
        }
      }
    }
    return finish_nary(NodeKind::conjunction, std::move(parts));
  }

  // Hole paths are built bottom-up: each enclosing node prepends the index
  // of the operand the hole was found in.
  void insert_path_index(Hole& h, std::size_t index) {
    h.path.insert(h.path.begin(), index);
  }

  Formula finish_nary(NodeKind kind, std::vector<Formula> parts) {
    if (parts.size() == 1) {
      return std::move(parts.front());
    }
    Formula f;
    f.kind = kind;
    f.children = std::move(parts);
    return f;
  }

  Formula parse_unary() {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == '!') {
      ++pos_;
      const std::size_t mark = holes_.size();
      Formula child = parse_unary();
      for (std::size_t h = mark; h < holes_.size(); ++h) {
        insert_path_index(holes_[h], 0);
      }
      return Formula::negation(std::move(child));
    }
    return parse_primary();
  }

  Formula parse_primary() {
    skip_ws();
    if (pos_ >= src_.size()) {
      fail("unexpected end of formula");
    }
    const std::size_t start = pos_;
    if (keyword_ahead("TRUE")) {
      pos_ += 4;
      return Formula::truth();
    }
    if (keyword_ahead("FALSE")) {
      pos_ += 5;
      return Formula::falsity();
    }
    if (src_.substr(pos_, 4) == "AND{" || src_.substr(pos_, 3) == "OR{") {
      return parse_weighted();
    }
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      Formula inner = parse_or();
      expect(")");
      return inner;
    }
    if ((c == 'G' || c == 'F') && next_non_space(pos_ + 1) == '[') {
      ++pos_;
      return parse_temporal(c == 'G' ? NodeKind::always : NodeKind::eventually, start);
    }
    if (c == 'h') {
      return parse_predicate();
    }
    fail("expected TRUE, a predicate h<j>, '(', '!', G[..], F[..], AND{..} or OR{..}");
  }

  Formula parse_or() {
    std::vector<Formula> parts;
    std::vector<std::size_t> marks{holes_.size()};
    parts.push_back(parse_and());
    while (true) {
      skip_ws();
      if (pos_ < src_.size() && src_[pos_] == '|') {
        ++pos_;
        marks.push_back(holes_.size());
        parts.push_back(parse_and());
      } else {
        break;
      }
    }
    if (parts.size() > 1) {
      marks.push_back(holes_.size());
      for (std::size_t i = 0; i + 1 < marks.size(); ++i) {
        for (std::size_t h = marks[i]; h < marks[i + 1]; ++h) {
          insert_path_index(holes_[h], i);
        }
      }
    }
    return finish_nary(NodeKind::disjunction, std::move(parts));
  }

  Formula parse_temporal(NodeKind kind, std::size_t start) {
    expect("[");
    Formula f;
    f.kind = kind;
    std::optional<std::string> lo_hole = hole_name();
    if (!lo_hole) {
      f.lo = integer();
    }
    expect(",");
    std::optional<std::string> hi_hole = hole_name();
    if (!hi_hole) {
      f.hi = integer();
    }
    skip_ws();
    bool half_open = false;
    if (accept(")")) {
      half_open = true;
    } else {
      expect("]");
    }
    if (half_open) {
      if (hi_hole) {
        fail("half-open windows cannot use a parameter upper bound");
      }
      if (f.hi <= f.lo && !lo_hole) {
        pos_ = start;
        fail("empty time window [" + std::to_string(f.lo) + "," + std::to_string(f.hi) + ")");
      }
      if (f.hi == 0) {
        pos_ = start;
        fail("empty time window");
      }
      f.hi -= 1;
    }
    if (!lo_hole && !hi_hole && f.lo > f.hi) {
      pos_ = start;
      fail("empty time window [" + std::to_string(f.lo) + "," + std::to_string(f.hi) + "]");
    }
    if (lo_hole) {
      add_hole(*lo_hole, HoleField::lower_bound);
    }
    if (hi_hole) {
      add_hole(*hi_hole, HoleField::upper_bound);
    }
    expect("(");
    const std::size_t mark = holes_.size();
    Formula child = parse_or();
    for (std::size_t h = mark; h < holes_.size(); ++h) {
      insert_path_index(holes_[h], 0);
    }
    expect(")");
    f.children.push_back(std::move(child));
    return f;
  }

  Formula parse_predicate() {
    ++pos_; // 'h'
    Formula f;
    f.kind = NodeKind::predicate;
    if (auto name = hole_name()) {
      add_hole(*name, HoleField::predicate);
      f.predicate = 1;
    } else {
      const std::size_t at = pos_;
      f.predicate = integer();
      if (f.predicate == 0) {
        pos_ = at;
        fail("predicate indices start at h1");
      }
    }
    skip_ws();
    if (auto name = hole_name()) {
      add_hole(*name, HoleField::comparison);
    } else if (accept("<=")) {
      f.comparison = Comparison::less_equal;
    } else if (accept(">=") || accept("<")) {
      fail("unsupported comparison; predicates use '>' or '<='");
    } else if (accept(">")) {
      f.comparison = Comparison::greater;
    } else {
      fail("expected '>' or '<=' after predicate");
    }
    if (auto name = hole_name()) {
      add_hole(*name, HoleField::threshold);
    } else {
      f.threshold = number();
    }
    return f;
  }

  Formula parse_weighted() {
    const bool is_and = src_.substr(pos_, 3) == "AND";
    pos_ += is_and ? 4 : 3;
    std::vector<double> weights;
    weights.push_back(number());
    while (accept(",")) {
      weights.push_back(number());
    }
    expect("}");
    expect("(");
    std::vector<Formula> parts;
    std::vector<std::size_t> marks{holes_.size()};
    parts.push_back(parse_or());
    while (accept(";")) {
      marks.push_back(holes_.size());
      parts.push_back(parse_or());
    }
    marks.push_back(holes_.size());
    for (std::size_t i = 0; i + 1 < marks.size(); ++i) {
      for (std::size_t h = marks[i]; h < marks[i + 1]; ++h) {
        insert_path_index(holes_[h], i);
      }
    }
    expect(")");
    try {
      return is_and ? Formula::weighted_and(std::move(weights), std::move(parts))
                    : Formula::weighted_or(std::move(weights), std::move(parts));
    } catch (const ConfigError& e) {
      fail(e.what());
    }
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  bool allow_holes_;
  std::vector<Hole> holes_;
};

} // namespace detail

/// Parses the concrete syntax: `h<j> > r`, `h<j> <= r`, `!`, `&`, `|`,
/// `G[a,b](...)`, `F[a,b](...)` (also half-open `[a,b)`),
/// `AND{w1,...}(f1; ...)`, `OR{...}(...)`, `TRUE`, `FALSE`.
inline Formula parse_formula(std::string_view text) {
  detail::Parser p(text, false);
  return p.parse_all();
}

/// Parses a template: like parse_formula but `$name` may stand for a window
/// bound, a threshold, a predicate index (`h$j`) or a comparison.
inline ParametricTemplate parse_template(std::string_view text) {
  detail::Parser p(text, true);
  ParametricTemplate tpl;
  tpl.skeleton = p.parse_all();
  tpl.holes = p.take_holes();
  return tpl;
}

enum class PrimitiveKind { eventually, always };

/// The first-order primitive F_[$a,$b](h$j $cmp $r) or G_[$a,$b](...).
inline ParametricTemplate primitive_template(PrimitiveKind kind) {
  return parse_template(kind == PrimitiveKind::eventually ? "F[$a,$b](h$j $cmp $r)" : "G[$a,$b](h$j $cmp $r)");
}

namespace detail {

inline void validate_formula(const Formula& f) {
  switch (f.kind) {
    case NodeKind::predicate:
      if (f.predicate == 0 || !std::isfinite(f.threshold)) {
        throw ConfigError("invalid predicate");
      }
      break;
    case NodeKind::always:
    case NodeKind::eventually:
      if (f.lo > f.hi) {
        throw ConfigError("empty time window [" + std::to_string(f.lo) + "," + std::to_string(f.hi) + "]");
      }
      break;
    default: break;
  }
  for (const auto& c : f.children) {
    validate_formula(c);
  }
}

inline std::size_t as_index(const Binding& b, const std::string& name, bool allow_zero) {
  const double* v = std::get_if<double>(&b);
  if (v == nullptr || *v < 0.0 || std::floor(*v) != *v || (!allow_zero && *v == 0.0)) {
    throw ConfigError("parameter '" + name + "' must be a " + (allow_zero ? "non-negative" : "positive") +
                      " integer");
  }
  return static_cast<std::size_t>(*v);
}

} // namespace detail

/// Binds every hole of `tpl` from `theta`, producing phi_theta.
inline Formula instantiate(const ParametricTemplate& tpl, const Valuation& theta) {
  Formula out = tpl.skeleton;
  for (const auto& hole : tpl.holes) {
    const auto it = theta.find(hole.name);
    if (it == theta.end()) {
      throw ConfigError("template parameter '" + hole.name + "' is unbound");
    }
    Formula* node = &out;
    for (std::size_t i : hole.path) {
      node = &node->children.at(i);
    }
    switch (hole.field) {
      case HoleField::lower_bound: node->lo = detail::as_index(it->second, hole.name, true); break;
      case HoleField::upper_bound: node->hi = detail::as_index(it->second, hole.name, true); break;
      case HoleField::predicate: node->predicate = detail::as_index(it->second, hole.name, false); break;
      case HoleField::threshold: {
        const double* v = std::get_if<double>(&it->second);
        if (v == nullptr || !std::isfinite(*v)) {
          throw ConfigError("parameter '" + hole.name + "' must be a finite number");
        }
        node->threshold = *v;
        break;
      }
      case HoleField::comparison: {
        const auto* c = std::get_if<Comparison>(&it->second);
        if (c == nullptr) {
          throw ConfigError("parameter '" + hole.name + "' must be a comparison");
        }
        node->comparison = *c;
        break;
      }
    }
  }
  detail::validate_formula(out);
  return out;
}

// ---------------------------------------------------------------------------
// Semantics. Evaluation runs bottom-up over the whole signal: each node
// yields its value at every start time k in [0, T - horizon(node)].

namespace detail {

/// out[k] = max (or min) of v[k+a .. k+b] for k in [0, len).
inline std::vector<double> window_extreme(const std::vector<double>& v, std::size_t a, std::size_t b, std::size_t len,
                                          bool take_max) {
  std::vector<double> out(len);
  std::deque<std::size_t> dq;
  std::size_t next = a;
  for (std::size_t k = 0; k < len; ++k) {
    const std::size_t right = k + b;
    for (; next <= right; ++next) {
      while (!dq.empty() && (take_max ? v[dq.back()] <= v[next] : v[dq.back()] >= v[next])) {
        dq.pop_back();
      }
      dq.push_back(next);
    }
    while (dq.front() < k + a) {
      dq.pop_front();
    }
    out[k] = v[dq.front()];
  }
  return out;
}

inline double clamp_finite(double v) { return std::clamp(v, -robustness_top, robustness_top); }

inline void check_dims(const Formula& f, const StSignal& s) {
  const std::size_t j = max_predicate(f);
  if (j > s.dims()) {
    throw ShapeError("formula uses h" + std::to_string(j) + " but the signal has " + std::to_string(s.dims()) +
                     " dimensions");
  }
}

inline std::vector<double> robustness_trace(const Formula& f, const StSignal& s, bool weighted) {
  const std::size_t len = s.steps() - horizon(f);
  switch (f.kind) {
    case NodeKind::truth: return std::vector<double>(len, robustness_top);
    case NodeKind::predicate: {
      std::vector<double> out(len);
      for (std::size_t k = 0; k < len; ++k) {
        const double h = s.at(k, f.predicate - 1);
        out[k] = f.comparison == Comparison::greater ? h - f.threshold : f.threshold - h;
      }
      return out;
    }
    case NodeKind::negation: {
      auto out = robustness_trace(f.children[0], s, weighted);
      for (double& v : out) {
        v = -v;
      }
      return out;
    }
    case NodeKind::always:
    case NodeKind::eventually: {
      const auto child = robustness_trace(f.children[0], s, weighted);
      return window_extreme(child, f.lo, f.hi, len, f.kind == NodeKind::eventually);
    }
    default: {
      const bool is_max = f.kind == NodeKind::disjunction || f.kind == NodeKind::weighted_or;
      const bool use_weights = weighted && !f.weights.empty();
      const double total = use_weights ? std::accumulate(f.weights.begin(), f.weights.end(), 0.0) : 0.0;
      std::vector<double> out(len, is_max ? -std::numeric_limits<double>::infinity()
                                          : std::numeric_limits<double>::infinity());
      for (std::size_t i = 0; i < f.children.size(); ++i) {
        const auto child = robustness_trace(f.children[i], s, weighted);
        const double w =
            use_weights ? f.weights[i] * static_cast<double>(f.children.size()) / total : 1.0;
        for (std::size_t k = 0; k < len; ++k) {
          const double v = use_weights ? clamp_finite(w * child[k]) : child[k];
          out[k] = is_max ? std::max(out[k], v) : std::min(out[k], v);
        }
      }
      return out;
    }
  }
}

inline std::vector<char> satisfaction_trace(const Formula& f, const StSignal& s) {
  const std::size_t len = s.steps() - horizon(f);
  switch (f.kind) {
    case NodeKind::truth: return std::vector<char>(len, 1);
    case NodeKind::predicate: {
      std::vector<char> out(len);
      for (std::size_t k = 0; k < len; ++k) {
        const double h = s.at(k, f.predicate - 1);
        out[k] = f.comparison == Comparison::greater ? h > f.threshold : h <= f.threshold;
      }
      return out;
    }
    case NodeKind::negation: {
      auto out = satisfaction_trace(f.children[0], s);
      for (char& v : out) {
        v = !v;
      }
      return out;
    }
    case NodeKind::always:
    case NodeKind::eventually: {
      const auto child = satisfaction_trace(f.children[0], s);
      std::vector<std::size_t> prefix(child.size() + 1, 0);
      for (std::size_t i = 0; i < child.size(); ++i) {
        prefix[i + 1] = prefix[i] + static_cast<std::size_t>(child[i]);
      }
      std::vector<char> out(len);
      const std::size_t width = f.hi - f.lo + 1;
      for (std::size_t k = 0; k < len; ++k) {
        const std::size_t count = prefix[k + f.hi + 1] - prefix[k + f.lo];
        out[k] = f.kind == NodeKind::always ? count == width : count > 0;
      }
      return out;
    }
    default: {
      const bool is_or = f.kind == NodeKind::disjunction || f.kind == NodeKind::weighted_or;
      std::vector<char> out(len, is_or ? 0 : 1);
      for (const auto& c : f.children) {
        const auto child = satisfaction_trace(c, s);
        for (std::size_t k = 0; k < len; ++k) {
          out[k] = is_or ? (out[k] || child[k]) : (out[k] && child[k]);
        }
      }
      return out;
    }
  }
}

inline void check_horizon(const Formula& f, const StSignal& s, std::size_t k) {
  check_dims(f, s);
  const std::size_t need = k + horizon(f);
  if (need > s.horizon()) {
    throw HorizonError(need, s.horizon());
  }
}

} // namespace detail

/// Qualitative satisfaction (s, k) |= f.
inline bool satisfies(const StSignal& s, const Formula& f, std::size_t k = 0) {
  detail::check_horizon(f, s, k);
  return detail::satisfaction_trace(f, s)[k] != 0;
}

/// Robustness rho(s, f, k). Weighted operators are evaluated as their
/// unweighted counterparts; see robustness_weighted.
inline double robustness(const StSignal& s, const Formula& f, std::size_t k = 0) {
  detail::check_horizon(f, s, k);
  return detail::robustness_trace(f, s, false)[k];
}

/// Robustness with weighted conjunction/disjunction: AND^w -> min_i(w'_i rho_i),
/// OR^w -> max_i(w'_i rho_i), with w'_i = w_i N / sum(w) (mean weight 1).
inline double robustness_weighted(const StSignal& s, const Formula& f, std::size_t k = 0) {
  detail::check_horizon(f, s, k);
  return detail::robustness_trace(f, s, true)[k];
}

/// Robustness at every admissible start time 0..T-horizon(f).
inline std::vector<double> robustness_trace(const StSignal& s, const Formula& f) {
  detail::check_horizon(f, s, 0);
  return detail::robustness_trace(f, s, false);
}

} // namespace svmstl
