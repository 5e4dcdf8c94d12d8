#pragma once

#include "svmstl/features.hpp"
#include "svmstl/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace svmstl {

/// l_B = +1 where the class label equals j, -1 otherwise.
inline std::vector<int> one_vs_rest_split(std::span<const int> labels, int j, int num_classes) {
  if (j < 1 || j > num_classes) {
    throw ConfigError("class index " + std::to_string(j) + " outside 1.." + std::to_string(num_classes));
  }
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 1 || labels[i] > num_classes) {
      throw ConfigError("label " + std::to_string(labels[i]) + " outside 1.." + std::to_string(num_classes));
    }
    out[i] = labels[i] == j ? 1 : -1;
  }
  return out;
}

/// Per-dimension affine map z = (x - mean) / scale.
struct Standardization {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardization identity(std::size_t m) { return {std::vector<double>(m, 0.0), std::vector<double>(m, 1.0)}; }

  static Standardization fit(std::span<const std::vector<double>> xs) {
    const std::size_t m = xs.front().size();
    Standardization s{std::vector<double>(m, 0.0), std::vector<double>(m, 1.0)};
    const double n = static_cast<double>(xs.size());
    for (const auto& x : xs) {
      for (std::size_t d = 0; d < m; ++d) {
        s.mean[d] += x[d] / n;
      }
    }
    for (std::size_t d = 0; d < m; ++d) {
      double var = 0.0;
      for (const auto& x : xs) {
        var += (x[d] - s.mean[d]) * (x[d] - s.mean[d]);
      }
      const double sd = std::sqrt(var / n);
      s.scale[d] = sd > 1e-12 ? sd : 1.0;
    }
    return s;
  }

  std::vector<double> apply(std::span<const double> x) const {
    if (x.size() != mean.size()) {
      throw ShapeError("feature vector has " + std::to_string(x.size()) + " entries, model expects " +
                       std::to_string(mean.size()));
    }
    std::vector<double> z(x.size());
    for (std::size_t d = 0; d < x.size(); ++d) {
      z[d] = (x[d] - mean[d]) / scale[d];
    }
    return z;
  }

  friend bool operator==(const Standardization&, const Standardization&) = default;
};

struct SvmOptions {
  double C = 10.0;
  bool standardize = true;
  /// Stop when the maximal KKT violation drops below this.
  double tolerance = 1e-8;
  std::size_t max_iterations = 10'000'000;
};

struct SvmStats {
  double margin = 0.0;          // 1 / ||w||
  std::size_t violations = 0;   // training points with l (w.z + b) < 1 - 1e-3
  double hinge_loss = 0.0;      // sum of max(0, 1 - l (w.z + b))
  std::size_t iterations = 0;
  std::size_t support_vectors = 0;
};

/// Linear classifier defining h_j. Weights and bias act on standardized
/// features; `standardization` maps raw features into that space.
struct PredicateModel {
  int class_index = 0;
  std::vector<double> weights;
  double bias = 0.0;
  Standardization standardization;
  std::string extractor_id;
  SvmStats stats;

  double norm() const {
    double s = 0.0;
    for (double w : weights) {
      s += w * w;
    }
    return std::sqrt(s);
  }

  /// (w.z + b) / ||w|| for an already extracted raw feature vector.
  double value(std::span<const double> features) const {
    const auto z = standardization.apply(features);
    double dot = bias;
    for (std::size_t d = 0; d < z.size(); ++d) {
      dot += weights[d] * z[d];
    }
    return dot / norm();
  }
};

/// Soft-margin linear SVM: minimizes 1/2 ||w||^2 + C sum hinge(1 - l (w.x + b)).
/// Solved in the dual by sequential minimal optimization with second-order
/// working-set selection, which is deterministic and needs no seed.
inline PredicateModel train_svm(std::span<const std::vector<double>> features, std::span<const int> labels,
                                const SvmOptions& opt = {}) {
  if (features.empty() || features.size() != labels.size()) {
    throw ShapeError("train_svm needs one label per feature vector");
  }
  if (!(opt.C > 0.0) || !std::isfinite(opt.C)) {
    throw ConfigError("SVM C must be finite and positive");
  }
  const std::size_t n = features.size();
  const std::size_t m = features.front().size();
  bool has_pos = false;
  bool has_neg = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (features[i].size() != m) {
      throw ShapeError("feature vectors have inconsistent dimension");
    }
    for (double v : features[i]) {
      if (!std::isfinite(v)) {
        throw ShapeError("non-finite feature value");
      }
    }
    if (labels[i] == 1) {
      has_pos = true;
    } else if (labels[i] == -1) {
      has_neg = true;
    } else {
      throw ConfigError("binary labels must be +1 or -1");
    }
  }
  if (!has_pos || !has_neg) {
    throw DegenerateDataError("SVM training needs both labels; got only " + std::string(has_pos ? "+1" : "-1"));
  }

  PredicateModel model;
  model.standardization = opt.standardize ? Standardization::fit(features) : Standardization::identity(m);
  std::vector<std::vector<double>> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = model.standardization.apply(features[i]);
  }
  std::vector<double> y(n);
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = labels[i];
    double s = 0.0;
    for (double v : x[i]) {
      s += v * v;
    }
    sq[i] = s;
  }
  const auto dot = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t d = 0; d < m; ++d) {
      s += x[a][d] * x[b][d];
    }
    return s;
  };

  const double C = opt.C;
  constexpr double tau = 1e-12;
  std::vector<double> alpha(n, 0.0);
  std::vector<double> grad(n, -1.0); // G = Q alpha - e
  std::vector<double> w(m, 0.0);
  std::size_t iter = 0;
  for (; iter < opt.max_iterations; ++iter) {
    // Maximal violating index i, then j by second-order gain.
    double gmax = -std::numeric_limits<double>::infinity();
    std::size_t i = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] > 0) {
        if (alpha[t] < C && -grad[t] >= gmax) {
          gmax = -grad[t];
          i = t;
        }
      } else if (alpha[t] > 0 && grad[t] >= gmax) {
        gmax = grad[t];
        i = t;
      }
    }
    if (i == n) {
      break;
    }
    double gmax2 = -std::numeric_limits<double>::infinity();
    double best_gain = std::numeric_limits<double>::infinity();
    std::size_t j = n;
    for (std::size_t t = 0; t < n; ++t) {
      const double q_it = y[i] * y[t] * dot(i, t);
      if (y[t] > 0) {
        if (alpha[t] > 0) {
          const double diff = gmax + grad[t];
          gmax2 = std::max(gmax2, grad[t]);
          if (diff > 0) {
            double quad = sq[i] + sq[t] - 2.0 * y[i] * q_it;
            quad = quad > 0 ? quad : tau;
            const double gain = -(diff * diff) / quad;
            if (gain <= best_gain) {
              best_gain = gain;
              j = t;
            }
          }
        }
      } else if (alpha[t] < C) {
        const double diff = gmax - grad[t];
        gmax2 = std::max(gmax2, -grad[t]);
        if (diff > 0) {
          double quad = sq[i] + sq[t] + 2.0 * y[i] * q_it;
          quad = quad > 0 ? quad : tau;
          const double gain = -(diff * diff) / quad;
          if (gain <= best_gain) {
            best_gain = gain;
            j = t;
          }
        }
      }
    }
    if (gmax + gmax2 < opt.tolerance || j == n) {
      break;
    }

    const double old_i = alpha[i];
    const double old_j = alpha[j];
    const double q_ij = y[i] * y[j] * dot(i, j);
    if (y[i] != y[j]) {
      double quad = sq[i] + sq[j] + 2.0 * q_ij;
      quad = quad > 0 ? quad : tau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = C - diff;
        }
      } else if (alpha[j] > C) {
        alpha[j] = C;
        alpha[i] = C + diff;
      }
    } else {
      double quad = sq[i] + sq[j] - 2.0 * q_ij;
      quad = quad > 0 ? quad : tau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = sum - C;
        }
      } else if (alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = sum;
      }
      if (sum > C) {
        if (alpha[j] > C) {
          alpha[j] = C;
          alpha[i] = sum - C;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = sum;
      }
    }
    const double di = (alpha[i] - old_i) * y[i];
    const double dj = (alpha[j] - old_j) * y[j];
    std::vector<double> dw(m);
    for (std::size_t d = 0; d < m; ++d) {
      dw[d] = di * x[i][d] + dj * x[j][d];
      w[d] += dw[d];
    }
    for (std::size_t t = 0; t < n; ++t) {
      double s = 0.0;
      for (std::size_t d = 0; d < m; ++d) {
        s += dw[d] * x[t][d];
      }
      grad[t] += y[t] * s;
    }
  }

  // Bias from free support vectors, else the midpoint of the feasible range.
  double upper = std::numeric_limits<double>::infinity();
  double lower = -std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  std::size_t free_count = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] >= C) {
      if (y[t] < 0) {
        upper = std::min(upper, yg);
      } else {
        lower = std::max(lower, yg);
      }
    } else if (alpha[t] <= 0) {
      if (y[t] > 0) {
        upper = std::min(upper, yg);
      } else {
        lower = std::max(lower, yg);
      }
    } else {
      ++free_count;
      free_sum += yg;
    }
  }
  const double rho = free_count > 0 ? free_sum / static_cast<double>(free_count) : 0.5 * (upper + lower);

  model.weights = std::move(w);
  model.bias = 0.0 - rho;
  if (!(model.norm() > 0.0)) {
    throw DegenerateDataError("SVM found no separating direction (identical features for both labels)");
  }
  model.stats.iterations = iter;
  model.stats.margin = 1.0 / model.norm();
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] > 0) {
      ++model.stats.support_vectors;
    }
    double f = model.bias;
    for (std::size_t d = 0; d < m; ++d) {
      f += model.weights[d] * x[t][d];
    }
    const double slack = 1.0 - y[t] * f;
    if (slack > 1e-3) {
      ++model.stats.violations;
    }
    model.stats.hinge_loss += std::max(0.0, slack);
  }
  return model;
}

/// h_j(I) = (w_j . f(I) + b_j) / ||w_j||.
inline double predicate_value(const PredicateModel& model, const FeatureVector& f) {
  if (f.extractor_id != model.extractor_id) {
    throw ConfigError("predicate h" + std::to_string(model.class_index) + " was trained on features from '" +
                      model.extractor_id + "', got '" + f.extractor_id + "'");
  }
  return model.value(f.values);
}

struct PredicateSuite {
  std::vector<PredicateModel> models; // h_1..h_n in order
  std::string extractor_id;
  double C = 10.0;

  std::size_t size() const noexcept { return models.size(); }

  void validate() const {
    if (models.empty()) {
      throw ConfigError("predicate suite is empty");
    }
    for (std::size_t j = 0; j < models.size(); ++j) {
      if (models[j].class_index != static_cast<int>(j + 1)) {
        throw ConfigError("predicate suite classes must be 1..n in order");
      }
      if (models[j].extractor_id != extractor_id) {
        throw ConfigError("predicate suite mixes extractors");
      }
    }
  }
};

/// Trains h_1..h_n one-vs-rest on labeled feature vectors (labels 1..n).
/// The n problems run in parallel; each is internally sequential.
inline PredicateSuite train_predicate_suite(std::span<const FeatureVector> features, std::span<const int> labels,
                                            int num_classes, const SvmOptions& opt = {}, std::size_t jobs = 1) {
  require_consistent(features);
  if (features.size() != labels.size()) {
    throw ShapeError("one label per feature vector required");
  }
  std::vector<std::vector<double>> xs;
  xs.reserve(features.size());
  for (const auto& f : features) {
    xs.push_back(f.values);
  }
  PredicateSuite suite;
  suite.extractor_id = features.front().extractor_id;
  suite.C = opt.C;
  suite.models.resize(static_cast<std::size_t>(num_classes));
  parallel_for(suite.models.size(), jobs, [&](std::size_t j) {
    const auto binary = one_vs_rest_split(labels, static_cast<int>(j + 1), num_classes);
    try {
      suite.models[j] = train_svm(xs, binary, opt);
    } catch (const DegenerateDataError& e) {
      throw DegenerateDataError("class " + std::to_string(j + 1) + ": " + e.what());
    }
    suite.models[j].class_index = static_cast<int>(j + 1);
    suite.models[j].extractor_id = suite.extractor_id;
  });
  return suite;
}

/// s[k] = (h_1(f_k), ..., h_n(f_k)) for per-frame feature vectors f_0..f_T.
inline StSignal features_to_signal(std::span<const FeatureVector> frames, const PredicateSuite& suite) {
  if (frames.empty()) {
    throw ShapeError("cannot build a signal from zero frames");
  }
  std::vector<double> values;
  values.reserve(frames.size() * suite.size());
  for (const auto& f : frames) {
    for (const auto& model : suite.models) {
      values.push_back(predicate_value(model, f));
    }
  }
  std::vector<std::string> names;
  for (std::size_t j = 1; j <= suite.size(); ++j) {
    names.push_back("h_" + std::to_string(j));
  }
  return StSignal(frames.size(), suite.size(), std::move(values), std::move(names));
}

/// The operator h: S -> s.
inline StSignal trajectory_to_signal(const StTrajectory& traj, const PredicateSuite& suite, const Extractor& extractor) {
  if (extractor.id() != suite.extractor_id) {
    throw ConfigError("extractor '" + extractor.id() + "' does not match the suite's '" + suite.extractor_id + "'");
  }
  std::vector<FeatureVector> frames;
  frames.reserve(traj.size());
  for (std::size_t k = 0; k < traj.size(); ++k) {
    frames.push_back(extractor.extract(FrameRef{traj.id(), k, traj.frame(k)}));
  }
  return features_to_signal(frames, suite);
}

// ---------------------------------------------------------------------------
// Suite file

namespace detail {

inline std::string join_doubles(std::span<const double> v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out += (i ? "," : "") + text::format_double(v[i]);
  }
  return out;
}

inline std::vector<double> parse_doubles(std::string_view s, std::size_t expected, std::size_t line) {
  std::vector<double> out;
  for (auto v : text::split(s, ',')) {
    out.push_back(text::parse_double(v, line));
  }
  if (out.size() != expected) {
    throw ParseError("expected " + std::to_string(expected) + " values, got " + std::to_string(out.size()), line);
  }
  return out;
}

} // namespace detail

inline std::string format_predicate_suite(const PredicateSuite& suite) {
  const std::size_t m = suite.models.empty() ? 0 : suite.models.front().weights.size();
  std::string out = "# predicate-suite n=" + std::to_string(suite.size()) + " m=" + std::to_string(m) +
                    " extractor=" + suite.extractor_id + " C=" + text::format_double(suite.C) + "\n";
  for (const auto& model : suite.models) {
    out += "class " + std::to_string(model.class_index) + "\n";
    out += "w " + detail::join_doubles(model.weights) + "\n";
    out += "b " + text::format_double(model.bias) + "\n";
    out += "mean " + detail::join_doubles(model.standardization.mean) + "\n";
    out += "scale " + detail::join_doubles(model.standardization.scale) + "\n";
    out += "stats margin=" + text::format_double(model.stats.margin) +
           " violations=" + std::to_string(model.stats.violations) +
           " support=" + std::to_string(model.stats.support_vectors) +
           " iterations=" + std::to_string(model.stats.iterations) + "\n";
  }
  return out;
}

inline PredicateSuite parse_predicate_suite(std::string_view contents) {
  const auto rows = text::lines(contents);
  if (rows.empty() || rows.front().rfind("# predicate-suite", 0) != 0) {
    throw ParseError("missing '# predicate-suite' header", 1);
  }
  PredicateSuite suite;
  std::size_t n = 0;
  std::size_t m = 0;
  for (auto tok : text::split(rows.front().substr(17), ' ')) {
    const auto eq = tok.find('=');
    if (tok.empty() || eq == std::string_view::npos) {
      continue;
    }
    const auto key = tok.substr(0, eq);
    const auto value = tok.substr(eq + 1);
    if (key == "n") {
      n = static_cast<std::size_t>(text::parse_int(value, 1));
    } else if (key == "m") {
      m = static_cast<std::size_t>(text::parse_int(value, 1));
    } else if (key == "extractor") {
      suite.extractor_id = std::string(value);
    } else if (key == "C") {
      suite.C = text::parse_double(value, 1);
    }
  }
  PredicateModel* cur = nullptr;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto row = text::trim(rows[i]);
    if (row.empty()) {
      continue;
    }
    const auto sp = row.find(' ');
    const auto key = row.substr(0, sp);
    const auto rest = sp == std::string_view::npos ? std::string_view{} : text::trim(row.substr(sp + 1));
    if (key == "class") {
      suite.models.emplace_back();
      cur = &suite.models.back();
      cur->class_index = static_cast<int>(text::parse_int(rest, i + 1));
      cur->extractor_id = suite.extractor_id;
      continue;
    }
    if (cur == nullptr) {
      throw ParseError("expected 'class <j>'", i + 1);
    }
    if (key == "w") {
      cur->weights = detail::parse_doubles(rest, m, i + 1);
    } else if (key == "b") {
      cur->bias = text::parse_double(rest, i + 1);
    } else if (key == "mean") {
      cur->standardization.mean = detail::parse_doubles(rest, m, i + 1);
    } else if (key == "scale") {
      cur->standardization.scale = detail::parse_doubles(rest, m, i + 1);
    } else if (key == "stats") {
      for (auto tok : text::split(rest, ' ')) {
        const auto eq = tok.find('=');
        if (eq == std::string_view::npos) {
          continue;
        }
        const auto k = tok.substr(0, eq);
        const auto v = tok.substr(eq + 1);
        if (k == "margin") {
          cur->stats.margin = text::parse_double(v, i + 1);
        } else if (k == "violations") {
          cur->stats.violations = static_cast<std::size_t>(text::parse_int(v, i + 1));
        } else if (k == "support") {
          cur->stats.support_vectors = static_cast<std::size_t>(text::parse_int(v, i + 1));
        } else if (k == "iterations") {
          cur->stats.iterations = static_cast<std::size_t>(text::parse_int(v, i + 1));
        }
      }
    } else {
      throw ParseError("unknown key '" + std::string(key) + "'", i + 1);
    }
  }
  if (suite.models.size() != n) {
    throw ParseError("header declares n=" + std::to_string(n) + " but " + std::to_string(suite.models.size()) +
                     " classes follow");
  }
  for (const auto& model : suite.models) {
    if (model.weights.size() != m || model.standardization.mean.size() != m ||
        model.standardization.scale.size() != m) {
      throw ParseError("class " + std::to_string(model.class_index) + " is incomplete");
    }
  }
  suite.validate();
  return suite;
}

inline PredicateSuite load_predicate_suite(const std::string& path) {
  return parse_predicate_suite(text::read_file(path));
}

inline void save_predicate_suite(const PredicateSuite& suite, const std::string& path) {
  text::write_file(path, format_predicate_suite(suite));
}

} // namespace svmstl
