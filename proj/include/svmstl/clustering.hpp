#pragma once

#include "svmstl/core.hpp"
#include "svmstl/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace svmstl {

using Point = std::vector<double>;

enum class DistanceKind { squared_euclidean, dtw };
enum class DtwCost { absolute, squared };

struct DtwOptions {
  DtwCost cost = DtwCost::absolute;
  /// Sakoe-Chiba band half-width; unset means unconstrained.
  std::optional<std::size_t> band;
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("distance between vectors of length " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  }
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    d += t * t;
  }
  return d;
}

/// Dynamic time warping: D(i,j) = cost(a_i, b_j) + min(D(i-1,j), D(i,j-1), D(i-1,j-1)).
inline double dtw_distance(std::span<const double> a, std::span<const double> b, const DtwOptions& opt = {}) {
  if (a.empty() || b.empty()) {
    throw ShapeError("dtw_distance needs nonempty sequences");
  }
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  const double inf = std::numeric_limits<double>::infinity();
  const std::size_t diff = n > m ? n - m : m - n;
  const std::size_t band = opt.band ? std::max(*opt.band, diff) : std::max(n, m);
  std::vector<double> prev(m + 1, inf);
  std::vector<double> cur(m + 1, inf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    std::fill(cur.begin(), cur.end(), inf);
    const std::size_t lo = i > band ? i - band : 1;
    const std::size_t hi = std::min(m, i + band);
    for (std::size_t j = lo; j <= hi; ++j) {
      const double d = a[i - 1] - b[j - 1];
      const double cost = opt.cost == DtwCost::absolute ? std::abs(d) : d * d;
      cur[j] = cost + std::min({prev[j], cur[j - 1], prev[j - 1]});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

/// Dimension-major flattening: h1 over all times, then h2, ...
inline std::vector<double> flatten_signal(const StSignal& s) {
  std::vector<double> out;
  out.reserve(s.steps() * s.dims());
  for (std::size_t d = 0; d < s.dims(); ++d) {
    for (std::size_t k = 0; k < s.steps(); ++k) {
      out.push_back(s.at(k, d));
    }
  }
  return out;
}

/// Distance used by a clustering criterion.
struct ClusterDistance {
  DistanceKind kind = DistanceKind::squared_euclidean;
  DtwOptions dtw;

  double operator()(std::span<const double> x, std::span<const double> center) const {
    return kind == DistanceKind::squared_euclidean ? squared_distance(x, center) : dtw_distance(x, center, dtw);
  }
};

struct ClusterModel {
  std::vector<Point> centers;
  ClusterDistance distance;
  double criterion = 0.0;

  std::size_t clusters() const noexcept { return centers.size(); }
  std::size_t dimension() const noexcept { return centers.empty() ? 0 : centers.front().size(); }
};

/// Labels are 1-based cluster indices.
struct ClusterResult {
  std::vector<int> labels;
  ClusterModel model;
  std::vector<double> history;
  std::size_t iterations = 0;
};

namespace detail {

inline void check_points(std::span<const Point> points, std::span<const Point> centers) {
  if (points.empty() || centers.empty()) {
    throw ShapeError("clustering needs nonempty items and centers");
  }
  const std::size_t m = points.front().size();
  for (const auto& p : points) {
    if (p.size() != m) {
      throw ShapeError("items have mixed dimensions");
    }
  }
  for (const auto& c : centers) {
    if (c.size() != m) {
      throw ShapeError("center dimension " + std::to_string(c.size()) + " does not match item dimension " +
                       std::to_string(m));
    }
  }
}

inline std::size_t count_distinct(std::span<const Point> points) {
  std::set<Point> distinct(points.begin(), points.end());
  return distinct.size();
}

inline std::vector<Point> unpack_centers(std::span<const double> flat, std::size_t n, std::size_t m) {
  std::vector<Point> centers(n);
  for (std::size_t j = 0; j < n; ++j) {
    centers[j].assign(flat.begin() + static_cast<std::ptrdiff_t>(j * m),
                      flat.begin() + static_cast<std::ptrdiff_t>((j + 1) * m));
  }
  return centers;
}

} // namespace detail

/// Nearest-center labels (1-based); ties go to the lowest index.
inline std::vector<int> assign(std::span<const Point> points, std::span<const Point> centers,
                               const ClusterDistance& distance = {}) {
  detail::check_points(points, centers);
  std::vector<int> labels(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t j = 0; j < centers.size(); ++j) {
      const double d = distance(points[i], centers[j]);
      if (d < best) {
        best = d;
        arg = j;
      }
    }
    labels[i] = static_cast<int>(arg + 1);
  }
  return labels;
}

/// f_crit: sum over items of the distance to the nearest center.
inline double criterion(std::span<const Point> points, std::span<const Point> centers,
                        const ClusterDistance& distance = {}) {
  detail::check_points(points, centers);
  double total = 0.0;
  for (const auto& p : points) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : centers) {
      best = std::min(best, distance(p, c));
    }
    total += best;
  }
  return total;
}

/// How PSO particles are initialized for clustering. `data_points` starts
/// each particle's centers on distinct items; `uniform_box` uses the PSO
/// default of uniform positions over the bounding box.
enum class ClusterInit { data_points, uniform_box };

struct PsoClusterOptions {
  std::size_t clusters = 2;
  PsoHyper hyper;
  StopCondition stop;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  ClusterInit init = ClusterInit::data_points;
  ClusterDistance distance;
};

/// k-means criterion minimized by PSO over concatenated center coordinates.
inline ClusterResult cluster_pso(std::span<const Point> points, const PsoClusterOptions& opt) {
  if (opt.clusters == 0) {
    throw ConfigError("cluster count must be at least 1");
  }
  if (points.empty()) {
    throw DegenerateDataError("no items to cluster");
  }
  detail::check_points(points, points.subspan(0, 1));
  const std::size_t distinct = detail::count_distinct(points);
  if (distinct < opt.clusters) {
    throw DegenerateDataError("only " + std::to_string(distinct) + " distinct items for " +
                              std::to_string(opt.clusters) + " clusters");
  }
  const std::size_t n = opt.clusters;
  const std::size_t m = points.front().size();
  Box box{std::vector<double>(n * m), std::vector<double>(n * m)};
  for (std::size_t d = 0; d < m; ++d) {
    double lo = points.front()[d];
    double hi = lo;
    for (const auto& p : points) {
      lo = std::min(lo, p[d]);
      hi = std::max(hi, p[d]);
    }
    for (std::size_t j = 0; j < n; ++j) {
      box.lower[j * m + d] = lo;
      box.upper[j * m + d] = hi;
    }
  }

  PsoOptions pso;
  pso.hyper = opt.hyper;
  pso.stop = opt.stop;
  pso.seed = opt.seed;
  pso.jobs = opt.jobs;
  if (opt.init == ClusterInit::data_points) {
    std::vector<std::size_t> unique_index;
    std::set<Point> seen;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (seen.insert(points[i]).second) {
        unique_index.push_back(i);
      }
    }
    Rng rng(derive_seed(opt.seed, 1));
    for (std::size_t k = 0; k < opt.hyper.swarm_size; ++k) {
      rng.shuffle(unique_index);
      std::vector<double> start;
      start.reserve(n * m);
      for (std::size_t j = 0; j < n; ++j) {
        const auto& p = points[unique_index[j]];
        start.insert(start.end(), p.begin(), p.end());
      }
      pso.initial_positions.push_back(std::move(start));
    }
  }

  const auto objective = [&](std::span<const double> flat) {
    const auto centers = detail::unpack_centers(flat, n, m);
    return criterion(points, centers, opt.distance);
  };
  const PsoResult r = pso_minimize(objective, box, pso);

  ClusterResult out;
  out.model.centers = detail::unpack_centers(r.best_point, n, m);
  out.model.distance = opt.distance;
  out.model.criterion = r.best_value;
  out.labels = assign(points, out.model.centers, opt.distance);
  out.history = r.history;
  out.iterations = r.iterations;
  return out;
}

/// Image clustering (squared feature distance).
inline ClusterResult cluster_images_pso(std::span<const Point> features, PsoClusterOptions opt) {
  opt.distance.kind = DistanceKind::squared_euclidean;
  return cluster_pso(features, opt);
}

/// Trajectory clustering: DTW over dimension-major flattened signals.
inline ClusterResult cluster_trajectories(std::span<const StSignal> signals, PsoClusterOptions opt) {
  if (signals.empty()) {
    throw DegenerateDataError("no signals to cluster");
  }
  std::vector<Point> flat;
  flat.reserve(signals.size());
  for (const auto& s : signals) {
    if (s.steps() != signals.front().steps() || s.dims() != signals.front().dims()) {
      throw ShapeError("signals have mixed shapes: " + std::to_string(s.steps()) + "x" + std::to_string(s.dims()) +
                       " vs " + std::to_string(signals.front().steps()) + "x" +
                       std::to_string(signals.front().dims()));
    }
    flat.push_back(flatten_signal(s));
  }
  opt.distance.kind = DistanceKind::dtw;
  if (opt.clusters == 1) {
    // Single cluster: every label is 1; still optimize the center for the report.
    auto r = cluster_pso(flat, opt);
    std::fill(r.labels.begin(), r.labels.end(), 1);
    return r;
  }
  return cluster_pso(flat, opt);
}

/// Lloyd's algorithm with squared Euclidean distance. Starts from
/// `initial_centers` when given, otherwise from distinct items picked with
/// the seed. An emptied cluster is re-seeded at the item farthest from its
/// current center. `history` holds the criterion after every assignment.
inline ClusterResult lloyd_kmeans(std::span<const Point> points, std::size_t clusters, std::uint64_t seed,
                                  std::vector<Point> initial_centers = {}, std::size_t max_iterations = 1000) {
  if (clusters == 0) {
    throw ConfigError("cluster count must be at least 1");
  }
  if (points.empty()) {
    throw DegenerateDataError("no items to cluster");
  }
  detail::check_points(points, points.subspan(0, 1));
  const std::size_t m = points.front().size();
  std::vector<Point> centers = std::move(initial_centers);
  if (centers.empty()) {
    std::vector<std::size_t> unique_index;
    std::set<Point> seen;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (seen.insert(points[i]).second) {
        unique_index.push_back(i);
      }
    }
    if (unique_index.size() < clusters) {
      throw DegenerateDataError("only " + std::to_string(unique_index.size()) + " distinct items for " +
                                std::to_string(clusters) + " clusters");
    }
    Rng rng(seed);
    rng.shuffle(unique_index);
    for (std::size_t j = 0; j < clusters; ++j) {
      centers.push_back(points[unique_index[j]]);
    }
  } else if (centers.size() != clusters) {
    throw ConfigError("initial center count does not match the cluster count");
  }
  detail::check_points(points, centers);

  ClusterResult out;
  std::vector<int> labels = assign(points, centers);
  out.history.push_back(criterion(points, centers));
  while (out.iterations < max_iterations) {
    ++out.iterations;
    std::vector<Point> sums(clusters, Point(m, 0.0));
    std::vector<std::size_t> counts(clusters, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto j = static_cast<std::size_t>(labels[i] - 1);
      ++counts[j];
      for (std::size_t d = 0; d < m; ++d) {
        sums[j][d] += points[i][d];
      }
    }
    for (std::size_t j = 0; j < clusters; ++j) {
      if (counts[j] == 0) {
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
          const double d = squared_distance(points[i], centers[static_cast<std::size_t>(labels[i] - 1)]);
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        centers[j] = points[far];
        labels[far] = static_cast<int>(j + 1);
        continue;
      }
      for (std::size_t d = 0; d < m; ++d) {
        centers[j][d] = sums[j][d] / static_cast<double>(counts[j]);
      }
    }
    std::vector<int> next = assign(points, centers);
    out.history.push_back(criterion(points, centers));
    const bool fixpoint = next == labels;
    labels = std::move(next);
    if (fixpoint) {
      break;
    }
  }
  out.labels = std::move(labels);
  out.model.centers = std::move(centers);
  out.model.criterion = out.history.back();
  return out;
}

/// Adjusted Rand index between two labelings of the same items.
inline double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size() || a.empty()) {
    throw ShapeError("labelings must be nonempty and of equal length");
  }
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> rows;
  std::map<int, double> cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  const auto pairs = [](double x) { return x * (x - 1.0) / 2.0; };
  double index = 0.0;
  for (const auto& [k, v] : joint) {
    index += pairs(v);
  }
  double sum_rows = 0.0;
  double sum_cols = 0.0;
  for (const auto& [k, v] : rows) {
    sum_rows += pairs(v);
  }
  for (const auto& [k, v] : cols) {
    sum_cols += pairs(v);
  }
  const double total = pairs(static_cast<double>(a.size()));
  const double expected = total > 0.0 ? sum_rows * sum_cols / total : 0.0;
  const double maximum = 0.5 * (sum_rows + sum_cols);
  if (maximum == expected) {
    return 1.0; // both labelings trivial (single cluster or all singletons)
  }
  return (index - expected) / (maximum - expected);
}

/// Mean silhouette with Euclidean distance. Items in singleton clusters
/// score 0. Needs at least two clusters.
inline double silhouette_score(std::span<const Point> points, std::span<const int> labels) {
  if (points.size() != labels.size() || points.empty()) {
    throw ShapeError("silhouette needs one label per item");
  }
  std::map<int, std::size_t> sizes;
  for (int l : labels) {
    ++sizes[l];
  }
  if (sizes.size() < 2) {
    throw DegenerateDataError("silhouette needs at least two clusters");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::map<int, double> sum;
    for (std::size_t k = 0; k < points.size(); ++k) {
      if (k != i) {
        sum[labels[k]] += std::sqrt(squared_distance(points[i], points[k]));
      }
    }
    if (sizes[labels[i]] == 1) {
      continue;
    }
    const double a = sum[labels[i]] / static_cast<double>(sizes[labels[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [l, n] : sizes) {
      if (l != labels[i]) {
        b = std::min(b, sum[l] / static_cast<double>(n));
      }
    }
    const double denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return total / static_cast<double>(points.size());
}

// ---------------------------------------------------------------------------
// Files

inline std::string format_cluster_model(const ClusterModel& model) {
  std::string out = "# cluster-model n=" + std::to_string(model.clusters()) + " distance=" +
                    (model.distance.kind == DistanceKind::dtw ? "dtw" : "squared") +
                    " m=" + std::to_string(model.dimension());
  if (model.distance.kind == DistanceKind::dtw) {
    out += std::string(" cost=") + (model.distance.dtw.cost == DtwCost::absolute ? "absolute" : "squared");
    if (model.distance.dtw.band) {
      out += " band=" + std::to_string(*model.distance.dtw.band);
    }
  }
  out += " criterion=" + text::format_double(model.criterion) + "\n";
  for (const auto& c : model.centers) {
    for (std::size_t d = 0; d < c.size(); ++d) {
      out += (d ? "," : "") + text::format_double(c[d]);
    }
    out += "\n";
  }
  return out;
}

inline ClusterModel parse_cluster_model(std::string_view contents) {
  const auto rows = text::lines(contents);
  if (rows.empty() || rows.front().rfind("# cluster-model", 0) != 0) {
    throw ParseError("missing '# cluster-model' header", 1);
  }
  std::map<std::string, std::string> fields;
  for (auto tok : text::split(rows.front().substr(15), ' ')) {
    if (tok.empty()) {
      continue;
    }
    const auto eq = tok.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError("malformed header field '" + std::string(tok) + "'", 1);
    }
    fields[std::string(tok.substr(0, eq))] = std::string(tok.substr(eq + 1));
  }
  for (const char* key : {"n", "distance", "m"}) {
    if (!fields.count(key)) {
      throw ParseError(std::string("header lacks '") + key + "'", 1);
    }
  }
  ClusterModel model;
  const auto n = static_cast<std::size_t>(text::parse_int(fields["n"], 1));
  const auto m = static_cast<std::size_t>(text::parse_int(fields["m"], 1));
  if (fields["distance"] == "dtw") {
    model.distance.kind = DistanceKind::dtw;
    model.distance.dtw.cost = fields["cost"] == "squared" ? DtwCost::squared : DtwCost::absolute;
    if (fields.count("band")) {
      model.distance.dtw.band = static_cast<std::size_t>(text::parse_int(fields["band"], 1));
    }
  } else if (fields["distance"] != "squared") {
    throw ParseError("unknown distance '" + fields["distance"] + "'", 1);
  }
  if (fields.count("criterion")) {
    model.criterion = text::parse_double(fields["criterion"], 1);
  }
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (text::trim(rows[i]).empty()) {
      continue;
    }
    Point c;
    for (auto v : text::split(rows[i], ',')) {
      c.push_back(text::parse_double(v, i + 1));
    }
    if (c.size() != m) {
      throw ParseError("center has " + std::to_string(c.size()) + " values, header says m=" + std::to_string(m),
                       i + 1);
    }
    model.centers.push_back(std::move(c));
  }
  if (model.centers.size() != n) {
    throw ParseError("expected " + std::to_string(n) + " centers, found " + std::to_string(model.centers.size()));
  }
  return model;
}

struct AssignmentEntry {
  std::string item;
  int label = 0;
  friend bool operator==(const AssignmentEntry&, const AssignmentEntry&) = default;
};

inline std::string format_assignment(const std::vector<AssignmentEntry>& entries) {
  std::string out;
  for (const auto& e : entries) {
    out += e.item + "," + std::to_string(e.label) + "\n";
  }
  return out;
}

inline std::vector<AssignmentEntry> parse_assignment(std::string_view contents) {
  std::vector<AssignmentEntry> out;
  const auto rows = text::lines(contents);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto row = text::trim(rows[i]);
    if (row.empty() || row.front() == '#') {
      continue;
    }
    const auto comma = row.rfind(',');
    if (comma == std::string_view::npos) {
      throw ParseError("expected 'itemId,label'", i + 1);
    }
    out.push_back({std::string(text::trim(row.substr(0, comma))),
                   static_cast<int>(text::parse_int(row.substr(comma + 1), i + 1))});
  }
  return out;
}

} // namespace svmstl
