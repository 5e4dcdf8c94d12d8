#include "oracles/cluster_oracle.hpp"
#include "oracles/dtw_oracle.hpp"

#include "svmstl/clustering.hpp"

#include <gtest/gtest.h>

using namespace svmstl;

namespace {

std::vector<std::vector<double>> all_sequences(std::size_t max_len, const std::vector<double>& alphabet) {
  std::vector<std::vector<double>> out;
  std::vector<std::vector<double>> frontier{{}};
  for (std::size_t len = 1; len <= max_len; ++len) {
    std::vector<std::vector<double>> next;
    for (const auto& s : frontier) {
      for (double a : alphabet) {
        auto t = s;
        t.push_back(a);
        next.push_back(t);
      }
    }
    out.insert(out.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  return out;
}

std::vector<Point> blobs(Rng& rng, const std::vector<Point>& centers, std::size_t per, double spread) {
  std::vector<Point> pts;
  for (const auto& c : centers) {
    for (std::size_t i = 0; i < per; ++i) {
      Point p = c;
      for (double& v : p) {
        v += rng.uniform(-spread, spread);
      }
      pts.push_back(p);
    }
  }
  return pts;
}

} // namespace

TEST(Dtw, MatchesPathEnumerationOnShortSequences) {
  const auto seqs = all_sequences(4, {-1.0, 0.0, 2.5});
  for (const auto& a : seqs) {
    for (const auto& b : seqs) {
      EXPECT_EQ(dtw_distance(a, b), oracle::dtw(a, b));
    }
  }
}

TEST(Dtw, SquaredCostMatchesEnumeration) {
  Rng rng(4);
  for (int i = 0; i < 300; ++i) {
    std::vector<double> a(1 + rng.index(6));
    std::vector<double> b(1 + rng.index(6));
    for (double& v : a) {
      v = rng.uniform(-1, 1);
    }
    for (double& v : b) {
      v = rng.uniform(-1, 1);
    }
    EXPECT_NEAR(dtw_distance(a, b, {DtwCost::squared, std::nullopt}), oracle::dtw(a, b, true), 1e-12);
  }
}

TEST(Dtw, Properties) {
  const std::vector<double> a{1, 2, 3, 3, 2};
  const std::vector<double> b{1, 1, 2, 3, 2, 2};
  EXPECT_EQ(dtw_distance(a, a), 0.0);
  EXPECT_EQ(dtw_distance(a, b), dtw_distance(b, a));
  EXPECT_EQ(dtw_distance(a, b), 0.0);
  // Band zero on equal lengths is the pointwise L1 distance.
  const std::vector<double> c{0, 1, 0, 1};
  const std::vector<double> d{1, 0, 1, 0};
  EXPECT_EQ(dtw_distance(c, d, {DtwCost::absolute, 0}), 4.0);
  EXPECT_EQ(dtw_distance(c, d), 2.0);
  EXPECT_GE(dtw_distance(c, d, {DtwCost::absolute, 1}), dtw_distance(c, d));
  EXPECT_EQ(dtw_distance(c, d, {DtwCost::absolute, 10}), dtw_distance(c, d));
  EXPECT_THROW(dtw_distance({}, c), ShapeError);
}

TEST(Criterion, MatchesDirectSum) {
  Rng rng(6);
  const auto pts = blobs(rng, {{0, 0}, {3, 3}}, 6, 1.0);
  const std::vector<Point> centers{{0.1, -0.2}, {2.0, 2.5}, {5, 5}};
  EXPECT_NEAR(criterion(pts, centers), oracle::criterion(pts, centers), 1e-12);
  const auto labels = assign(pts, centers);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double best = 1e300;
    for (const auto& c : centers) {
      best = std::min(best, squared_distance(pts[i], c));
    }
    EXPECT_EQ(squared_distance(pts[i], centers[static_cast<std::size_t>(labels[i] - 1)]), best);
  }
}

TEST(ClusterPso, ReachesBruteForceOptimumOnSeparatedData) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const auto pts = blobs(rng, {{0, 0}, {4, 1}}, 4, 1.0);
    PsoClusterOptions opt;
    opt.clusters = 2;
    opt.seed = seed;
    const auto r = cluster_pso(pts, opt);
    const double best = oracle::best_criterion(pts, 2);
    EXPECT_NEAR(r.model.criterion, best, 1e-6 * std::max(1.0, best));
  }
}

TEST(ClusterPso, NeverBeatsBruteForceOptimum) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed + 50);
    const auto pts = blobs(rng, {{0, 0}, {1, 1}}, 5, 2.0);
    PsoClusterOptions opt;
    opt.clusters = 3;
    opt.seed = seed;
    const auto r = cluster_pso(pts, opt);
    EXPECT_GE(r.model.criterion, oracle::best_criterion(pts, 3) - 1e-9);
    EXPECT_NEAR(r.model.criterion, oracle::criterion(pts, r.model.centers), 1e-9);
  }
}

TEST(ClusterPso, RecoversSeparatedBlobsAndIsDeterministic) {
  Rng rng(10);
  const auto pts = blobs(rng, {{0, 0, 0}, {5, 5, 0}, {0, 5, 5}}, 20, 0.5);
  PsoClusterOptions opt;
  opt.clusters = 3;
  opt.seed = 1;
  const auto r = cluster_pso(pts, opt);
  std::vector<int> truth;
  for (int c = 1; c <= 3; ++c) {
    truth.insert(truth.end(), 20, c);
  }
  EXPECT_DOUBLE_EQ(adjusted_rand_index(r.labels, truth), 1.0);
  opt.jobs = 3;
  const auto again = cluster_pso(pts, opt);
  EXPECT_EQ(again.labels, r.labels);
  EXPECT_EQ(again.model.centers, r.model.centers);
  for (std::size_t i = 1; i < r.history.size(); ++i) {
    EXPECT_LE(r.history[i], r.history[i - 1]);
  }
}

TEST(ClusterPso, DegenerateInputs) {
  const std::vector<Point> same(5, Point{1.0, 1.0});
  PsoClusterOptions opt;
  opt.clusters = 2;
  EXPECT_THROW(cluster_pso(same, opt), DegenerateDataError);
  opt.clusters = 0;
  EXPECT_THROW(cluster_pso(same, opt), ConfigError);
  opt.clusters = 2;
  EXPECT_THROW(cluster_pso(std::vector<Point>{}, opt), Error);
}

TEST(ClusterTrajectories, GroupsByShapeUnderDtw) {
  std::vector<StSignal> signals;
  std::vector<int> truth;
  Rng rng(3);
  for (int i = 0; i < 8; ++i) {
    std::vector<std::vector<double>> up;
    std::vector<std::vector<double>> down;
    for (int k = 0; k < 10; ++k) {
      up.push_back({k * 0.5 + rng.uniform(-0.1, 0.1)});
      down.push_back({5.0 - k * 0.5 + rng.uniform(-0.1, 0.1)});
    }
    signals.push_back(StSignal::from_rows(up));
    truth.push_back(1);
    signals.push_back(StSignal::from_rows(down));
    truth.push_back(2);
  }
  PsoClusterOptions opt;
  opt.clusters = 2;
  opt.distance.kind = DistanceKind::dtw;
  opt.distance.dtw.band = 2;
  const auto r = cluster_trajectories(signals, opt);
  EXPECT_DOUBLE_EQ(adjusted_rand_index(r.labels, truth), 1.0);
  signals.push_back(StSignal::from_rows({{1.0}}));
  EXPECT_THROW(cluster_trajectories(signals, opt), ShapeError);
}

TEST(Lloyd, NeverBelowOptimumAndMonotone) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed + 100);
    const auto pts = blobs(rng, {{0, 0}, {2, 2}}, 4, 2.0);
    const auto r = lloyd_kmeans(pts, 2, seed);
    EXPECT_GE(r.model.criterion, oracle::best_criterion(pts, 2) - 1e-9);
    for (std::size_t i = 1; i < r.history.size(); ++i) {
      EXPECT_LE(r.history[i], r.history[i - 1] + 1e-12);
    }
  }
}

TEST(Ari, KnownValues) {
  const std::vector<int> a{1, 1, 2, 2};
  const std::vector<int> b{2, 2, 1, 1};
  EXPECT_DOUBLE_EQ(adjusted_rand_index(a, b), 1.0);
  const std::vector<int> c{1, 2, 1, 2};
  EXPECT_NEAR(adjusted_rand_index(a, c), -0.5, 1e-12);
}

TEST(Silhouette, WellSeparatedIsHigh) {
  Rng rng(2);
  const auto pts = blobs(rng, {{0, 0}, {10, 10}}, 10, 0.5);
  std::vector<int> labels(10, 1);
  labels.insert(labels.end(), 10, 2);
  EXPECT_GT(silhouette_score(pts, labels), 0.9);
  EXPECT_THROW(silhouette_score(pts, std::vector<int>(20, 1)), Error);
}

TEST(ClusterModelFile, RoundTrip) {
  ClusterModel m;
  m.centers = {{0.1, 1.0 / 3.0}, {-2.0, 5e-20}};
  m.distance.kind = DistanceKind::dtw;
  m.distance.dtw.cost = DtwCost::squared;
  m.distance.dtw.band = 3;
  m.criterion = 12.5;
  const ClusterModel back = parse_cluster_model(format_cluster_model(m));
  EXPECT_EQ(back.centers, m.centers);
  EXPECT_EQ(back.distance.kind, DistanceKind::dtw);
  EXPECT_EQ(back.distance.dtw.cost, DtwCost::squared);
  EXPECT_EQ(back.distance.dtw.band, std::optional<std::size_t>(3));
  EXPECT_EQ(back.criterion, 12.5);
  EXPECT_THROW(parse_cluster_model("0,1\n"), ParseError);
  const std::vector<AssignmentEntry> entries{{"a:0", 1}, {"b", 2}};
  EXPECT_EQ(parse_assignment(format_assignment(entries)), entries);
}
