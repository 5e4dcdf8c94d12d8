#include "oracles/cubic_oracle.hpp"
#include "support/tempdir.hpp"

#include "svmstl/rdsim.hpp"

#include <gtest/gtest.h>

using namespace svmstl;

namespace {

double variance(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) {
    mean += x / static_cast<double>(v.size());
  }
  double var = 0.0;
  for (double x : v) {
    var += (x - mean) * (x - mean) / static_cast<double>(v.size());
  }
  return var;
}

RdState shifted(const RdState& s, std::size_t di, std::size_t dj) {
  RdState out = s;
  for (std::size_t i = 0; i < s.n; ++i) {
    for (std::size_t j = 0; j < s.n; ++j) {
      out.at1((i + di) % s.n, (j + dj) % s.n) = s.at1(i, j);
      out.at2((i + di) % s.n, (j + dj) % s.n) = s.at2(i, j);
    }
  }
  return out;
}

double printed_root() {
  for (double r : oracle::cubic_roots(1.0, 0.0, -15.0, 12.0)) {
    if (r > 0.0 && r < 1.0) {
      return r;
    }
  }
  return NAN;
}

} // namespace

TEST(Neighbors, UniformFieldAndBoundaries) {
  const std::vector<double> c(16, 0.1);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_EQ(neighbor_mean(c, 4, i, j), 0.1);
      EXPECT_EQ(neighbor_offset(c, 4, i, j, Boundary::periodic), 0.0);
    }
  }
  std::vector<double> f(9);
  std::iota(f.begin(), f.end(), 0.0);
  EXPECT_DOUBLE_EQ(neighbor_mean(f, 3, 0, 0), (1.0 + 3.0) / 2.0);
  EXPECT_DOUBLE_EQ(neighbor_mean(f, 3, 1, 1), (1.0 + 3.0 + 5.0 + 7.0) / 4.0);
  EXPECT_DOUBLE_EQ(neighbor_mean(f, 3, 0, 0, Boundary::periodic), (6.0 + 3.0 + 2.0 + 1.0) / 4.0);
}

TEST(RdStep, UniformStateStaysUniformForAnyDiffusion) {
  Rng rng(1);
  for (auto model : {RdModel::turing, RdModel::printed, RdModel::printed_untransposed}) {
    for (auto boundary : {Boundary::truncated, Boundary::periodic}) {
      for (int trial = 0; trial < 10; ++trial) {
        RdParams p;
        p.model = model;
        p.boundary = boundary;
        p.D1 = rng.uniform(0.0, 50.0);
        p.D2 = rng.uniform(0.0, 50.0);
        p.dt = 0.001;
        RdState s = RdState::uniform(7, rng.uniform(0.5, 5.0), rng.uniform(0.5, 5.0));
        for (int step = 0; step < 20; ++step) {
          s = rd_step(s, p);
          for (std::size_t c = 1; c < s.x1.size(); ++c) {
            ASSERT_EQ(s.x1[c], s.x1[0]);
            ASSERT_EQ(s.x2[c], s.x2[0]);
          }
        }
      }
    }
  }
}

TEST(RdStep, PrintedFixedPointMatchesCubicRoot) {
  const double x1 = printed_root();
  ASSERT_TRUE(std::isfinite(x1));
  EXPECT_EQ(oracle::cubic_roots(1.0, 0.0, -15.0, 12.0).size(), 3u);
  RdParams p;
  p.model = RdModel::printed;
  EXPECT_NEAR(rd_fixed_point(p).first, x1, 1e-12);
  p.D1 = 0.0;
  p.D2 = 0.0;
  RdState s = RdState::uniform(5, x1, 16.0 - x1 * x1);
  const auto [d1, d2] = rd_rhs(s, p);
  for (std::size_t c = 0; c < d1.size(); ++c) {
    EXPECT_LT(std::abs(d1[c]), 1e-9);
    EXPECT_LT(std::abs(d2[c]), 1e-9);
  }
  for (int step = 0; step < 10; ++step) {
    const RdState next = rd_step(s, p);
    for (std::size_t c = 0; c < s.x1.size(); ++c) {
      EXPECT_NEAR(next.x1[c], s.x1[c], 1e-12);
      EXPECT_NEAR(next.x2[c], s.x2[c], 1e-12);
    }
    s = next;
  }
}

TEST(RdStep, TuringFixedPoint) {
  const RdParams p;
  const auto [x1, x2] = rd_fixed_point(p);
  EXPECT_DOUBLE_EQ(x1, 4.0);
  EXPECT_DOUBLE_EQ(x2, 4.0);
  const auto [d1, d2] = rd_rhs(RdState::uniform(4, x1, x2), p);
  for (std::size_t c = 0; c < d1.size(); ++c) {
    EXPECT_EQ(d1[c], 0.0);
    EXPECT_EQ(d2[c], 0.0);
  }
}

TEST(RdStep, PeriodicBoundaryIsTranslationEquivariant) {
  RdParams p;
  p.boundary = Boundary::periodic;
  p.grid = 6;
  p.seed = 4;
  const RdState s = rd_initial_state(p);
  const RdState a = shifted(rd_step(s, p), 2, 5);
  const RdState b = rd_step(shifted(s, 2, 5), p);
  EXPECT_EQ(a, b);
}

TEST(RdStep, PrintedModelUsesTransposedCoupling) {
  RdParams p;
  p.model = RdModel::printed;
  p.D1 = 0.0;
  p.D2 = 0.0;
  RdState s = RdState::uniform(2, 1.0, 2.0);
  s.at2(1, 0) = 5.0;
  s.at1(1, 0) = 3.0;
  const auto [d1, d2] = rd_rhs(s, p);
  // Cell (0, 1) couples with (1, 0).
  EXPECT_DOUBLE_EQ(d1[1], p.R1 * 1.0 * 5.0 - 1.0 + p.R2);
  EXPECT_DOUBLE_EQ(d2[1], p.R3 * 1.0 * 3.0 - 2.0 + p.R4);
  p.model = RdModel::printed_untransposed;
  const auto [u1, u2] = rd_rhs(s, p);
  EXPECT_DOUBLE_EQ(u1[1], p.R1 * 1.0 * 2.0 - 1.0 + p.R2);
  EXPECT_DOUBLE_EQ(u2[1], p.R3 * 1.0 * 1.0 - 2.0 + p.R4);
}

TEST(Simulate, BlowUpIsReported) {
  RdParams p;
  p.dt = 5.0;
  p.grid = 8;
  p.frames = 3;
  try {
    simulate(p);
    FAIL();
  } catch (const BlowUpError& e) {
    EXPECT_GE(e.step(), 1u);
  }
}

TEST(Simulate, ProducesPatternAndIsDeterministic) {
  RdParams p;
  p.seed = 11;
  p.frames = 60;
  RdState final_state;
  const auto traj = simulate(p, "x", &final_state);
  EXPECT_EQ(traj.size(), 61u);
  const double init_var = p.init_range * p.init_range / 3.0;
  EXPECT_GT(variance(final_state.x1), 10.0 * init_var);
  RdState again;
  EXPECT_EQ(simulate(p, "x", &again), traj);
  EXPECT_EQ(again, final_state);
  p.seed = 12;
  EXPECT_NE(simulate(p, "x").frame(60), traj.frame(60));
}

TEST(Simulate, ConfigValidation) {
  RdParams p;
  p.grid = 1;
  EXPECT_THROW(simulate(p), ConfigError);
  p = RdParams{};
  p.D1 = -1.0;
  EXPECT_THROW(simulate(p), ConfigError);
  p = RdParams{};
  p.render_hi = p.render_lo;
  EXPECT_THROW(simulate(p), ConfigError);
  EXPECT_THROW(parse_model("gray-scott"), ConfigError);
  EXPECT_EQ(parse_model(model_name(RdModel::printed)), RdModel::printed);
}

TEST(Sweep, ResumesAndRecordsBlowUps) {
  support::TempDir dir;
  RdParams p;
  p.grid = 8;
  p.frames = 4;
  p.steps_per_frame = 10;
  const std::vector<SweepPoint> points{{1.0, 5.0, 0}, {3.9, 30.0, 0}, {3.9, 30.0, 1}};
  const auto first = sweep(points, p, dir.str());
  ASSERT_EQ(first.size(), 3u);
  for (const auto& e : first) {
    EXPECT_EQ(e.status, "ok");
    EXPECT_TRUE(e.computed);
  }
  EXPECT_EQ(first[2].path, "rd_D1_3.9_D2_30_r1");
  EXPECT_NE(first[1].seed, first[2].seed);
  const std::string csv = text::read_file(dir.str("sweep.csv"));
  const auto before = load_trajectory(dir.str(first[1].path));
  const auto second = sweep(points, p, dir.str());
  for (const auto& e : second) {
    EXPECT_FALSE(e.computed);
  }
  EXPECT_EQ(text::read_file(dir.str("sweep.csv")), csv);
  EXPECT_EQ(load_trajectory(dir.str(first[1].path)), before);

  support::TempDir other;
  sweep(points, p, other.str());
  EXPECT_EQ(load_trajectory(other.str(first[1].path)), before);

  RdParams hot = p;
  hot.dt = 5.0;
  support::TempDir blow;
  const auto b = sweep({{1.0, 1.0, 0}}, hot, blow.str());
  EXPECT_EQ(b[0].status.rfind("blowup@", 0), 0u);
  EXPECT_NE(text::read_file(blow.str("sweep.csv")).find("blowup@"), std::string::npos);
  EXPECT_THROW(sweep({}, p, blow.str()), ConfigError);
}

TEST(Sweep, FixedSeedPolicySharesSeed) {
  support::TempDir dir;
  RdParams p;
  p.grid = 4;
  p.frames = 1;
  p.steps_per_frame = 1;
  p.seed = 9;
  const auto e = sweep({{1.0, 1.0, 0}, {2.0, 2.0, 0}}, p, dir.str(), SeedPolicy::fixed);
  EXPECT_EQ(e[0].seed, 9u);
  EXPECT_EQ(e[1].seed, 9u);
}
