#include "support/tempdir.hpp"

#include "svmstl/core.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace svmstl;

namespace {

Image gradient(std::size_t w, std::size_t h, std::size_t c, double offset = 0.0) {
  std::vector<double> px(w * h * c);
  for (std::size_t i = 0; i < px.size(); ++i) {
    px[i] = std::fmod(offset + static_cast<double>(i) / static_cast<double>(px.size()), 1.0);
  }
  return quantize_8bit(Image(w, h, c, std::move(px)));
}

} // namespace

TEST(Image, RejectsBadShapesAndValues) {
  EXPECT_THROW(Image(2, 2, 2, std::vector<double>(8, 0.0)), ShapeError);
  EXPECT_THROW(Image(2, 2, 1, std::vector<double>(3, 0.0)), ShapeError);
  EXPECT_THROW(Image(2, 2, 1, {0.0, 0.5, 1.5, 0.0}), ShapeError);
  EXPECT_THROW(Image(0, 2, 1, {}), ShapeError);
  EXPECT_NO_THROW(Image(2, 1, 3, std::vector<double>(6, 1.0)));
}

TEST(Image, AccessIsRowMajorWithInterleavedChannels) {
  const Image img(2, 2, 3, {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 0.05});
  EXPECT_DOUBLE_EQ(img.at(0, 1, 2), 0.5);
  EXPECT_DOUBLE_EQ(img.at(1, 0, 0), 0.6);
}

TEST(Pnm, RoundTripsQuantizedImagesExactly) {
  support::TempDir dir;
  for (std::size_t c : {1u, 3u}) {
    const Image img = gradient(7, 5, c, 0.3);
    const std::string path = dir.str(c == 1 ? "a.pgm" : "a.ppm");
    write_pnm(path, img);
    EXPECT_EQ(read_pnm(path), img);
  }
}

TEST(Pnm, ReadsAsciiAndComments) {
  support::TempDir dir;
  text::write_file(dir.str("x.pgm"), "P2\n# comment\n2 1\n4\n0 4\n");
  const Image img = read_pnm(dir.str("x.pgm"));
  EXPECT_EQ(img.width(), 2u);
  EXPECT_DOUBLE_EQ(img.at(0, 1), 1.0);
  text::write_file(dir.str("bad.pgm"), "P9\n");
  EXPECT_THROW(read_pnm(dir.str("bad.pgm")), Error);
  EXPECT_THROW(read_pnm(dir.str("missing.pgm")), IoError);
}

TEST(Trajectory, SaveLoadRoundTrip) {
  support::TempDir dir;
  std::vector<Image> frames;
  for (int k = 0; k < 12; ++k) {
    frames.push_back(gradient(4, 3, 1, 0.07 * k));
  }
  const StTrajectory traj("run-1", frames);
  save_trajectory(traj, dir.str("t"), {{"D1", "3"}});
  const StTrajectory back = load_trajectory(dir.str("t"));
  EXPECT_EQ(back, traj);
  EXPECT_EQ(back.horizon(), 11u);
  EXPECT_EQ(read_metadata(dir.str("t/trajectory.txt")).at("D1"), "3");
}

TEST(Trajectory, MissingFrameIsReported) {
  support::TempDir dir;
  std::vector<Image> frames(5, gradient(3, 3, 1));
  save_trajectory(StTrajectory("x", frames), dir.str("t"));
  std::filesystem::remove(dir.path() / "t" / frame_filename(2, 1));
  try {
    load_trajectory(dir.str("t"));
    FAIL();
  } catch (const MissingFrameError& e) {
    EXPECT_EQ(e.index(), 2u);
  }
}

TEST(Trajectory, MixedShapesRejected) {
  EXPECT_THROW(StTrajectory("x", {gradient(3, 3, 1), gradient(4, 3, 1)}), ShapeError);
  EXPECT_THROW(StTrajectory("x", {}), ShapeError);
}

TEST(Signal, FormatParseRoundTrip) {
  const StSignal s(3, 2, {0.1, -2.5, 1e-17, 3.0, 1.0 / 3.0, -0.0});
  const StSignal back = parse_signal(format_signal(s));
  EXPECT_EQ(back.steps(), 3u);
  EXPECT_EQ(back.dims(), 2u);
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t d = 0; d < 2; ++d) {
      EXPECT_EQ(back.at(k, d), s.at(k, d));
    }
  }
  EXPECT_EQ(back.labels(), s.labels());
}

TEST(Signal, RejectsMalformedInput) {
  EXPECT_THROW(parse_signal("t,h_1\n0,1\n"), ParseError);
  EXPECT_THROW(parse_signal("# t, h_1\n0,1,2\n"), ParseError);
  EXPECT_THROW(parse_signal("# t, h_1\n0,nan\n"), Error);
  EXPECT_THROW(StSignal(2, 1, {1.0}), ShapeError);
  EXPECT_THROW(StSignal(1, 1, {INFINITY}), ShapeError);
}

TEST(Signal, PrefixKeepsEarlySteps) {
  const StSignal s = StSignal::from_rows({{1}, {2}, {3}, {4}});
  const StSignal p = s.prefix(1);
  EXPECT_EQ(p.steps(), 2u);
  EXPECT_EQ(p.at(1, 0), 2.0);
}

TEST(Manifest, RoundTrip) {
  const std::vector<ManifestEntry> entries{{"a/b", 1}, {"c", 3}};
  EXPECT_EQ(parse_manifest(format_manifest(entries)), entries);
  EXPECT_THROW(parse_manifest("nolabel\n"), ParseError);
}

TEST(KFold, StratifiedPartition) {
  std::vector<int> labels;
  for (int i = 0; i < 23; ++i) {
    labels.push_back(i % 3 == 0 ? 1 : -1);
  }
  const auto splits = stratified_kfold(labels, 2, 42);
  ASSERT_EQ(splits.size(), 2u);
  std::multiset<std::size_t> all_test;
  for (const auto& s : splits) {
    EXPECT_EQ(s.train.size() + s.test.size(), labels.size());
    std::set<std::size_t> train(s.train.begin(), s.train.end());
    for (auto i : s.test) {
      EXPECT_FALSE(train.count(i));
      all_test.insert(i);
    }
    int pos = 0;
    for (auto i : s.test) {
      pos += labels[i] == 1;
    }
    EXPECT_NEAR(pos, 4, 1);
  }
  EXPECT_EQ(all_test.size(), labels.size());
  EXPECT_EQ(std::set<std::size_t>(all_test.begin(), all_test.end()).size(), labels.size());
  EXPECT_EQ(stratified_kfold(labels, 2, 42)[0].test, splits[0].test);
}

TEST(KFold, TooFewMembersIsDegenerate) {
  const std::vector<int> labels{1, -1, -1, -1};
  EXPECT_THROW(stratified_kfold(labels, 2, 0), DegenerateDataError);
  EXPECT_THROW(stratified_kfold(labels, 1, 0), ConfigError);
}
