#pragma once

#include "svmstl/error.hpp"
#include "svmstl/random.hpp"
#include "svmstl/text.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace svmstl {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Images

/// L x W x C intensity image, row-major with interleaved channels, every
/// intensity in [0, 1].
class Image {
public:
  Image() = default;

  Image(std::size_t width, std::size_t height, std::size_t channels, std::vector<double> pixels)
      : width_(width), height_(height), channels_(channels), pixels_(std::move(pixels)) {
    if (channels_ != 1 && channels_ != 3) {
      throw ShapeError("image must have 1 or 3 channels, got " + std::to_string(channels_));
    }
    if (width_ == 0 || height_ == 0) {
      throw ShapeError("image must be non-empty");
    }
    if (pixels_.size() != width_ * height_ * channels_) {
      throw ShapeError("pixel buffer has " + std::to_string(pixels_.size()) + " entries, expected " +
                       std::to_string(width_ * height_ * channels_));
    }
    for (double v : pixels_) {
      if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
        throw ShapeError("pixel intensity outside [0,1]: " + text::format_double(v));
      }
    }
  }

  static Image filled(std::size_t width, std::size_t height, std::size_t channels, double value) {
    return Image(width, height, channels, std::vector<double>(width * height * channels, value));
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t channels() const noexcept { return channels_; }
  std::span<const double> pixels() const noexcept { return pixels_; }

  double at(std::size_t row, std::size_t col, std::size_t channel = 0) const {
    return pixels_[(row * width_ + col) * channels_ + channel];
  }

  bool same_shape(const Image& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
  }

  friend bool operator==(const Image&, const Image&) = default;

private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::size_t channels_ = 1;
  std::vector<double> pixels_;
};

/// Rounds every intensity to the nearest 8-bit level, i.e. what a frame
/// looks like after a save/load round trip.
inline Image quantize_8bit(const Image& img) {
  std::vector<double> px(img.pixels().begin(), img.pixels().end());
  for (double& v : px) {
    v = std::round(v * 255.0) / 255.0;
  }
  return Image(img.width(), img.height(), img.channels(), std::move(px));
}

// ---------------------------------------------------------------------------
// Spatio-temporal trajectories and signals

/// Frames at discrete times 0..T, all with one shape.
class StTrajectory {
public:
  StTrajectory() = default;

  StTrajectory(std::string id, std::vector<Image> frames) : id_(std::move(id)), frames_(std::move(frames)) {
    if (frames_.empty()) {
      throw ShapeError("trajectory '" + id_ + "' has no frames");
    }
    for (std::size_t k = 1; k < frames_.size(); ++k) {
      if (!frames_[k].same_shape(frames_[0])) {
        throw ShapeError("trajectory '" + id_ + "': frame " + std::to_string(k) +
                         " differs in shape from frame 0");
      }
    }
  }

  const std::string& id() const noexcept { return id_; }
  std::size_t horizon() const noexcept { return frames_.size() - 1; }
  std::size_t size() const noexcept { return frames_.size(); }
  const Image& frame(std::size_t k) const { return frames_.at(k); }
  const std::vector<Image>& frames() const noexcept { return frames_; }

  StTrajectory prefix(std::size_t horizon) const {
    return StTrajectory(id_, std::vector<Image>(frames_.begin(), frames_.begin() + static_cast<std::ptrdiff_t>(horizon + 1)));
  }

  friend bool operator==(const StTrajectory&, const StTrajectory&) = default;

private:
  std::string id_;
  std::vector<Image> frames_;
};

/// (T+1) x n matrix of predicate values; row k is the vector s[k].
class StSignal {
public:
  StSignal() = default;

  StSignal(std::size_t steps, std::size_t dims, std::vector<double> values, std::vector<std::string> labels = {})
      : steps_(steps), dims_(dims), values_(std::move(values)), labels_(std::move(labels)) {
    if (steps_ == 0 || dims_ == 0) {
      throw ShapeError("signal must have at least one time step and one dimension");
    }
    if (values_.size() != steps_ * dims_) {
      throw ShapeError("signal buffer has " + std::to_string(values_.size()) + " entries, expected " +
                       std::to_string(steps_ * dims_));
    }
    for (double v : values_) {
      if (!std::isfinite(v)) {
        throw ShapeError("signal contains a non-finite value");
      }
    }
    if (labels_.empty()) {
      for (std::size_t j = 0; j < dims_; ++j) {
        labels_.push_back("h_" + std::to_string(j + 1));
      }
    } else if (labels_.size() != dims_) {
      throw ShapeError("signal has " + std::to_string(dims_) + " dimensions but " +
                       std::to_string(labels_.size()) + " labels");
    }
  }

  /// Builds a signal from rows (one vector per time step).
  static StSignal from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) {
      throw ShapeError("signal must have at least one row");
    }
    std::vector<double> values;
    for (const auto& r : rows) {
      if (r.size() != rows[0].size()) {
        throw ShapeError("ragged signal rows");
      }
      values.insert(values.end(), r.begin(), r.end());
    }
    return StSignal(rows.size(), rows[0].size(), std::move(values));
  }

  std::size_t steps() const noexcept { return steps_; }
  std::size_t horizon() const noexcept { return steps_ - 1; }
  std::size_t dims() const noexcept { return dims_; }

  /// Value of dimension `dim` (0-based) at time k.
  double at(std::size_t k, std::size_t dim) const { return values_[k * dims_ + dim]; }
  std::span<const double> row(std::size_t k) const { return {values_.data() + k * dims_, dims_}; }
  std::span<const double> values() const noexcept { return values_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  StSignal prefix(std::size_t horizon) const {
    return StSignal(horizon + 1, dims_,
                    std::vector<double>(values_.begin(), values_.begin() + static_cast<std::ptrdiff_t>((horizon + 1) * dims_)),
                    labels_);
  }

  friend bool operator==(const StSignal&, const StSignal&) = default;

private:
  std::size_t steps_ = 0;
  std::size_t dims_ = 0;
  std::vector<double> values_;
  std::vector<std::string> labels_;
};

// ---------------------------------------------------------------------------
// Labeled datasets

enum class LabelKind { image_class, trajectory_class, binary };

/// Items with integer labels. Class kinds use 1..num_classes; binary uses +-1.
template <typename Item>
struct LabeledDataset {
  std::vector<Item> items;
  std::vector<int> labels;
  LabelKind kind = LabelKind::binary;
  int num_classes = 2;

  std::size_t size() const noexcept { return items.size(); }

  void validate() const {
    if (items.empty()) {
      throw DegenerateDataError("dataset is empty");
    }
    if (items.size() != labels.size()) {
      throw ShapeError("dataset has " + std::to_string(items.size()) + " items but " +
                       std::to_string(labels.size()) + " labels");
    }
    for (int l : labels) {
      const bool ok = kind == LabelKind::binary ? (l == 1 || l == -1) : (l >= 1 && l <= num_classes);
      if (!ok) {
        throw ShapeError("label " + std::to_string(l) + " outside the declared label set");
      }
    }
  }

  /// True for a binary dataset in which only one of the two labels occurs.
  bool degenerate_binary() const {
    if (kind != LabelKind::binary) {
      return false;
    }
    const bool has_pos = std::find(labels.begin(), labels.end(), 1) != labels.end();
    const bool has_neg = std::find(labels.begin(), labels.end(), -1) != labels.end();
    return !(has_pos && has_neg);
  }

  LabeledDataset subset(std::span<const std::size_t> indices) const {
    LabeledDataset out;
    out.kind = kind;
    out.num_classes = num_classes;
    out.items.reserve(indices.size());
    out.labels.reserve(indices.size());
    for (std::size_t i : indices) {
      out.items.push_back(items.at(i));
      out.labels.push_back(labels.at(i));
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Portable any-map image files (PGM/PPM)

namespace detail {

inline std::size_t pnm_read_int(const std::string& data, std::size_t& pos, const std::string& path) {
  while (pos < data.size()) {
    const char c = data[pos];
    if (c == '#') {
      while (pos < data.size() && data[pos] != '\n') {
        ++pos;
      }
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      ++pos;
    } else {
      break;
    }
  }
  std::size_t start = pos;
  while (pos < data.size() && data[pos] >= '0' && data[pos] <= '9') {
    ++pos;
  }
  if (start == pos) {
    throw ParseError("malformed PNM header in '" + path + "'");
  }
  return static_cast<std::size_t>(std::stoull(data.substr(start, pos - start)));
}

} // namespace detail

/// Reads binary (P5/P6) or ASCII (P2/P3) PGM/PPM, normalizing by maxval.
inline Image read_pnm(const std::string& path) {
  const std::string data = text::read_file(path);
  if (data.size() < 2 || data[0] != 'P') {
    throw ParseError("'" + path + "' is not a PGM/PPM file");
  }
  const char kind = data[1];
  std::size_t channels = 0;
  bool binary = false;
  switch (kind) {
    case '2': channels = 1; break;
    case '3': channels = 3; break;
    case '5': channels = 1; binary = true; break;
    case '6': channels = 3; binary = true; break;
    default: throw ParseError("unsupported PNM variant P" + std::string(1, kind) + " in '" + path + "'");
  }
  std::size_t pos = 2;
  const std::size_t width = detail::pnm_read_int(data, pos, path);
  const std::size_t height = detail::pnm_read_int(data, pos, path);
  const std::size_t maxval = detail::pnm_read_int(data, pos, path);
  if (maxval == 0 || maxval > 65535) {
    throw ParseError("invalid PNM maxval in '" + path + "'");
  }
  const std::size_t count = width * height * channels;
  std::vector<double> px(count);
  const double scale = static_cast<double>(maxval);
  if (binary) {
    ++pos; // single whitespace after maxval
    const std::size_t bytes = maxval < 256 ? 1 : 2;
    if (data.size() < pos + count * bytes) {
      throw ParseError("truncated pixel data in '" + path + "'");
    }
    for (std::size_t i = 0; i < count; ++i) {
      std::size_t v = static_cast<unsigned char>(data[pos + i * bytes]);
      if (bytes == 2) {
        v = (v << 8) | static_cast<unsigned char>(data[pos + i * 2 + 1]);
      }
      if (v > maxval) {
        throw ParseError("pixel value exceeds maxval in '" + path + "'");
      }
      px[i] = static_cast<double>(v) / scale;
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t v = detail::pnm_read_int(data, pos, path);
      if (v > maxval) {
        throw ParseError("pixel value exceeds maxval in '" + path + "'");
      }
      px[i] = static_cast<double>(v) / scale;
    }
  }
  return Image(width, height, channels, std::move(px));
}

/// Writes binary 8-bit PGM (1 channel) or PPM (3 channels).
inline void write_pnm(const std::string& path, const Image& img) {
  std::string out = (img.channels() == 1 ? "P5\n" : "P6\n") + std::to_string(img.width()) + " " +
                    std::to_string(img.height()) + "\n255\n";
  out.reserve(out.size() + img.pixels().size());
  for (double v : img.pixels()) {
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
  }
  text::write_file(path, out);
}

// ---------------------------------------------------------------------------
// Trajectory directories: frame_0000.pgm ... frame_T.pgm plus trajectory.txt

inline constexpr const char* trajectory_manifest_name = "trajectory.txt";

inline std::string frame_filename(std::size_t k, std::size_t channels) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%04zu.%s", k, channels == 1 ? "pgm" : "ppm");
  return buf;
}

/// key=value metadata stored next to the frames.
using Metadata = std::map<std::string, std::string>;

inline Metadata read_metadata(const std::string& path) {
  Metadata meta;
  const std::string contents = text::read_file(path);
  std::size_t lineno = 0;
  for (auto line : text::lines(contents)) {
    ++lineno;
    line = text::trim(line);
    if (line.empty() || line.front() == '#') {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError("expected key=value in '" + path + "'", lineno);
    }
    meta[std::string(text::trim(line.substr(0, eq)))] = std::string(text::trim(line.substr(eq + 1)));
  }
  return meta;
}

inline std::string format_metadata(const Metadata& meta, const std::string& title) {
  std::string out = "# " + title + "\n";
  for (const auto& [k, v] : meta) {
    out += k + "=" + v + "\n";
  }
  return out;
}

/// Writes the frames and manifest. The manifest is written last so a
/// directory with a manifest is a complete trajectory.
inline void save_trajectory(const StTrajectory& traj, const std::string& dir, Metadata extra = {}) {
  fs::create_directories(dir);
  const Image& f0 = traj.frame(0);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    write_pnm((fs::path(dir) / frame_filename(k, f0.channels())).string(), traj.frame(k));
  }
  extra["id"] = traj.id();
  extra["frames"] = std::to_string(traj.size());
  extra["width"] = std::to_string(f0.width());
  extra["height"] = std::to_string(f0.height());
  extra["channels"] = std::to_string(f0.channels());
  text::write_file((fs::path(dir) / trajectory_manifest_name).string(), format_metadata(extra, "svmstl trajectory"));
}

/// Loads frame_0000..frame_T from `dir`. The trajectory id is taken from
/// the manifest when present, else from the directory name.
inline StTrajectory load_trajectory(const std::string& dir) {
  if (!fs::is_directory(dir)) {
    throw IoError("trajectory directory '" + dir + "' does not exist");
  }
  std::map<std::size_t, fs::path> found;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() < 11 || name.rfind("frame_", 0) != 0) {
      continue;
    }
    const auto dot = name.find('.');
    const std::string ext = dot == std::string::npos ? "" : name.substr(dot + 1);
    if (ext != "pgm" && ext != "ppm") {
      continue;
    }
    const std::string digits = name.substr(6, dot - 6);
    if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) {
      continue;
    }
    found[std::stoull(digits)] = entry.path();
  }
  Metadata meta;
  const fs::path manifest = fs::path(dir) / trajectory_manifest_name;
  if (fs::exists(manifest)) {
    meta = read_metadata(manifest.string());
  }
  std::size_t expected = found.empty() ? 0 : found.rbegin()->first + 1;
  if (auto it = meta.find("frames"); it != meta.end()) {
    expected = std::max<std::size_t>(expected, static_cast<std::size_t>(text::parse_int(it->second)));
  }
  if (expected == 0) {
    throw IoError("no frames found in '" + dir + "'");
  }
  std::vector<Image> frames;
  frames.reserve(expected);
  for (std::size_t k = 0; k < expected; ++k) {
    auto it = found.find(k);
    if (it == found.end()) {
      throw MissingFrameError(dir, k);
    }
    frames.push_back(read_pnm(it->second.string()));
    if (!frames.back().same_shape(frames.front())) {
      throw ShapeError("trajectory '" + dir + "': frame " + std::to_string(k) + " (" +
                       it->second.filename().string() + ") differs in shape from frame 0");
    }
  }
  std::string id = meta.count("id") ? meta["id"] : fs::path(dir).filename().string();
  return StTrajectory(std::move(id), std::move(frames));
}

// ---------------------------------------------------------------------------
// Signal text tables: "# t, h_1, ..., h_n" then "k,v1,...,vn" rows

inline std::string format_signal(const StSignal& s) {
  std::string out = "# t";
  for (const auto& l : s.labels()) {
    out += ", " + l;
  }
  out += "\n";
  for (std::size_t k = 0; k < s.steps(); ++k) {
    out += std::to_string(k);
    for (std::size_t j = 0; j < s.dims(); ++j) {
      out += ",";
      out += text::format_double(s.at(k, j));
    }
    out += "\n";
  }
  return out;
}

inline StSignal parse_signal(std::string_view contents) {
  const auto rows = text::lines(contents);
  if (rows.empty() || text::trim(rows[0]).substr(0, 1) != "#") {
    throw ParseError("signal table must start with a '# t, h_1, ...' header", 1);
  }
  auto header = text::trim(rows[0]);
  header.remove_prefix(1);
  auto cols = text::split(header, ',');
  if (cols.size() < 2 || cols[0] != "t") {
    throw ParseError("signal header must be '# t, h_1, ..., h_n'", 1);
  }
  std::vector<std::string> labels;
  for (std::size_t c = 1; c < cols.size(); ++c) {
    if (cols[c].empty()) {
      throw ParseError("empty column label in signal header", 1);
    }
    labels.emplace_back(cols[c]);
  }
  const std::size_t dims = labels.size();
  std::vector<double> values;
  std::size_t steps = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto line = text::trim(rows[i]);
    if (line.empty()) {
      continue;
    }
    const auto fields = text::split(line, ',');
    if (fields.size() != dims + 1) {
      throw ParseError("row has " + std::to_string(fields.size() - 1) + " values, header declares " +
                           std::to_string(dims),
                       i + 1);
    }
    if (text::parse_int(fields[0], i + 1) != static_cast<long long>(steps)) {
      throw ParseError("expected time index " + std::to_string(steps), i + 1);
    }
    for (std::size_t c = 1; c < fields.size(); ++c) {
      values.push_back(text::parse_double(fields[c], i + 1));
    }
    ++steps;
  }
  if (steps == 0) {
    throw ParseError("signal table has no data rows", rows.size());
  }
  return StSignal(steps, dims, std::move(values), std::move(labels));
}

inline void save_signal(const StSignal& s, const std::string& path) { text::write_file(path, format_signal(s)); }

inline StSignal load_signal(const std::string& path) {
  try {
    return parse_signal(text::read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), e.line());
  }
}

// ---------------------------------------------------------------------------
// Dataset manifests: "path,label" per line

struct ManifestEntry {
  std::string path;
  int label = 0;
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

inline std::string format_manifest(const std::vector<ManifestEntry>& entries) {
  std::string out = "# path,label\n";
  for (const auto& e : entries) {
    out += e.path + "," + std::to_string(e.label) + "\n";
  }
  return out;
}

inline std::vector<ManifestEntry> parse_manifest(std::string_view contents) {
  std::vector<ManifestEntry> out;
  std::size_t lineno = 0;
  for (auto line : text::lines(contents)) {
    ++lineno;
    line = text::trim(line);
    if (line.empty() || line.front() == '#') {
      continue;
    }
    const auto comma = line.rfind(',');
    if (comma == std::string_view::npos) {
      throw ParseError("expected 'path,label'", lineno);
    }
    out.push_back({std::string(text::trim(line.substr(0, comma))),
                   static_cast<int>(text::parse_int(line.substr(comma + 1), lineno))});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stratified K-fold

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Partitions indices into K folds preserving per-class proportions. Each
/// class is shuffled with the seed and dealt round-robin; the starting fold
/// rotates between classes so fold sizes stay within one item of each other.
inline std::vector<Split> stratified_kfold(std::span<const int> labels, std::size_t folds, std::uint64_t seed) {
  if (folds < 2) {
    throw ConfigError("k-fold needs K >= 2");
  }
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_class[labels[i]].push_back(i);
  }
  for (const auto& [label, members] : by_class) {
    if (members.size() < folds) {
      throw DegenerateDataError("class " + std::to_string(label) + " has " + std::to_string(members.size()) +
                                " members, fewer than K=" + std::to_string(folds));
    }
  }
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> fold_members(folds);
  std::size_t offset = 0;
  for (auto& [label, members] : by_class) {
    rng.shuffle(members);
    for (std::size_t i = 0; i < members.size(); ++i) {
      fold_members[(offset + i) % folds].push_back(members[i]);
    }
    offset = (offset + members.size()) % folds;
  }
  std::vector<Split> splits(folds);
  for (std::size_t f = 0; f < folds; ++f) {
    auto& test = fold_members[f];
    std::sort(test.begin(), test.end());
    splits[f].test = test;
    for (std::size_t g = 0; g < folds; ++g) {
      if (g != f) {
        splits[f].train.insert(splits[f].train.end(), fold_members[g].begin(), fold_members[g].end());
      }
    }
    std::sort(splits[f].train.begin(), splits[f].train.end());
  }
  return splits;
}

template <typename Item>
std::vector<Split> stratified_kfold(const LabeledDataset<Item>& data, std::size_t folds, std::uint64_t seed) {
  data.validate();
  return stratified_kfold(std::span<const int>(data.labels), folds, seed);
}

} // namespace svmstl
