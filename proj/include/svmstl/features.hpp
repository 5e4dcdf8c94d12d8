#pragma once

#include "svmstl/core.hpp"

#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace svmstl {

/// f_cnn(I) for one image, tagged with the extractor that produced it.
struct FeatureVector {
  std::vector<double> values;
  std::string extractor_id;

  std::size_t size() const noexcept { return values.size(); }
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

/// Affine map v -> (v + offset) * scale applied to one descriptor section.
struct SectionCalibration {
  double offset = 0.0;
  double scale = 1.0;
};

enum class ExtractorKind { builtin, table };

struct ExtractorConfig {
  ExtractorKind kind = ExtractorKind::builtin;
  std::size_t block_grid = 4;
  std::size_t spectral_bins = 8;
  // Block means live in [0,1], block standard deviations in [0,0.5] and the
  // spectral energies of one image sum to its variance (<= 0.25).
  SectionCalibration mean_calibration{-0.5, 2.0};
  SectionCalibration stddev_calibration{0.0, 4.0};
  SectionCalibration spectrum_calibration{0.0, 16.0};
  std::string table_path;

  /// Feature dimension m for images with `channels` channels.
  std::size_t dimension(std::size_t channels) const {
    return 2 * block_grid * block_grid * channels + spectral_bins;
  }

  std::string builtin_id() const {
    const auto cal = [](const SectionCalibration& c) {
      return text::format_double(c.offset) + "x" + text::format_double(c.scale);
    };
    return "builtin/g" + std::to_string(block_grid) + "/b" + std::to_string(spectral_bins) + "/m" +
           cal(mean_calibration) + "/s" + cal(stddev_calibration) + "/f" + cal(spectrum_calibration);
  }
};

namespace detail {

// Symmetric reflection of an out-of-range index into [0, n).
inline std::size_t reflect_index(std::size_t i, std::size_t n) {
  const std::size_t period = 2 * n;
  i %= period;
  return i < n ? i : period - 1 - i;
}

inline std::vector<std::complex<double>> dft_1d(const std::vector<std::complex<double>>& in,
                                                const std::vector<std::complex<double>>& twiddle) {
  const std::size_t n = in.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t t = 0; t < n; ++t) {
      acc += in[t] * twiddle[(k * t) % n];
    }
    out[k] = acc;
  }
  return out;
}

inline std::vector<std::complex<double>> twiddles(std::size_t n) {
  std::vector<std::complex<double>> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    w[i] = {std::cos(angle), std::sin(angle)};
  }
  return w;
}

} // namespace detail

/// Energy of the channel-mean image's power spectrum in `bins` equal-width
/// radial bands over normalized frequency radius (0, 1]. The DC term is
/// excluded, so the bands sum to the image variance.
inline std::vector<double> radial_spectrum(const Image& img, std::size_t bins) {
  const std::size_t rows = img.height();
  const std::size_t cols = img.width();
  std::vector<std::vector<std::complex<double>>> grid(rows, std::vector<std::complex<double>>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      double sum = 0.0;
      for (std::size_t ch = 0; ch < img.channels(); ++ch) {
        sum += img.at(r, c, ch);
      }
      grid[r][c] = sum / static_cast<double>(img.channels());
    }
  }
  const auto row_tw = detail::twiddles(cols);
  for (auto& row : grid) {
    row = detail::dft_1d(row, row_tw);
  }
  const auto col_tw = detail::twiddles(rows);
  std::vector<std::complex<double>> column(rows);
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t r = 0; r < rows; ++r) {
      column[r] = grid[r][c];
    }
    const auto transformed = detail::dft_1d(column, col_tw);
    for (std::size_t r = 0; r < rows; ++r) {
      grid[r][c] = transformed[r];
    }
  }
  std::vector<double> energy(bins, 0.0);
  const double norm = static_cast<double>(rows * cols) * static_cast<double>(rows * cols);
  for (std::size_t u = 0; u < rows; ++u) {
    for (std::size_t v = 0; v < cols; ++v) {
      if (u == 0 && v == 0) {
        continue;
      }
      const double fu = static_cast<double>(std::min(u, rows - u)) / static_cast<double>(rows);
      const double fv = static_cast<double>(std::min(v, cols - v)) / static_cast<double>(cols);
      const double radius = std::sqrt(fu * fu + fv * fv) / std::sqrt(0.5);
      const auto bin = std::min<std::size_t>(bins - 1, static_cast<std::size_t>(radius * static_cast<double>(bins)));
      energy[bin] += std::norm(grid[u][v]) / norm;
    }
  }
  return energy;
}

/// Built-in descriptor: per-block per-channel means, per-block per-channel
/// standard deviations, then radial spectrum energies, each section mapped
/// through its fixed calibration. Images whose sides are not multiples of
/// the block grid are padded by reflection before block statistics.
inline FeatureVector extract_features(const Image& img, const ExtractorConfig& cfg) {
  const std::size_t g = cfg.block_grid;
  if (g == 0) {
    throw ConfigError("block grid must be positive");
  }
  const std::size_t rows = (img.height() + g - 1) / g * g;
  const std::size_t cols = (img.width() + g - 1) / g * g;
  const std::size_t bh = rows / g;
  const std::size_t bw = cols / g;
  const std::size_t ch = img.channels();
  const std::size_t blocks = g * g * ch;

  std::vector<double> out(cfg.dimension(ch), 0.0);
  const double count = static_cast<double>(bh * bw);
  for (std::size_t bi = 0; bi < g; ++bi) {
    for (std::size_t bj = 0; bj < g; ++bj) {
      for (std::size_t c = 0; c < ch; ++c) {
        double sum = 0.0;
        for (std::size_t r = bi * bh; r < (bi + 1) * bh; ++r) {
          for (std::size_t q = bj * bw; q < (bj + 1) * bw; ++q) {
            sum += img.at(detail::reflect_index(r, img.height()), detail::reflect_index(q, img.width()), c);
          }
        }
        const double mean = sum / count;
        double sq = 0.0;
        for (std::size_t r = bi * bh; r < (bi + 1) * bh; ++r) {
          for (std::size_t q = bj * bw; q < (bj + 1) * bw; ++q) {
            const double d =
                img.at(detail::reflect_index(r, img.height()), detail::reflect_index(q, img.width()), c) - mean;
            sq += d * d;
          }
        }
        const std::size_t slot = (bi * g + bj) * ch + c;
        out[slot] = (mean + cfg.mean_calibration.offset) * cfg.mean_calibration.scale;
        out[blocks + slot] = (std::sqrt(sq / count) + cfg.stddev_calibration.offset) * cfg.stddev_calibration.scale;
      }
    }
  }
  if (cfg.spectral_bins > 0) {
    const auto spectrum = radial_spectrum(img, cfg.spectral_bins);
    for (std::size_t b = 0; b < spectrum.size(); ++b) {
      out[2 * blocks + b] = (spectrum[b] + cfg.spectrum_calibration.offset) * cfg.spectrum_calibration.scale;
    }
  }
  return {std::move(out), cfg.builtin_id()};
}

// ---------------------------------------------------------------------------
// Feature interchange tables

struct FrameKey {
  std::string trajectory_id;
  std::size_t time = 0;
  auto operator<=>(const FrameKey&) const = default;
};

struct FeatureTable {
  std::string extractor_id;
  std::size_t dimension = 0;
  std::map<FrameKey, std::vector<double>> rows;

  const std::vector<double>* find(const std::string& trajectory_id, std::size_t time) const {
    const auto it = rows.find(FrameKey{trajectory_id, time});
    return it == rows.end() ? nullptr : &it->second;
  }
};

inline std::string format_feature_table(const FeatureTable& table) {
  std::string out = "# extractor=" + table.extractor_id + " m=" + std::to_string(table.dimension) + "\n";
  for (const auto& [key, values] : table.rows) {
    out += key.trajectory_id + "," + std::to_string(key.time);
    for (double v : values) {
      out += ",";
      out += text::format_double(v);
    }
    out += "\n";
  }
  return out;
}

inline FeatureTable parse_feature_table(std::string_view contents) {
  const auto rows = text::lines(contents);
  if (rows.empty()) {
    throw ParseError("empty feature table", 1);
  }
  FeatureTable table;
  auto header = text::trim(rows[0]);
  if (header.empty() || header.front() != '#') {
    throw ParseError("feature table must start with '# extractor=<id> m=<int>'", 1);
  }
  header.remove_prefix(1);
  bool have_m = false;
  for (auto token : text::split(text::trim(header), ' ')) {
    if (token.empty()) {
      continue;
    }
    const auto eq = token.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError("malformed header token '" + std::string(token) + "'", 1);
    }
    const auto key = token.substr(0, eq);
    const auto value = token.substr(eq + 1);
    if (key == "extractor") {
      table.extractor_id = std::string(value);
    } else if (key == "m") {
      const auto m = text::parse_int(value, 1);
      if (m <= 0) {
        throw ParseError("feature dimension must be positive", 1);
      }
      table.dimension = static_cast<std::size_t>(m);
      have_m = true;
    }
  }
  if (table.extractor_id.empty() || !have_m) {
    throw ParseError("feature table header needs extractor=<id> and m=<int>", 1);
  }
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto line = text::trim(rows[i]);
    if (line.empty() || line.front() == '#') {
      continue;
    }
    const auto fields = text::split(line, ',');
    if (fields.size() < 2 || fields[0].empty()) {
      throw ParseError("expected 'trajectoryId,timeIndex,v1,...,vm'", i + 1);
    }
    if (fields.size() - 2 != table.dimension) {
      throw ParseError("row has " + std::to_string(fields.size() - 2) + " values, header declares m=" +
                           std::to_string(table.dimension),
                       i + 1);
    }
    const auto t = text::parse_int(fields[1], i + 1);
    if (t < 0) {
      throw ParseError("negative time index", i + 1);
    }
    FrameKey key{std::string(fields[0]), static_cast<std::size_t>(t)};
    std::vector<double> values;
    values.reserve(table.dimension);
    for (std::size_t c = 2; c < fields.size(); ++c) {
      values.push_back(text::parse_double(fields[c], i + 1));
    }
    if (!table.rows.emplace(std::move(key), std::move(values)).second) {
      throw ParseError("duplicate row for (" + std::string(fields[0]) + ", " + std::to_string(t) + ")", i + 1);
    }
  }
  return table;
}

inline FeatureTable load_feature_table(const std::string& path) {
  try {
    return parse_feature_table(text::read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), e.line());
  }
}

inline void save_feature_table(const FeatureTable& table, const std::string& path) {
  text::write_file(path, format_feature_table(table));
}

// ---------------------------------------------------------------------------
// Extractors

/// One frame as seen by an extractor: the image plus its identity.
struct FrameRef {
  const std::string& trajectory_id;
  std::size_t time;
  const Image& image;
};

class Extractor {
public:
  virtual ~Extractor() = default;
  virtual std::string id() const = 0;
  virtual FeatureVector extract(const FrameRef& frame) const = 0;
};

class BuiltinExtractor final : public Extractor {
public:
  explicit BuiltinExtractor(ExtractorConfig cfg = {}) : cfg_(std::move(cfg)) {}
  std::string id() const override { return cfg_.builtin_id(); }
  FeatureVector extract(const FrameRef& frame) const override { return extract_features(frame.image, cfg_); }
  const ExtractorConfig& config() const noexcept { return cfg_; }

private:
  ExtractorConfig cfg_;
};

/// Serves precomputed features (e.g. from a CNN exporter) by frame key.
class TableExtractor final : public Extractor {
public:
  explicit TableExtractor(FeatureTable table) : table_(std::move(table)) {}
  std::string id() const override { return table_.extractor_id; }
  FeatureVector extract(const FrameRef& frame) const override {
    const auto* row = table_.find(frame.trajectory_id, frame.time);
    if (row == nullptr) {
      throw ShapeError("feature table '" + table_.extractor_id + "' has no row for (" + frame.trajectory_id + ", " +
                       std::to_string(frame.time) + ")");
    }
    return {*row, table_.extractor_id};
  }
  const FeatureTable& table() const noexcept { return table_; }

private:
  FeatureTable table_;
};

inline std::unique_ptr<Extractor> make_extractor(const ExtractorConfig& cfg) {
  if (cfg.kind == ExtractorKind::table) {
    return std::make_unique<TableExtractor>(load_feature_table(cfg.table_path));
  }
  return std::make_unique<BuiltinExtractor>(cfg);
}

/// Rejects feature sets that mix extractors or dimensions; returns m.
inline std::size_t require_consistent(std::span<const FeatureVector> features) {
  if (features.empty()) {
    throw DegenerateDataError("no feature vectors");
  }
  for (const auto& f : features) {
    if (f.extractor_id != features.front().extractor_id) {
      throw ShapeError("features from extractors '" + features.front().extractor_id + "' and '" + f.extractor_id +
                       "' cannot be mixed");
    }
    if (f.size() != features.front().size()) {
      throw ShapeError("feature vectors have inconsistent dimension");
    }
  }
  return features.front().size();
}

} // namespace svmstl
