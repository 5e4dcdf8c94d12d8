#pragma once

#include "svmstl/clustering.hpp"
#include "svmstl/config.hpp"
#include "svmstl/core.hpp"
#include "svmstl/features.hpp"
#include "svmstl/inference.hpp"
#include "svmstl/logic.hpp"
#include "svmstl/optim.hpp"
#include "svmstl/parallel.hpp"
#include "svmstl/predicates.hpp"
#include "svmstl/rdsim.hpp"
#include "svmstl/synthesis.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace svmstl::pipeline {

namespace fs = std::filesystem;

/// Every section.key a pipeline config may contain.
inline const Config::Schema& schema() {
  static const Config::Schema s = {
      {"run", {"seed", "jobs"}},
      {"paths", {"out", "corpus", "feature_table"}},
      {"simulate",
       {"pairs", "d1", "d2", "replicates", "seed_policy", "model", "boundary", "frames", "grid", "dt",
        "steps_per_frame", "init_range", "render_lo", "render_hi", "R1", "R2", "R3", "R4"}},
      {"features", {"extractor", "block_grid", "spectral_bins"}},
      {"cluster_images",
       {"clusters", "frame_stride", "swarm_size", "inertia", "r_p", "r_g", "max_iterations", "stagnation_window",
        "stagnation_tolerance", "init", "relabel", "criterion_curve", "montage_tiles"}},
      {"predicates", {"C", "standardize", "tolerance", "max_iterations"}},
      {"cluster_trajectories",
       {"clusters", "distance", "dtw_cost", "band", "time_stride", "swarm_size", "inertia", "r_p", "r_g",
        "max_iterations", "stagnation_window", "stagnation_tolerance", "init"}},
      {"learn_formula",
       {"rounds", "depth", "folds", "window_lengths", "window_stride", "thresholds", "quantiles",
        "threshold_values"}},
      {"synthesize",
       {"formula", "params", "lower", "upper", "swarm_size", "inertia", "r_p", "r_g", "max_iterations",
        "stagnation_window", "stagnation_tolerance", "simulation_seed", "reseed"}},
  };
  return s;
}

/// Everything a stage needs: the config, the output root and run flags.
struct Context {
  Config config;
  fs::path out = "out";
  bool force = false;
  std::ostream* log = &std::cerr;

  std::uint64_t seed() const { return static_cast<std::uint64_t>(config.integer("run", "seed", 0)); }
  std::size_t jobs() const { return std::max<std::size_t>(1, config.count("run", "jobs", 1)); }

  /// Hash of the config with the [paths] section and run.jobs excluded, so
  /// it depends only on settings that affect results.
  std::string config_hash() const { return sha256_hex(config.canonical({"paths", "run.jobs"})); }

  fs::path corpus() const {
    return config.has("paths", "corpus") ? fs::path(config.str("paths", "corpus", "")) : out / "corpus";
  }
  fs::path stage(const std::string& name) const { return out / name; }

  void note(const std::string& stage, const std::string& message) const {
    if (log != nullptr) {
      *log << "[" << stage << "] " << message << "\n";
    }
  }
};

inline Context make_context(Config config, bool force = false, std::ostream* log = &std::cerr) {
  Context ctx;
  ctx.out = config.str("paths", "out", "out");
  ctx.config = std::move(config);
  ctx.force = force;
  ctx.log = log;
  return ctx;
}

struct StageOutcome {
  bool skipped = false;
  std::string stamp;
};

namespace detail {

inline void require(const fs::path& path, const std::string& producer) {
  if (!fs::exists(path)) {
    throw IoError("missing '" + path.generic_string() + "'; run `svmstl " + producer + "` first");
  }
}

/// Stamp over the stage name, the run seed, the named config sections and
/// the contents of every input file or directory.
inline std::string stage_stamp(const Context& ctx, const std::string& stage, const std::vector<std::string>& sections,
                               const std::vector<fs::path>& inputs) {
  ContentHash h;
  h.add("stage", stage);
  h.add("seed", std::to_string(ctx.seed()));
  std::set<std::string> exclude;
  for (const auto& [section, keys] : schema()) {
    if (std::find(sections.begin(), sections.end(), section) == sections.end()) {
      exclude.insert(section);
    }
  }
  h.add("config", ctx.config.canonical(exclude));
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      h.add_tree(in, in.filename().string());
    } else {
      h.add_file(in, in.filename().string());
    }
  }
  return h.hex();
}

/// Runs `body(dir)` unless `dir/stamp.txt` already holds the same stamp.
/// The stamp is written only after the body succeeds.
inline StageOutcome run_stage(const Context& ctx, const std::string& stage, const fs::path& dir,
                              const std::vector<std::string>& sections, const std::vector<fs::path>& inputs,
                              const std::function<void(const fs::path&)>& body) {
  StageOutcome outcome;
  outcome.stamp = stage_stamp(ctx, stage, sections, inputs);
  const fs::path stamp_file = dir / "stamp.txt";
  if (!ctx.force && fs::exists(stamp_file) && text::trim(text::read_file(stamp_file.string())) == outcome.stamp) {
    ctx.note(stage, "inputs unchanged, skipping");
    outcome.skipped = true;
    return outcome;
  }
  if (ctx.force && fs::exists(dir)) {
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
  fs::remove(stamp_file);
  body(dir);
  text::write_file(stamp_file.string(), outcome.stamp + "\n");
  return outcome;
}

inline void write_report(const Context& ctx, const fs::path& path, const std::string& title,
                         const std::vector<std::string>& lines) {
  std::string out = "# " + title + "\nconfig_hash=" + ctx.config_hash() + "\n";
  for (const auto& l : lines) {
    out += l + "\n";
  }
  text::write_file(path.string(), out);
}

inline PsoHyper hyper_from(const Config& c, const std::string& section, PsoHyper defaults) {
  PsoHyper h;
  h.swarm_size = c.count(section, "swarm_size", defaults.swarm_size);
  h.inertia = c.real(section, "inertia", defaults.inertia);
  h.r_p = c.real(section, "r_p", defaults.r_p);
  h.r_g = c.real(section, "r_g", defaults.r_g);
  if (h.swarm_size == 0) {
    throw ConfigError(section + ".swarm_size must be positive");
  }
  return h;
}

inline StopCondition stop_from(const Config& c, const std::string& section, std::size_t default_iterations) {
  StopCondition s;
  s.max_iterations = c.count(section, "max_iterations", default_iterations);
  if (c.has(section, "stagnation_window")) {
    s.stagnation_window = c.count(section, "stagnation_window", 10);
  }
  s.stagnation_tolerance = c.real(section, "stagnation_tolerance", 1e-6);
  return s;
}

inline ClusterInit init_from(const Config& c, const std::string& section) {
  const std::string v = c.str(section, "init", "data_points");
  if (v == "data_points") {
    return ClusterInit::data_points;
  }
  if (v == "uniform_box") {
    return ClusterInit::uniform_box;
  }
  throw ConfigError(section + ".init must be data_points or uniform_box");
}

inline std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out += (i ? "," : "") + text::format_double(v[i]);
  }
  return out;
}

struct CorpusItem {
  std::string path; // directory relative to the corpus root
  std::string id;   // trajectory id
  int label = 0;    // regime label (0 when unknown)
};

inline std::vector<CorpusItem> read_corpus(const Context& ctx) {
  const fs::path manifest = ctx.corpus() / "manifest.txt";
  require(manifest, "simulate");
  std::vector<CorpusItem> items;
  for (const auto& e : parse_manifest(text::read_file(manifest.string()))) {
    const fs::path meta_path = ctx.corpus() / e.path / trajectory_manifest_name;
    std::string id = fs::path(e.path).filename().string();
    if (fs::exists(meta_path)) {
      const auto meta = read_metadata(meta_path.string());
      if (auto it = meta.find("id"); it != meta.end()) {
        id = it->second;
      }
    }
    items.push_back({e.path, id, e.label});
  }
  if (items.empty()) {
    throw DegenerateDataError("corpus manifest lists no trajectories");
  }
  return items;
}

inline RdParams rd_params_from(const Config& c, std::uint64_t seed) {
  RdParams p;
  p.model = parse_model(c.str("simulate", "model", model_name(p.model)));
  const std::string boundary = c.str("simulate", "boundary", "truncated");
  if (boundary == "truncated") {
    p.boundary = Boundary::truncated;
  } else if (boundary == "periodic") {
    p.boundary = Boundary::periodic;
  } else {
    throw ConfigError("simulate.boundary must be truncated or periodic");
  }
  p.frames = c.count("simulate", "frames", p.frames);
  p.grid = c.count("simulate", "grid", p.grid);
  p.dt = c.real("simulate", "dt", p.dt);
  p.steps_per_frame = c.count("simulate", "steps_per_frame", p.steps_per_frame);
  p.init_range = c.real("simulate", "init_range", p.init_range);
  p.render_lo = c.real("simulate", "render_lo", p.render_lo);
  p.render_hi = c.real("simulate", "render_hi", p.render_hi);
  p.R1 = c.real("simulate", "R1", p.R1);
  p.R2 = c.real("simulate", "R2", p.R2);
  p.R3 = c.real("simulate", "R3", p.R3);
  p.R4 = c.real("simulate", "R4", p.R4);
  p.seed = seed;
  p.validate();
  return p;
}

inline ExtractorConfig extractor_config_from(const Config& c) {
  ExtractorConfig e;
  const std::string kind = c.str("features", "extractor", "builtin");
  if (kind == "builtin") {
    e.kind = ExtractorKind::builtin;
  } else if (kind == "table") {
    e.kind = ExtractorKind::table;
    if (!c.has("paths", "feature_table")) {
      throw ConfigError("features.extractor=table needs paths.feature_table");
    }
    e.table_path = c.str("paths", "feature_table", "");
  } else {
    throw ConfigError("features.extractor must be builtin or table");
  }
  e.block_grid = c.count("features", "block_grid", e.block_grid);
  e.spectral_bins = c.count("features", "spectral_bins", e.spectral_bins);
  return e;
}

inline FeatureTable load_features(const Context& ctx) {
  const fs::path path = ctx.stage("features") / "features.txt";
  require(path, "extract");
  return load_feature_table(path.string());
}

/// Per-trajectory feature rows 0..T from a table, in time order.
inline std::vector<FeatureVector> trajectory_features(const FeatureTable& table, const std::string& id) {
  std::vector<FeatureVector> out;
  for (auto it = table.rows.lower_bound(FrameKey{id, 0}); it != table.rows.end() && it->first.trajectory_id == id;
       ++it) {
    if (it->first.time != out.size()) {
      throw MissingFrameError(id, out.size());
    }
    out.push_back({it->second, table.extractor_id});
  }
  if (out.empty()) {
    throw ShapeError("feature table has no rows for trajectory '" + id + "'");
  }
  return out;
}

struct SignalCorpus {
  std::vector<std::string> ids;
  std::vector<int> regimes;
  std::vector<StSignal> signals;
};

inline SignalCorpus load_signals(const Context& ctx) {
  const fs::path index = ctx.stage("signals") / "index.csv";
  require(index, "signals");
  SignalCorpus out;
  for (const auto& e : parse_assignment(text::read_file(index.string()))) {
    out.ids.push_back(e.item);
    out.regimes.push_back(e.label);
    out.signals.push_back(load_signal((ctx.stage("signals") / (e.item + ".csv")).string()));
  }
  if (out.ids.empty()) {
    throw DegenerateDataError("signal index is empty");
  }
  return out;
}

inline StSignal subsample(const StSignal& s, std::size_t stride) {
  if (stride <= 1) {
    return s;
  }
  std::vector<double> values;
  std::size_t steps = 0;
  for (std::size_t k = 0; k < s.steps(); k += stride) {
    for (std::size_t d = 0; d < s.dims(); ++d) {
      values.push_back(s.at(k, d));
    }
    ++steps;
  }
  return StSignal(steps, s.dims(), std::move(values), s.labels());
}

inline std::map<int, std::optional<int>> parse_relabel(const std::vector<std::string>& items) {
  std::map<int, std::optional<int>> out;
  for (const auto& item : items) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      throw ConfigError("relabel entry '" + item + "' must look like from:to or from:drop");
    }
    const int from = static_cast<int>(text::parse_int(text::trim(item.substr(0, colon))));
    const auto to = text::trim(item.substr(colon + 1));
    out[from] = to == "drop" ? std::nullopt : std::optional<int>(static_cast<int>(text::parse_int(to)));
  }
  return out;
}

inline Image montage(const std::vector<const Image*>& tiles, std::size_t side) {
  const std::size_t w = tiles.front()->width();
  const std::size_t h = tiles.front()->height();
  std::vector<double> px(side * w * side * h, 0.0);
  for (std::size_t t = 0; t < tiles.size() && t < side * side; ++t) {
    const std::size_t r0 = (t / side) * h;
    const std::size_t c0 = (t % side) * w;
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        px[(r0 + r) * side * w + c0 + c] = tiles[t]->at(r, c, 0);
      }
    }
  }
  return Image(side * w, side * h, 1, std::move(px));
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) {
    s += x;
  }
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

/// Population standard deviation.
inline double stddev_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) {
    s += (x - m) * (x - m);
  }
  return v.empty() ? 0.0 : std::sqrt(s / static_cast<double>(v.size()));
}

} // namespace detail

// ---------------------------------------------------------------------------
// simulate: reaction-diffusion sweep into the corpus directory

inline std::vector<SweepPoint> sweep_points(const Config& c, std::vector<int>* regimes = nullptr) {
  std::vector<std::pair<double, double>> pairs;
  for (const auto& item : c.list("simulate", "pairs")) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      throw ConfigError("simulate.pairs entry '" + item + "' must look like D1:D2");
    }
    try {
      pairs.emplace_back(text::parse_double(text::trim(item.substr(0, colon))),
                         text::parse_double(text::trim(item.substr(colon + 1))));
    } catch (const ParseError&) {
      throw ConfigError("simulate.pairs entry '" + item + "' is not numeric");
    }
  }
  if (pairs.empty()) {
    auto d1 = c.reals("simulate", "d1");
    auto d2 = c.reals("simulate", "d2");
    if (d1.empty()) {
      d1 = {1, 5, 9};
    }
    if (d2.empty()) {
      d2 = {1, 5, 9};
    }
    for (double a : d1) {
      for (double b : d2) {
        pairs.emplace_back(a, b);
      }
    }
  }
  const std::size_t replicates = c.count("simulate", "replicates", 1);
  if (replicates == 0) {
    throw ConfigError("simulate.replicates must be positive");
  }
  std::vector<SweepPoint> points;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    for (std::size_t r = 0; r < replicates; ++r) {
      points.push_back({pairs[i].first, pairs[i].second, r});
      if (regimes != nullptr) {
        regimes->push_back(static_cast<int>(i + 1));
      }
    }
  }
  return points;
}

inline StageOutcome cmd_simulate(const Context& ctx) {
  return detail::run_stage(ctx, "simulate", ctx.corpus(), {"simulate"}, {}, [&](const fs::path& dir) {
    std::vector<int> regimes;
    const auto points = sweep_points(ctx.config, &regimes);
    const RdParams base = detail::rd_params_from(ctx.config, ctx.seed());
    const std::string policy = ctx.config.str("simulate", "seed_policy", "per_pair");
    if (policy != "per_pair" && policy != "fixed") {
      throw ConfigError("simulate.seed_policy must be per_pair or fixed");
    }
    ctx.note("simulate", std::to_string(points.size()) + " trajectories, " + std::to_string(base.frames + 1) +
                             " frames of " + std::to_string(base.grid) + "x" + std::to_string(base.grid));
    const auto entries =
        sweep(points, base, dir.string(), policy == "fixed" ? SeedPolicy::fixed : SeedPolicy::per_pair, ctx.jobs());
    std::vector<ManifestEntry> manifest;
    std::vector<std::string> report{"trajectories=" + std::to_string(entries.size()),
                                    "frames=" + std::to_string(base.frames + 1),
                                    "grid=" + std::to_string(base.grid), "model=" + std::string(model_name(base.model)),
                                    "", "regime,D1,D2,seed,status,path"};
    std::size_t failed = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& e = entries[i];
      if (e.status == "ok") {
        manifest.push_back({e.path, regimes[i]});
      } else {
        ++failed;
      }
      report.push_back(std::to_string(regimes[i]) + "," + text::format_double(e.D1) + "," +
                       text::format_double(e.D2) + "," + std::to_string(e.seed) + "," + e.status + "," + e.path);
    }
    report.insert(report.begin() + 1, "failed=" + std::to_string(failed));
    if (manifest.empty()) {
      throw DegenerateDataError("every simulation in the sweep blew up");
    }
    text::write_file((dir / "manifest.txt").string(), format_manifest(manifest));
    detail::write_report(ctx, dir / "report.txt", "simulate", report);
  });
}

// ---------------------------------------------------------------------------
// extract: per-frame feature table

inline StageOutcome cmd_extract(const Context& ctx) {
  const fs::path manifest = ctx.corpus() / "manifest.txt";
  detail::require(manifest, "simulate");
  const ExtractorConfig ecfg = detail::extractor_config_from(ctx.config);
  std::vector<fs::path> inputs{ctx.corpus()};
  if (ecfg.kind == ExtractorKind::table) {
    detail::require(ecfg.table_path, "an external feature exporter");
    inputs.push_back(ecfg.table_path);
  }
  return detail::run_stage(ctx, "extract", ctx.stage("features"), {"features"}, inputs, [&](const fs::path& dir) {
    const auto items = detail::read_corpus(ctx);
    const auto extractor = make_extractor(ecfg);
    FeatureTable table;
    table.extractor_id = extractor->id();
    std::vector<std::vector<FeatureVector>> per_item(items.size());
    std::vector<std::size_t> frame_counts(items.size());
    parallel_for(items.size(), ctx.jobs(), [&](std::size_t i) {
      const StTrajectory traj = load_trajectory((ctx.corpus() / items[i].path).string());
      frame_counts[i] = traj.size();
      for (std::size_t k = 0; k < traj.size(); ++k) {
        per_item[i].push_back(extractor->extract(FrameRef{traj.id(), k, traj.frame(k)}));
      }
    });
    for (std::size_t i = 0; i < items.size(); ++i) {
      const std::size_t m = require_consistent(per_item[i]);
      if (table.dimension == 0) {
        table.dimension = m;
      } else if (m != table.dimension) {
        throw ShapeError("trajectory '" + items[i].id + "' yields features of dimension " + std::to_string(m) +
                         ", expected " + std::to_string(table.dimension));
      }
      for (std::size_t k = 0; k < per_item[i].size(); ++k) {
        table.rows[FrameKey{items[i].id, k}] = std::move(per_item[i][k].values);
      }
    }
    save_feature_table(table, (dir / "features.txt").string());
    std::size_t frames = 0;
    for (auto n : frame_counts) {
      frames += n;
    }
    ctx.note("extract", std::to_string(frames) + " frames, m=" + std::to_string(table.dimension));
    detail::write_report(ctx, dir / "report.txt", "extract",
                         {"extractor=" + table.extractor_id, "m=" + std::to_string(table.dimension),
                          "trajectories=" + std::to_string(items.size()), "frames=" + std::to_string(frames)});
  });
}

// ---------------------------------------------------------------------------
// cluster-images: PSO clustering of frame features into image classes

inline StageOutcome cmd_cluster_images(const Context& ctx) {
  const fs::path features_path = ctx.stage("features") / "features.txt";
  detail::require(features_path, "extract");
  return detail::run_stage(
      ctx, "cluster-images", ctx.stage("images"), {"cluster_images"}, {features_path}, [&](const fs::path& dir) {
        const auto& c = ctx.config;
        const FeatureTable table = detail::load_features(ctx);
        const std::size_t stride = std::max<std::size_t>(1, c.count("cluster_images", "frame_stride", 5));
        std::vector<Point> points;
        std::vector<FrameKey> keys;
        for (const auto& [key, values] : table.rows) {
          if (key.time % stride == 0) {
            points.push_back(values);
            keys.push_back(key);
          }
        }
        PsoClusterOptions opt;
        opt.clusters = c.count("cluster_images", "clusters", 4);
        opt.hyper = detail::hyper_from(c, "cluster_images", PsoHyper{});
        opt.stop = detail::stop_from(c, "cluster_images", 200);
        opt.seed = derive_seed(ctx.seed(), 101);
        opt.jobs = ctx.jobs();
        opt.init = detail::init_from(c, "cluster_images");

        std::vector<std::string> curve_rows{"n,criterion"};
        for (double n : c.reals("cluster_images", "criterion_curve")) {
          if (n < 1 || n != std::floor(n)) {
            throw ConfigError("cluster_images.criterion_curve entries must be positive integers");
          }
          PsoClusterOptions o = opt;
          o.clusters = static_cast<std::size_t>(n);
          const auto r = cluster_images_pso(points, o);
          curve_rows.push_back(std::to_string(o.clusters) + "," + text::format_double(r.model.criterion));
          ctx.note("cluster-images", "n=" + std::to_string(o.clusters) + " criterion " +
                                         text::format_double(r.model.criterion));
        }
        if (curve_rows.size() > 1) {
          std::string csv;
          for (const auto& row : curve_rows) {
            csv += row + "\n";
          }
          text::write_file((dir / "criterion_curve.csv").string(), csv);
        }

        const ClusterResult result = cluster_images_pso(points, opt);
        text::write_file((dir / "model.txt").string(), format_cluster_model(result.model));

        // Relabel / drop, then compact the surviving labels to 1..n'.
        const auto relabel = detail::parse_relabel(c.list("cluster_images", "relabel"));
        for (const auto& [from, to] : relabel) {
          if (from < 1 || static_cast<std::size_t>(from) > opt.clusters ||
              (to && (*to < 1 || static_cast<std::size_t>(*to) > opt.clusters))) {
            throw ConfigError("cluster_images.relabel refers to a cluster outside 1.." +
                              std::to_string(opt.clusters));
          }
        }
        std::vector<std::optional<int>> mapped(points.size());
        std::set<int> survivors;
        for (std::size_t i = 0; i < points.size(); ++i) {
          const int l = result.labels[i];
          const auto it = relabel.find(l);
          mapped[i] = it == relabel.end() ? std::optional<int>(l) : it->second;
          if (mapped[i]) {
            survivors.insert(*mapped[i]);
          }
        }
        std::map<int, int> compact;
        for (int l : survivors) {
          compact[l] = static_cast<int>(compact.size()) + 1;
        }
        if (compact.size() < 2) {
          throw DegenerateDataError("image clustering left fewer than 2 classes after relabeling");
        }
        std::vector<AssignmentEntry> labels;
        std::map<int, std::vector<std::size_t>> members;
        std::size_t dropped = 0;
        for (std::size_t i = 0; i < points.size(); ++i) {
          if (!mapped[i]) {
            ++dropped;
            continue;
          }
          const int l = compact.at(*mapped[i]);
          labels.push_back({keys[i].trajectory_id + ":" + std::to_string(keys[i].time), l});
          members[l].push_back(i);
        }
        text::write_file((dir / "labels.csv").string(), format_assignment(labels));

        // Sample montages from the first frames of each class.
        const std::size_t side = std::max<std::size_t>(1, c.count("cluster_images", "montage_tiles", 4));
        const auto items = detail::read_corpus(ctx);
        std::map<std::string, std::string> path_of;
        for (const auto& item : items) {
          path_of[item.id] = item.path;
        }
        for (const auto& [l, idx] : members) {
          std::vector<Image> frames;
          for (std::size_t t = 0; t < idx.size() && t < side * side; ++t) {
            const auto& key = keys[idx[t]];
            const auto it = path_of.find(key.trajectory_id);
            if (it == path_of.end()) {
              break;
            }
            const fs::path tdir = ctx.corpus() / it->second;
            const auto meta = read_metadata((tdir / trajectory_manifest_name).string());
            const std::size_t ch = meta.count("channels") ? std::stoul(meta.at("channels")) : 1;
            frames.push_back(read_pnm((tdir / frame_filename(key.time, ch)).string()));
          }
          if (!frames.empty()) {
            std::vector<const Image*> tiles;
            for (const auto& f : frames) {
              tiles.push_back(&f);
            }
            write_pnm((dir / ("montage_" + std::to_string(l) + ".pgm")).string(), detail::montage(tiles, side));
          }
        }

        std::vector<std::string> report{"clusters=" + std::to_string(opt.clusters),
                                        "classes=" + std::to_string(compact.size()),
                                        "frames=" + std::to_string(points.size()),
                                        "frame_stride=" + std::to_string(stride),
                                        "dropped=" + std::to_string(dropped),
                                        "criterion=" + text::format_double(result.model.criterion),
                                        "iterations=" + std::to_string(result.iterations),
                                        "",
                                        "class,size"};
        for (const auto& [l, idx] : members) {
          report.push_back(std::to_string(l) + "," + std::to_string(idx.size()));
        }
        ctx.note("cluster-images", std::to_string(compact.size()) + " image classes over " +
                                       std::to_string(points.size()) + " frames");
        detail::write_report(ctx, dir / "report.txt", "cluster-images", report);
      });
}

// ---------------------------------------------------------------------------
// learn-predicates: one-vs-rest SVM per image class

inline StageOutcome cmd_learn_predicates(const Context& ctx) {
  const fs::path features_path = ctx.stage("features") / "features.txt";
  const fs::path labels_path = ctx.stage("images") / "labels.csv";
  detail::require(features_path, "extract");
  detail::require(labels_path, "cluster-images");
  return detail::run_stage(
      ctx, "learn-predicates", ctx.stage("predicates"), {"predicates"}, {features_path, labels_path},
      [&](const fs::path& dir) {
        const auto& c = ctx.config;
        const FeatureTable table = detail::load_features(ctx);
        std::vector<FeatureVector> xs;
        std::vector<int> labels;
        int classes = 0;
        for (const auto& e : parse_assignment(text::read_file(labels_path.string()))) {
          const auto colon = e.item.rfind(':');
          if (colon == std::string::npos) {
            throw ParseError("image label item '" + e.item + "' must look like trajectory:time");
          }
          const std::string id = e.item.substr(0, colon);
          const auto t = static_cast<std::size_t>(text::parse_int(e.item.substr(colon + 1)));
          const auto* row = table.find(id, t);
          if (row == nullptr) {
            throw ShapeError("no features for labeled frame " + e.item);
          }
          xs.push_back({*row, table.extractor_id});
          labels.push_back(e.label);
          classes = std::max(classes, e.label);
        }
        SvmOptions opt;
        opt.C = c.real("predicates", "C", opt.C);
        opt.standardize = c.flag("predicates", "standardize", opt.standardize);
        opt.tolerance = c.real("predicates", "tolerance", opt.tolerance);
        opt.max_iterations = c.count("predicates", "max_iterations", opt.max_iterations);
        const PredicateSuite suite = train_predicate_suite(xs, labels, classes, opt, ctx.jobs());
        save_predicate_suite(suite, (dir / "suite.txt").string());
        std::vector<std::string> report{"predicates=" + std::to_string(suite.size()),
                                        "samples=" + std::to_string(xs.size()), "C=" + text::format_double(opt.C),
                                        "extractor=" + suite.extractor_id, "",
                                        "class,margin,violations,hinge_loss,support_vectors,iterations"};
        for (const auto& m : suite.models) {
          report.push_back(std::to_string(m.class_index) + "," + text::format_double(m.stats.margin) + "," +
                           std::to_string(m.stats.violations) + "," + text::format_double(m.stats.hinge_loss) + "," +
                           std::to_string(m.stats.support_vectors) + "," + std::to_string(m.stats.iterations));
        }
        ctx.note("learn-predicates", std::to_string(suite.size()) + " predicates from " +
                                         std::to_string(xs.size()) + " frames");
        detail::write_report(ctx, dir / "report.txt", "learn-predicates", report);
      });
}

// ---------------------------------------------------------------------------
// signals: h(S) for every corpus trajectory

inline StageOutcome cmd_signals(const Context& ctx) {
  const fs::path features_path = ctx.stage("features") / "features.txt";
  const fs::path suite_path = ctx.stage("predicates") / "suite.txt";
  const fs::path manifest = ctx.corpus() / "manifest.txt";
  detail::require(manifest, "simulate");
  detail::require(features_path, "extract");
  detail::require(suite_path, "learn-predicates");
  return detail::run_stage(
      ctx, "signals", ctx.stage("signals"), {}, {manifest, features_path, suite_path}, [&](const fs::path& dir) {
        const FeatureTable table = detail::load_features(ctx);
        const PredicateSuite suite = load_predicate_suite(suite_path.string());
        const auto items = detail::read_corpus(ctx);
        std::vector<StSignal> signals(items.size());
        parallel_for(items.size(), ctx.jobs(), [&](std::size_t i) {
          signals[i] = features_to_signal(detail::trajectory_features(table, items[i].id), suite);
        });
        std::vector<AssignmentEntry> index;
        for (std::size_t i = 0; i < items.size(); ++i) {
          save_signal(signals[i], (dir / (items[i].id + ".csv")).string());
          index.push_back({items[i].id, items[i].label});
        }
        text::write_file((dir / "index.csv").string(), "# id,regime\n" + format_assignment(index));
        ctx.note("signals", std::to_string(items.size()) + " signals of dimension " + std::to_string(suite.size()));
        detail::write_report(ctx, dir / "report.txt", "signals",
                             {"signals=" + std::to_string(items.size()), "dims=" + std::to_string(suite.size()),
                              "steps=" + std::to_string(signals.front().steps())});
      });
}

// ---------------------------------------------------------------------------
// cluster-trajectories: PSO clustering of signals into trajectory classes

inline StageOutcome cmd_cluster_trajectories(const Context& ctx) {
  const fs::path signals_dir = ctx.stage("signals");
  detail::require(signals_dir / "index.csv", "signals");
  return detail::run_stage(
      ctx, "cluster-trajectories", ctx.stage("trajectories"), {"cluster_trajectories"}, {signals_dir},
      [&](const fs::path& dir) {
        const auto& c = ctx.config;
        const auto corpus = detail::load_signals(ctx);
        const std::size_t stride = std::max<std::size_t>(1, c.count("cluster_trajectories", "time_stride", 3));
        std::vector<StSignal> reduced;
        for (const auto& s : corpus.signals) {
          reduced.push_back(detail::subsample(s, stride));
        }
        PsoClusterOptions opt;
        opt.clusters = c.count("cluster_trajectories", "clusters", 3);
        opt.hyper = detail::hyper_from(c, "cluster_trajectories", PsoHyper{});
        opt.stop = detail::stop_from(c, "cluster_trajectories", 100);
        opt.seed = derive_seed(ctx.seed(), 202);
        opt.jobs = ctx.jobs();
        opt.init = detail::init_from(c, "cluster_trajectories");
        const std::string distance = c.str("cluster_trajectories", "distance", "dtw");
        if (distance == "dtw") {
          opt.distance.kind = DistanceKind::dtw;
          const std::string cost = c.str("cluster_trajectories", "dtw_cost", "absolute");
          if (cost != "absolute" && cost != "squared") {
            throw ConfigError("cluster_trajectories.dtw_cost must be absolute or squared");
          }
          opt.distance.dtw.cost = cost == "absolute" ? DtwCost::absolute : DtwCost::squared;
          if (c.has("cluster_trajectories", "band")) {
            opt.distance.dtw.band = c.count("cluster_trajectories", "band", 0);
          } else {
            opt.distance.dtw.band = 4;
          }
        } else if (distance == "squared") {
          opt.distance.kind = DistanceKind::squared_euclidean;
        } else {
          throw ConfigError("cluster_trajectories.distance must be dtw or squared");
        }
        const ClusterResult result = cluster_trajectories(reduced, opt);
        text::write_file((dir / "model.txt").string(), format_cluster_model(result.model));
        std::vector<AssignmentEntry> labels;
        std::map<int, std::size_t> sizes;
        for (std::size_t i = 0; i < corpus.ids.size(); ++i) {
          labels.push_back({corpus.ids[i], result.labels[i]});
          ++sizes[result.labels[i]];
        }
        text::write_file((dir / "labels.csv").string(), format_assignment(labels));
        std::vector<std::string> report{"clusters=" + std::to_string(opt.clusters),
                                        "trajectories=" + std::to_string(corpus.ids.size()),
                                        "distance=" + distance, "time_stride=" + std::to_string(stride),
                                        "criterion=" + text::format_double(result.model.criterion)};
        const bool have_regimes =
            std::all_of(corpus.regimes.begin(), corpus.regimes.end(), [](int r) { return r > 0; });
        if (have_regimes) {
          const double ari = adjusted_rand_index(result.labels, corpus.regimes);
          report.push_back("ari_vs_regime=" + text::format_fixed(ari, 6));
          ctx.note("cluster-trajectories", "ARI against simulation regimes " + text::format_fixed(ari, 4));
        }
        report.push_back("");
        report.push_back("class,size");
        for (const auto& [l, n] : sizes) {
          report.push_back(std::to_string(l) + "," + std::to_string(n));
        }
        detail::write_report(ctx, dir / "report.txt", "cluster-trajectories", report);
      });
}

// ---------------------------------------------------------------------------
// learn-formula: one-vs-rest boosted STL trees per trajectory class

inline BoostOptions boost_options_from(const Config& c) {
  BoostOptions opt;
  opt.rounds = c.count("learn_formula", "rounds", 3);
  opt.tree.depth = c.count("learn_formula", "depth", 2);
  for (double l : c.reals("learn_formula", "window_lengths")) {
    if (l < 0 || l != std::floor(l)) {
      throw ConfigError("learn_formula.window_lengths entries must be non-negative integers");
    }
    opt.tree.search.windows.lengths.push_back(static_cast<std::size_t>(l));
  }
  opt.tree.search.windows.stride = c.count("learn_formula", "window_stride", 2);
  const std::string mode = c.str("learn_formula", "thresholds", "midpoints");
  if (mode == "midpoints") {
    opt.tree.search.thresholds.mode = ThresholdMode::midpoints;
  } else if (mode == "quantiles") {
    opt.tree.search.thresholds.mode = ThresholdMode::quantiles;
  } else if (mode == "explicit") {
    opt.tree.search.thresholds.mode = ThresholdMode::explicit_values;
    opt.tree.search.thresholds.values = c.reals("learn_formula", "threshold_values");
  } else {
    throw ConfigError("learn_formula.thresholds must be midpoints, quantiles or explicit");
  }
  opt.tree.search.thresholds.quantiles = c.count("learn_formula", "quantiles", 20);
  return opt;
}

/// Per-class row of the metrics table (accuracies in percent).
struct ClassMetrics {
  int cls = 0;
  double train_mean = 0.0;
  double train_std = 0.0;
  double test_mean = 0.0;
  double test_std = 0.0;
  double runtime_s = 0.0;
};

inline std::vector<ClassMetrics> read_metrics(const fs::path& path) {
  std::vector<ClassMetrics> out;
  const std::string contents = text::read_file(path.string());
  const auto rows = text::lines(contents);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto row = text::trim(rows[i]);
    if (row.empty()) {
      continue;
    }
    const auto f = text::split(row, ',');
    if (f.size() != 6) {
      throw ParseError("metrics row needs 6 fields", i + 1);
    }
    out.push_back({static_cast<int>(text::parse_int(f[0])), text::parse_double(f[1]), text::parse_double(f[2]),
                   text::parse_double(f[3]), text::parse_double(f[4]), text::parse_double(f[5])});
  }
  return out;
}

inline StageOutcome cmd_learn_formula(const Context& ctx) {
  const fs::path signals_dir = ctx.stage("signals");
  const fs::path labels_path = ctx.stage("trajectories") / "labels.csv";
  detail::require(signals_dir / "index.csv", "signals");
  detail::require(labels_path, "cluster-trajectories");
  return detail::run_stage(
      ctx, "learn-formula", ctx.stage("formulas"), {"learn_formula"}, {signals_dir, labels_path},
      [&](const fs::path& dir) {
        const auto& c = ctx.config;
        const auto corpus = detail::load_signals(ctx);
        std::map<std::string, int> label_of;
        for (const auto& e : parse_assignment(text::read_file(labels_path.string()))) {
          label_of[e.item] = e.label;
        }
        std::vector<int> classes;
        int n_classes = 0;
        for (const auto& id : corpus.ids) {
          const auto it = label_of.find(id);
          if (it == label_of.end()) {
            throw ShapeError("trajectory '" + id + "' has no class label; rerun `svmstl cluster-trajectories`");
          }
          classes.push_back(it->second);
          n_classes = std::max(n_classes, it->second);
        }
        BoostOptions opt = boost_options_from(c);
        opt.tree.search.jobs = ctx.jobs();
        const std::size_t folds = c.count("learn_formula", "folds", 2);

        std::vector<ClassMetrics> metrics;
        std::vector<std::string> report{"classes=" + std::to_string(n_classes),
                                        "trajectories=" + std::to_string(corpus.ids.size()),
                                        "rounds=" + std::to_string(opt.rounds),
                                        "depth=" + std::to_string(opt.tree.depth), "folds=" + std::to_string(folds)};
        for (int cls = 1; cls <= n_classes; ++cls) {
          const auto binary = one_vs_rest_split(classes, cls, n_classes);
          const auto start = std::chrono::steady_clock::now();
          std::vector<double> train_acc;
          std::vector<double> test_acc;
          for (const auto& split : stratified_kfold(binary, folds, derive_seed(ctx.seed(), 300 + cls))) {
            std::vector<StSignal> tr;
            std::vector<int> trl;
            std::vector<StSignal> te;
            std::vector<int> tel;
            for (auto i : split.train) {
              tr.push_back(corpus.signals[i]);
              trl.push_back(binary[i]);
            }
            for (auto i : split.test) {
              te.push_back(corpus.signals[i]);
              tel.push_back(binary[i]);
            }
            const BdtClassifier bdt = boost(tr, trl, opt);
            train_acc.push_back(100.0 * (1.0 - mcr_classifier(bdt, tr, trl).rate));
            test_acc.push_back(100.0 * (1.0 - mcr_classifier(bdt, te, tel).rate));
          }
          const double runtime =
              std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
          metrics.push_back({cls, detail::mean_of(train_acc), detail::stddev_of(train_acc), detail::mean_of(test_acc),
                             detail::stddev_of(test_acc), runtime});

          const BdtClassifier final_model = boost(corpus.signals, binary, opt);
          const std::string stem = "class_" + std::to_string(cls);
          text::write_file((dir / (stem + ".bdt")).string(), format_bdt(final_model));
          const WeightedExport wexp = bdt_to_weighted_formula(final_model);
          std::string ftext = "# class " + std::to_string(cls) + " versus rest\n";
          for (std::size_t k = 0; k < final_model.trees.size(); ++k) {
            ftext += "# tree " + std::to_string(k + 1) + " alpha=" + text::format_double(final_model.alphas[k]) +
                     ": " + unparse(tree_to_formula(final_model.trees[k]).formula) + "\n";
          }
          ftext += "# " + wexp.caveat + "\n";
          ftext += unparse(wexp.formula) + "\n";
          text::write_file((dir / (stem + ".formula")).string(), ftext);
          const McrResult full = mcr_classifier(final_model, corpus.signals, binary);
          report.push_back("class " + std::to_string(cls) + ": members=" +
                           std::to_string(std::count(classes.begin(), classes.end(), cls)) +
                           " final_train_mcr=" + text::format_fixed(full.rate, 6));
          ctx.note("learn-formula", "class " + std::to_string(cls) + " train " +
                                        text::format_fixed(metrics.back().train_mean, 2) + "% test " +
                                        text::format_fixed(metrics.back().test_mean, 2) + "%");
        }
        std::string csv = "class,train_acc_mean,train_acc_std,test_acc_mean,test_acc_std,runtime_s\n";
        std::string table = "Class  Avg. accuracy (%) training  Std. dev.  Avg. accuracy (%) testing  Std. dev.  "
                            "Runtime (s)\n";
        for (const auto& m : metrics) {
          csv += std::to_string(m.cls) + "," + text::format_fixed(m.train_mean, 4) + "," +
                 text::format_fixed(m.train_std, 4) + "," + text::format_fixed(m.test_mean, 4) + "," +
                 text::format_fixed(m.test_std, 4) + "," + text::format_fixed(m.runtime_s, 3) + "\n";
          const auto pad = [](std::string s, std::size_t w) {
            return s.size() < w ? std::string(w - s.size(), ' ') + s : s;
          };
          table += pad(std::to_string(m.cls), 5) + pad(text::format_fixed(m.train_mean, 2), 28) +
                   pad(text::format_fixed(m.train_std, 2), 11) + pad(text::format_fixed(m.test_mean, 2), 27) +
                   pad(text::format_fixed(m.test_std, 2), 11) + pad(text::format_fixed(m.runtime_s, 3), 13) + "\n";
        }
        text::write_file((dir / "metrics.csv").string(), csv);
        text::write_file((dir / "metrics.txt").string(), table);
        detail::write_report(ctx, dir / "report.txt", "learn-formula", report);
      });
}

// ---------------------------------------------------------------------------
// monitor

struct MonitorResult {
  bool satisfied = false;
  double robustness = 0.0;
};

/// The first line of `text` that is neither blank nor a '#' comment.
inline std::string formula_text(std::string_view contents) {
  for (auto line : text::lines(contents)) {
    line = text::trim(line);
    if (!line.empty() && line.front() != '#') {
      return std::string(line);
    }
  }
  throw ParseError("no formula found");
}

inline MonitorResult cmd_monitor(const std::string& formula, const std::string& signal_path, std::size_t time = 0) {
  const Formula phi = parse_formula(formula);
  const StSignal s = load_signal(signal_path);
  return {satisfies(s, phi, time), robustness(s, phi, time)};
}

// ---------------------------------------------------------------------------
// synthesize: parameter search maximizing robustness on the RD system

inline StageOutcome cmd_synthesize(const Context& ctx) {
  const fs::path suite_path = ctx.stage("predicates") / "suite.txt";
  detail::require(suite_path, "learn-predicates");
  return detail::run_stage(
      ctx, "synthesize", ctx.stage("synthesis"), {"synthesize", "simulate", "features"}, {suite_path},
      [&](const fs::path& dir) {
        const auto& c = ctx.config;
        if (!c.has("synthesize", "formula")) {
          throw ConfigError("synthesize.formula is not set");
        }
        const Formula phi = parse_formula(c.str("synthesize", "formula", ""));
        auto names = c.list("synthesize", "params");
        if (names.empty()) {
          names = {"D1", "D2"};
        }
        Box box;
        box.lower = c.reals("synthesize", "lower");
        box.upper = c.reals("synthesize", "upper");
        if (box.lower.empty() && box.upper.empty() && names == std::vector<std::string>{"D1", "D2"}) {
          box.lower = {0.5, 1.0};
          box.upper = {10.0, 40.0};
        }
        if (box.lower.size() != names.size() || box.upper.size() != names.size()) {
          throw ConfigError("synthesize.lower and synthesize.upper need one bound per parameter in synthesize.params");
        }
        const ExtractorConfig ecfg = detail::extractor_config_from(c);
        if (ecfg.kind != ExtractorKind::builtin) {
          throw ConfigError("synthesis simulates new trajectories and needs features.extractor=builtin");
        }
        const BuiltinExtractor extractor(ecfg);
        const PredicateSuite suite = load_predicate_suite(suite_path.string());
        const RdParams base = detail::rd_params_from(c, ctx.seed());
        const std::size_t T = base.frames;
        if (horizon(phi) > T) {
          throw HorizonError(horizon(phi), T);
        }
        SynthesisOptions opt;
        opt.hyper = detail::hyper_from(c, "synthesize", PsoHyper{100, 0.6, 1.5, 2.5});
        opt.stop = detail::stop_from(c, "synthesize", 20);
        opt.seed = derive_seed(ctx.seed(), 404);
        opt.simulation_seed = static_cast<std::uint64_t>(c.integer("synthesize", "simulation_seed", 0));
        opt.reseed_per_evaluation = c.flag("synthesize", "reseed", false);
        opt.jobs = ctx.jobs();
        const SynthesisResult r = synthesize(rd_signal_generator(base, names, suite, extractor), box, phi, opt);

        std::vector<std::string> result{"formula=" + unparse(phi)};
        for (std::size_t i = 0; i < names.size(); ++i) {
          result.push_back(names[i] + "=" + text::format_double(r.best[i]));
        }
        result.push_back("robustness=" + text::format_double(r.robustness));
        result.push_back("satisfied=" + std::string(r.robustness > 0 ? "true" : "false"));
        result.push_back("witness_seed=" + std::to_string(r.witness_seed));
        result.push_back("evaluations=" + std::to_string(r.evaluations));
        result.push_back("simulations=" + std::to_string(r.simulations));
        result.push_back("failures=" + std::to_string(r.failures));

        std::string history = "iteration,best_robustness\n";
        for (std::size_t k = 0; k < r.history.size(); ++k) {
          history += std::to_string(k) + "," + text::format_double(r.history[k]) + "\n";
        }
        text::write_file((dir / "history.csv").string(), history);

        if (std::isfinite(r.robustness)) {
          const RdParams wp = rd_params_at(base, names, r.best, r.witness_seed);
          save_trajectory(simulate(wp, "witness"), (dir / "witness").string(),
                          {{"seed", std::to_string(wp.seed)}, {"model", model_name(wp.model)}});
          const StSignal on_disk =
              trajectory_to_signal(load_trajectory((dir / "witness").string()), suite, extractor);
          save_signal(on_disk, (dir / "witness_signal.csv").string());
          const double rho = robustness(on_disk, phi, 0);
          result.push_back("witness_robustness=" + text::format_double(rho));
          if (std::abs(rho - r.robustness) > 1e-9) {
            throw Error("witness robustness " + text::format_double(rho) + " differs from search result " +
                        text::format_double(r.robustness));
          }
        }
        std::string body;
        for (const auto& l : result) {
          body += l + "\n";
        }
        text::write_file((dir / "result.txt").string(), body);
        ctx.note("synthesize", "best robustness " + text::format_double(r.robustness));
        result.insert(result.begin(), "params=" + [&] {
          std::string s;
          for (std::size_t i = 0; i < names.size(); ++i) {
            s += (i ? "," : "") + names[i];
          }
          return s;
        }());
        result.push_back("lower=" + detail::join(box.lower));
        result.push_back("upper=" + detail::join(box.upper));
        result.push_back("swarm_size=" + std::to_string(opt.hyper.swarm_size));
        detail::write_report(ctx, dir / "report.txt", "synthesize", result);
      });
}

// ---------------------------------------------------------------------------

/// Every stage in order; synthesis runs only when a formula is configured.
inline void cmd_run_all(const Context& ctx) {
  cmd_simulate(ctx);
  cmd_extract(ctx);
  cmd_cluster_images(ctx);
  cmd_learn_predicates(ctx);
  cmd_signals(ctx);
  cmd_cluster_trajectories(ctx);
  cmd_learn_formula(ctx);
  if (ctx.config.has("synthesize", "formula")) {
    cmd_synthesize(ctx);
  } else {
    ctx.note("synthesize", "no synthesize.formula configured, skipping");
  }
}

} // namespace svmstl::pipeline
