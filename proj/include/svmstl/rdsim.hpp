#pragma once

#include "svmstl/core.hpp"
#include "svmstl/parallel.hpp"
#include "svmstl/random.hpp"

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace svmstl {

/// Local reaction terms. `turing` is the classic two-species form
///   x1' = D1(mu1 - x1) + R1 x1 x2 - x1 + R2,  x2' = D2(mu2 - x2) + R3 x1 x2 + R4
/// with the activator clamped at zero. `printed` couples through transposed
/// indices, x1' = ... + R1 x1_ij x2_ji - x1 + R2 and
/// x2' = D2(mu2 - x2) + R3 x1_ij x1_ji - x2 + R4; `printed_untransposed`
/// is the same without the transposes.
enum class RdModel { turing, printed, printed_untransposed };

enum class Boundary { truncated, periodic };

struct RdParams {
  double D1 = 3.9;
  double D2 = 30.0;
  double R1 = 1.0;
  double R2 = -12.0;
  double R3 = -1.0;
  double R4 = 16.0;
  double dt = 0.01;
  std::size_t steps_per_frame = 50;
  std::size_t frames = 60; // T: frames 0..T are recorded
  std::size_t grid = 32;
  std::uint64_t seed = 0;
  double init_range = 1.0;
  double render_lo = -10.0;
  double render_hi = 10.0;
  RdModel model = RdModel::turing;
  Boundary boundary = Boundary::truncated;
  bool quantize_frames = true;
  double blowup_limit = 1e6;

  void validate() const {
    if (!(dt >= 0.0) || !std::isfinite(dt)) {
      throw ConfigError("dt must be finite and non-negative");
    }
    if (!(D1 >= 0.0) || !(D2 >= 0.0) || !std::isfinite(D1) || !std::isfinite(D2)) {
      throw ConfigError("diffusion coefficients must be finite and non-negative");
    }
    if (grid < 2) {
      throw ConfigError("grid must be at least 2x2");
    }
    if (!(render_hi > render_lo)) {
      throw ConfigError("render range needs hi > lo");
    }
    if (steps_per_frame == 0) {
      throw ConfigError("steps_per_frame must be positive");
    }
  }
};

inline const char* model_name(RdModel m) {
  switch (m) {
    case RdModel::turing: return "turing";
    case RdModel::printed: return "printed";
    case RdModel::printed_untransposed: return "printed_untransposed";
  }
  return "?";
}

inline RdModel parse_model(const std::string& s) {
  if (s == "turing") {
    return RdModel::turing;
  }
  if (s == "printed") {
    return RdModel::printed;
  }
  if (s == "printed_untransposed") {
    return RdModel::printed_untransposed;
  }
  throw ConfigError("unknown reaction-diffusion model '" + s + "' (turing, printed, printed_untransposed)");
}

/// Two N x N concentration fields, row-major.
struct RdState {
  std::size_t n = 0;
  std::vector<double> x1;
  std::vector<double> x2;

  double& at1(std::size_t i, std::size_t j) { return x1[i * n + j]; }
  double& at2(std::size_t i, std::size_t j) { return x2[i * n + j]; }
  double at1(std::size_t i, std::size_t j) const { return x1[i * n + j]; }
  double at2(std::size_t i, std::size_t j) const { return x2[i * n + j]; }

  static RdState uniform(std::size_t n, double v1, double v2) {
    return {n, std::vector<double>(n * n, v1), std::vector<double>(n * n, v2)};
  }

  friend bool operator==(const RdState&, const RdState&) = default;
};

/// Mean of (x_nb - x_ij) over the 4-neighbourhood of (i, j), so that
/// D * neighbor_offset = D (mu - x_ij). Truncated boundaries average only the
/// neighbours inside the grid; periodic boundaries wrap around. Exactly zero
/// on a uniform field.
inline double neighbor_offset(const std::vector<double>& field, std::size_t n, std::size_t i, std::size_t j,
                              Boundary boundary = Boundary::truncated) {
  const double x = field[i * n + j];
  if (boundary == Boundary::periodic) {
    const std::size_t up = (i + n - 1) % n;
    const std::size_t down = (i + 1) % n;
    const std::size_t left = (j + n - 1) % n;
    const std::size_t right = (j + 1) % n;
    return ((field[up * n + j] - x) + (field[down * n + j] - x) + (field[i * n + left] - x) +
            (field[i * n + right] - x)) /
           4.0;
  }
  double sum = 0.0;
  int count = 0;
  if (i > 0) {
    sum += field[(i - 1) * n + j] - x;
    ++count;
  }
  if (i + 1 < n) {
    sum += field[(i + 1) * n + j] - x;
    ++count;
  }
  if (j > 0) {
    sum += field[i * n + j - 1] - x;
    ++count;
  }
  if (j + 1 < n) {
    sum += field[i * n + j + 1] - x;
    ++count;
  }
  return sum / count;
}

/// Mean of the 4-neighbourhood of (i, j).
inline double neighbor_mean(const std::vector<double>& field, std::size_t n, std::size_t i, std::size_t j,
                            Boundary boundary = Boundary::truncated) {
  return field[i * n + j] + neighbor_offset(field, n, i, j, boundary);
}

/// Right-hand side (dx1/dt, dx2/dt) at every cell.
inline std::pair<std::vector<double>, std::vector<double>> rd_rhs(const RdState& s, const RdParams& p) {
  const std::size_t n = s.n;
  std::vector<double> d1(n * n);
  std::vector<double> d2(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double x1 = s.at1(i, j);
      const double x2 = s.at2(i, j);
      const double diff1 = neighbor_offset(s.x1, n, i, j, p.boundary);
      const double diff2 = neighbor_offset(s.x2, n, i, j, p.boundary);
      double r1 = 0.0;
      double r2 = 0.0;
      switch (p.model) {
        case RdModel::turing:
          r1 = p.R1 * x1 * x2 - x1 + p.R2;
          r2 = p.R3 * x1 * x2 + p.R4;
          break;
        case RdModel::printed:
          r1 = p.R1 * x1 * s.at2(j, i) - x1 + p.R2;
          r2 = p.R3 * x1 * s.at1(j, i) - x2 + p.R4;
          break;
        case RdModel::printed_untransposed:
          r1 = p.R1 * x1 * x2 - x1 + p.R2;
          r2 = p.R3 * x1 * x1 - x2 + p.R4;
          break;
      }
      d1[i * n + j] = p.D1 * diff1 + r1;
      d2[i * n + j] = p.D2 * diff2 + r2;
    }
  }
  return {std::move(d1), std::move(d2)};
}

/// One forward-Euler step from the pre-step snapshot. `step_index` only
/// labels a blow-up diagnostic.
inline RdState rd_step(const RdState& s, const RdParams& p, std::size_t step_index = 0) {
  auto [d1, d2] = rd_rhs(s, p);
  RdState next = s;
  for (std::size_t c = 0; c < s.x1.size(); ++c) {
    next.x1[c] += p.dt * d1[c];
    next.x2[c] += p.dt * d2[c];
    if (p.model == RdModel::turing && next.x1[c] < 0.0) {
      next.x1[c] = 0.0;
    }
    if (!std::isfinite(next.x1[c]) || !std::isfinite(next.x2[c]) || std::abs(next.x1[c]) > p.blowup_limit ||
        std::abs(next.x2[c]) > p.blowup_limit) {
      throw BlowUpError("reaction-diffusion state blew up at step " + std::to_string(step_index) + " (D1=" +
                            text::format_double(p.D1) + ", D2=" + text::format_double(p.D2) + ")",
                        step_index);
    }
  }
  return next;
}

/// Real root in (0, 1) of x^3 - 15 x + 12 = 0 (the printed model's local
/// equilibrium with the default constants), refined by bisection.
inline double printed_fixed_point_x1(const RdParams& p = {}) {
  // Uniform equilibrium: x2 = R3 x1^2 + R4 and R1 x1 x2 - x1 + R2 = 0.
  const auto f = [&](double x) { return p.R1 * x * (p.R3 * x * x + p.R4) - x + p.R2; };
  double lo = 0.0;
  double hi = 1.0;
  if (f(lo) * f(hi) > 0) {
    throw ConfigError("no printed-model equilibrium in (0, 1) for these constants");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if ((f(lo) < 0) == (f(mid) < 0)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Spatially uniform equilibrium of the selected model.
inline std::pair<double, double> rd_fixed_point(const RdParams& p) {
  if (p.model == RdModel::turing) {
    // R3 x1 x2 + R4 = 0 and R1 x1 x2 - x1 + R2 = 0.
    const double prod = -p.R4 / p.R3;
    const double x1 = p.R1 * prod + p.R2;
    return {x1, prod / x1};
  }
  const double x1 = printed_fixed_point_x1(p);
  return {x1, p.R3 * x1 * x1 + p.R4};
}

inline RdState rd_initial_state(const RdParams& p) {
  const auto [f1, f2] = rd_fixed_point(p);
  RdState s = RdState::uniform(p.grid, f1, f2);
  Rng rng(p.seed);
  for (std::size_t c = 0; c < s.x1.size(); ++c) {
    s.x1[c] += rng.uniform(-p.init_range, p.init_range);
  }
  for (std::size_t c = 0; c < s.x2.size(); ++c) {
    s.x2[c] += rng.uniform(-p.init_range, p.init_range);
  }
  return s;
}

/// Single-channel image with intensity clamp((x1 - lo) / (hi - lo), 0, 1).
inline Image render_frame(const RdState& s, double lo = -10.0, double hi = 10.0) {
  std::vector<double> px(s.x1.size());
  for (std::size_t c = 0; c < px.size(); ++c) {
    px[c] = std::clamp((s.x1[c] - lo) / (hi - lo), 0.0, 1.0);
  }
  return Image(s.n, s.n, 1, std::move(px));
}

/// Integrates from `initial`, recording a frame at time 0 and then every
/// steps_per_frame steps until frame T. `final_state` receives the last state.
inline StTrajectory simulate_from(const RdState& initial, const RdParams& p, const std::string& id,
                                  RdState* final_state = nullptr) {
  p.validate();
  RdState s = initial;
  const auto render = [&](const RdState& st) {
    Image img = render_frame(st, p.render_lo, p.render_hi);
    return p.quantize_frames ? quantize_8bit(img) : img;
  };
  std::vector<Image> frames;
  frames.reserve(p.frames + 1);
  frames.push_back(render(s));
  std::size_t step = 0;
  for (std::size_t f = 1; f <= p.frames; ++f) {
    for (std::size_t k = 0; k < p.steps_per_frame; ++k) {
      s = rd_step(s, p, ++step);
    }
    frames.push_back(render(s));
  }
  if (final_state != nullptr) {
    *final_state = std::move(s);
  }
  return StTrajectory(id, std::move(frames));
}

inline StTrajectory simulate(const RdParams& p, const std::string& id = "rd", RdState* final_state = nullptr) {
  p.validate();
  return simulate_from(rd_initial_state(p), p, id, final_state);
}

// ---------------------------------------------------------------------------
// Parameter sweeps

enum class SeedPolicy { fixed, per_pair };

struct SweepEntry {
  double D1 = 0.0;
  double D2 = 0.0;
  std::uint64_t seed = 0;
  std::string status; // ok | blowup@<step>
  std::string path;
  bool computed = false; // false when an existing output was reused
};

inline std::string sweep_dir_name(double d1, double d2, std::size_t replicate = 0) {
  std::string name = "rd_D1_" + text::format_double(d1) + "_D2_" + text::format_double(d2);
  if (replicate > 0) {
    name += "_r" + std::to_string(replicate);
  }
  return name;
}

struct SweepPoint {
  double D1 = 0.0;
  double D2 = 0.0;
  std::size_t replicate = 0;
};

/// Simulates each (D1, D2) point into `out_dir/<name>` and writes
/// `out_dir/sweep.csv` (`D1,D2,seed,status,path`). Points whose trajectory
/// directory already holds a complete trajectory are not recomputed.
/// Blow-ups are recorded and the sweep continues.
inline std::vector<SweepEntry> sweep(const std::vector<SweepPoint>& points, const RdParams& base,
                                     const std::string& out_dir, SeedPolicy policy = SeedPolicy::per_pair,
                                     std::size_t jobs = 1) {
  if (points.empty()) {
    throw ConfigError("sweep grid is empty");
  }
  base.validate();
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::vector<SweepEntry> entries(points.size());
  parallel_for(points.size(), jobs, [&](std::size_t i) {
    RdParams p = base;
    p.D1 = points[i].D1;
    p.D2 = points[i].D2;
    p.seed = policy == SeedPolicy::fixed ? base.seed : derive_seed(base.seed, i);
    const std::string name = sweep_dir_name(p.D1, p.D2, points[i].replicate);
    const std::string dir = (fs::path(out_dir) / name).string();
    SweepEntry& e = entries[i];
    e.D1 = p.D1;
    e.D2 = p.D2;
    e.seed = p.seed;
    e.path = name;
    const auto manifest = fs::path(dir) / trajectory_manifest_name;
    if (fs::exists(manifest)) {
      try {
        const auto meta = read_metadata(manifest.string());
        const auto frames_it = meta.find("frames");
        const auto seed_it = meta.find("seed");
        if (frames_it != meta.end() && std::stoull(frames_it->second) == p.frames + 1 && seed_it != meta.end() &&
            seed_it->second == std::to_string(p.seed)) {
          e.status = "ok";
          return;
        }
      } catch (const std::exception&) {
        // fall through and recompute
      }
    }
    try {
      const StTrajectory traj = simulate(p, name);
      fs::remove_all(dir);
      save_trajectory(traj, dir,
                      {{"D1", text::format_double(p.D1)},
                       {"D2", text::format_double(p.D2)},
                       {"seed", std::to_string(p.seed)},
                       {"model", model_name(p.model)}});
      e.status = "ok";
      e.computed = true;
    } catch (const BlowUpError& err) {
      e.status = "blowup@" + std::to_string(err.step());
      e.computed = true;
    }
  });
  std::string csv = "D1,D2,seed,status,path\n";
  for (const auto& e : entries) {
    csv += text::format_double(e.D1) + "," + text::format_double(e.D2) + "," + std::to_string(e.seed) + "," +
           e.status + "," + e.path + "\n";
  }
  text::write_file((fs::path(out_dir) / "sweep.csv").string(), csv);
  return entries;
}

} // namespace svmstl
