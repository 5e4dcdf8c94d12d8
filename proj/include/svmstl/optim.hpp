#pragma once

#include "svmstl/error.hpp"
#include "svmstl/parallel.hpp"
#include "svmstl/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace svmstl {

/// Axis-aligned search box Pi; lower[i] <= upper[i] for every coordinate.
struct Box {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t dimension() const noexcept { return lower.size(); }

  void validate() const {
    if (lower.empty() || lower.size() != upper.size()) {
      throw ConfigError("search box needs matching, nonempty lower/upper bounds");
    }
    for (std::size_t i = 0; i < lower.size(); ++i) {
      if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || lower[i] > upper[i]) {
        throw ConfigError("invalid search bounds for coordinate " + std::to_string(i));
      }
    }
  }

  static Box uniform(std::size_t dim, double lo, double hi) {
    return Box{std::vector<double>(dim, lo), std::vector<double>(dim, hi)};
  }
};

struct PsoHyper {
  std::size_t swarm_size = 30; // K
  double inertia = 0.6;        // W
  double r_p = 1.5;
  double r_g = 2.5;
};

/// At least one criterion must be present. Stagnation stops when the best
/// value changed by less than `stagnation_tolerance` (relative to
/// max(1, |value|)) over the last `stagnation_window` iterations.
struct StopCondition {
  std::optional<std::size_t> max_iterations = 200;
  std::optional<double> target_value;
  std::optional<std::size_t> stagnation_window;
  double stagnation_tolerance = 1e-6;
};

/// Swarm snapshot handed to an observer after every iteration.
struct SwarmState {
  std::size_t iteration = 0;
  const std::vector<std::vector<double>>& positions;
  const std::vector<std::vector<double>>& velocities;
  const std::vector<double>& values;
  const std::vector<double>& best_point;
  double best_value;
};

struct PsoOptions {
  PsoHyper hyper;
  StopCondition stop;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  /// Optional starting positions for the first particles (clamped to the box);
  /// remaining particles start uniformly over the box.
  std::vector<std::vector<double>> initial_positions;
  std::function<void(const SwarmState&)> observer;
};

struct PsoResult {
  std::vector<double> best_point;
  double best_value = std::numeric_limits<double>::infinity();
  /// Global-best value after initialization (entry 0) and after each iteration.
  std::vector<double> history;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
};

using Objective = std::function<double(std::span<const double>)>;

namespace detail {

inline void validate_pso(const PsoOptions& opt) {
  if (opt.hyper.swarm_size == 0) {
    throw ConfigError("swarm size K must be at least 1");
  }
  if (!std::isfinite(opt.hyper.inertia) || !(opt.hyper.r_p >= 0.0) || !(opt.hyper.r_g >= 0.0) ||
      !std::isfinite(opt.hyper.r_p) || !std::isfinite(opt.hyper.r_g)) {
    throw ConfigError("PSO coefficients must be finite with r_p, r_g >= 0");
  }
  const auto& s = opt.stop;
  if (!s.max_iterations && !s.target_value && !s.stagnation_window) {
    throw ConfigError("stop condition never satisfiable: set max_iterations, a target value or a stagnation window");
  }
  if (s.stagnation_window && *s.stagnation_window == 0) {
    throw ConfigError("stagnation window must be positive");
  }
}

inline bool should_stop(const StopCondition& stop, const std::vector<double>& history, std::size_t iterations) {
  if (stop.max_iterations && iterations >= *stop.max_iterations) {
    return true;
  }
  if (stop.target_value && history.back() <= *stop.target_value) {
    return true;
  }
  if (stop.stagnation_window && history.size() > *stop.stagnation_window) {
    const double then = history[history.size() - 1 - *stop.stagnation_window];
    const double now = history.back();
    if (std::isfinite(then) && std::isfinite(now) &&
        std::abs(then - now) <= stop.stagnation_tolerance * std::max(1.0, std::abs(then))) {
      return true;
    }
  }
  return false;
}

} // namespace detail

/// Particle swarm minimization over a box. Per iteration: move every particle
/// (v <- W v + eta(0,r_p)(p_best - x) + eta(0,r_g)(g_best - x), x <- x + v,
/// clamped to the box with the offending velocity component zeroed), evaluate
/// all particles, then update personal and global bests. Evaluations may run
/// on several threads; the result only depends on the seed.
inline PsoResult pso_minimize(const Objective& objective, const Box& box, const PsoOptions& opt) {
  box.validate();
  detail::validate_pso(opt);
  const std::size_t dim = box.dimension();
  const std::size_t swarm = opt.hyper.swarm_size;
  Rng rng(opt.seed);

  std::vector<std::vector<double>> pos(swarm, std::vector<double>(dim));
  std::vector<std::vector<double>> vel(swarm, std::vector<double>(dim));
  for (std::size_t k = 0; k < swarm; ++k) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double width = box.upper[i] - box.lower[i];
      pos[k][i] = rng.uniform(box.lower[i], box.upper[i]);
      vel[k][i] = rng.uniform(-width / 10.0, width / 10.0);
    }
    if (k < opt.initial_positions.size()) {
      if (opt.initial_positions[k].size() != dim) {
        throw ConfigError("initial position has the wrong dimension");
      }
      for (std::size_t i = 0; i < dim; ++i) {
        pos[k][i] = std::clamp(opt.initial_positions[k][i], box.lower[i], box.upper[i]);
      }
    }
  }

  std::vector<double> values(swarm);
  auto evaluate_all = [&] {
    parallel_for(swarm, opt.jobs, [&](std::size_t k) {
      const double v = objective(std::span<const double>(pos[k]));
      values[k] = std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    });
  };

  PsoResult result;
  evaluate_all();
  result.evaluations = swarm;
  std::vector<std::vector<double>> personal = pos;
  std::vector<double> personal_value = values;
  std::size_t best_index = 0;
  for (std::size_t k = 1; k < swarm; ++k) {
    if (values[k] < values[best_index]) {
      best_index = k;
    }
  }
  result.best_point = pos[best_index];
  result.best_value = values[best_index];
  result.history.push_back(result.best_value);
  if (opt.observer) {
    opt.observer(SwarmState{0, pos, vel, values, result.best_point, result.best_value});
  }

  while (!detail::should_stop(opt.stop, result.history, result.iterations)) {
    for (std::size_t k = 0; k < swarm; ++k) {
      for (std::size_t i = 0; i < dim; ++i) {
        const double eta_p = rng.uniform(0.0, opt.hyper.r_p);
        const double eta_g = rng.uniform(0.0, opt.hyper.r_g);
        vel[k][i] = opt.hyper.inertia * vel[k][i] + eta_p * (personal[k][i] - pos[k][i]) +
                    eta_g * (result.best_point[i] - pos[k][i]);
        pos[k][i] += vel[k][i];
        if (pos[k][i] < box.lower[i]) {
          pos[k][i] = box.lower[i];
          vel[k][i] = 0.0;
        } else if (pos[k][i] > box.upper[i]) {
          pos[k][i] = box.upper[i];
          vel[k][i] = 0.0;
        }
      }
    }
    evaluate_all();
    result.evaluations += swarm;
    ++result.iterations;
    for (std::size_t k = 0; k < swarm; ++k) {
      if (values[k] < personal_value[k]) {
        personal_value[k] = values[k];
        personal[k] = pos[k];
      }
    }
    for (std::size_t k = 0; k < swarm; ++k) {
      if (personal_value[k] < result.best_value) {
        result.best_value = personal_value[k];
        result.best_point = personal[k];
      }
    }
    result.history.push_back(result.best_value);
    if (opt.observer) {
      opt.observer(SwarmState{result.iterations, pos, vel, values, result.best_point, result.best_value});
    }
  }
  return result;
}

/// Maximization as minimization of the negated objective. The returned
/// best_value and history are in the original (maximized) sense.
inline PsoResult pso_maximize(const Objective& objective, const Box& box, const PsoOptions& opt) {
  PsoOptions inner = opt;
  if (opt.stop.target_value) {
    inner.stop.target_value = -*opt.stop.target_value;
  }
  if (opt.observer) {
    inner.observer = [&](const SwarmState& s) {
      std::vector<double> negated(s.values.size());
      std::transform(s.values.begin(), s.values.end(), negated.begin(), [](double v) { return -v; });
      opt.observer(SwarmState{s.iteration, s.positions, s.velocities, negated, s.best_point, -s.best_value});
    };
  }
  PsoResult r = pso_minimize(
      [&](std::span<const double> x) {
        const double v = objective(x);
        return std::isfinite(v) ? -v : std::numeric_limits<double>::infinity();
      },
      box, inner);
  r.best_value = -r.best_value;
  for (double& h : r.history) {
    h = -h;
  }
  return r;
}

} // namespace svmstl
