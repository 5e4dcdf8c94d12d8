#pragma once

#include "svmstl/logic.hpp"
#include "svmstl/optim.hpp"
#include "svmstl/predicates.hpp"
#include "svmstl/rdsim.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace svmstl {

/// pi -> ST signal h(S_pi) for a given simulation seed. Throwing an
/// svmstl::Error marks the evaluation as a failed generation.
using SignalGenerator = std::function<StSignal(std::span<const double> pi, std::uint64_t seed)>;

struct SynthesisOptions {
  PsoHyper hyper{100, 0.6, 1.5, 2.5};
  StopCondition stop{20, std::nullopt, std::nullopt, 1e-6};
  std::uint64_t seed = 0;            // PSO stream
  std::uint64_t simulation_seed = 0; // generator seed under the fixed-seed policy
  /// Draw a fresh generator seed for every evaluation instead of the fixed
  /// seed. Caching is disabled in this mode and results are reproducible
  /// only with jobs = 1.
  bool reseed_per_evaluation = false;
  double cache_quantum = 1e-6;
  std::size_t jobs = 1;
};

struct SynthesisResult {
  std::vector<double> best;
  double robustness = -std::numeric_limits<double>::infinity();
  std::uint64_t witness_seed = 0;
  std::optional<StSignal> witness;
  std::size_t evaluations = 0; // objective calls made by the swarm
  std::size_t simulations = 0; // generator runs (cache misses)
  std::size_t failures = 0;    // generator runs that failed (scored -inf)
  std::vector<double> history; // best robustness after init and each iteration
  std::vector<std::string> failure_messages;
};

/// pi* = argmax_pi rho(phi, h(S_pi), 0) by particle swarm over `box`.
/// Under the fixed-seed policy results are cached by pi quantized to
/// `cache_quantum`, so revisited particles are not re-simulated.
inline SynthesisResult synthesize(const SignalGenerator& generator, const Box& box, const Formula& phi,
                                  const SynthesisOptions& opt) {
  box.validate();
  struct Entry {
    double rho;
    std::optional<StSignal> signal;
    std::uint64_t seed;
  };
  std::map<std::vector<long long>, Entry> cache;
  std::mutex mutex;
  std::atomic<std::uint64_t> counter{0};
  SynthesisResult result;

  const auto key_of = [&](std::span<const double> pi) {
    std::vector<long long> key(pi.size());
    for (std::size_t i = 0; i < pi.size(); ++i) {
      key[i] = std::llround(pi[i] / opt.cache_quantum);
    }
    return key;
  };

  const auto objective = [&](std::span<const double> pi) {
    const auto key = key_of(pi);
    std::uint64_t seed = opt.simulation_seed;
    if (opt.reseed_per_evaluation) {
      seed = derive_seed(opt.simulation_seed, counter++);
    } else {
      std::lock_guard lock(mutex);
      if (auto it = cache.find(key); it != cache.end()) {
        return it->second.rho;
      }
    }
    Entry entry{-std::numeric_limits<double>::infinity(), std::nullopt, seed};
    std::optional<std::string> failure;
    try {
      entry.signal = generator(pi, seed);
    } catch (const Error& e) {
      failure = e.what();
    }
    if (entry.signal) {
      entry.rho = robustness(*entry.signal, phi, 0);
    }
    std::lock_guard lock(mutex);
    ++result.simulations;
    if (failure) {
      ++result.failures;
      result.failure_messages.push_back(*failure);
    }
    if (!opt.reseed_per_evaluation) {
      cache.emplace(key, entry);
    } else if (!result.witness || entry.rho > result.robustness) {
      // Keep the best witness as it appears; under reseeding the swarm's
      // best is not reproducible from pi alone.
      result.robustness = entry.rho;
      result.witness = entry.signal;
      result.witness_seed = seed;
    }
    return entry.rho;
  };

  PsoOptions pso;
  pso.hyper = opt.hyper;
  pso.stop = opt.stop;
  pso.seed = opt.seed;
  pso.jobs = opt.jobs;
  const PsoResult r = pso_maximize(objective, box, pso);
  result.best = r.best_point;
  result.history = r.history;
  result.evaluations = r.evaluations;
  if (!opt.reseed_per_evaluation) {
    const Entry& e = cache.at(key_of(r.best_point));
    result.robustness = e.rho;
    result.witness = e.signal;
    result.witness_seed = e.seed;
  } else {
    result.robustness = r.best_value;
  }
  return result;
}

/// Names of RdParams fields a synthesis box may range over.
inline double& rd_parameter(RdParams& p, const std::string& name) {
  if (name == "D1") {
    return p.D1;
  }
  if (name == "D2") {
    return p.D2;
  }
  if (name == "R1") {
    return p.R1;
  }
  if (name == "R2") {
    return p.R2;
  }
  if (name == "R3") {
    return p.R3;
  }
  if (name == "R4") {
    return p.R4;
  }
  throw ConfigError("unknown synthesis parameter '" + name + "' (D1, D2, R1, R2, R3, R4)");
}

/// The reaction-diffusion system pushed through the predicate suite.
inline RdParams rd_params_at(const RdParams& base, const std::vector<std::string>& names, std::span<const double> pi,
                             std::uint64_t seed) {
  if (names.size() != pi.size()) {
    throw ConfigError("parameter vector does not match parameter names");
  }
  RdParams p = base;
  for (std::size_t i = 0; i < names.size(); ++i) {
    rd_parameter(p, names[i]) = pi[i];
  }
  p.seed = seed;
  return p;
}

inline SignalGenerator rd_signal_generator(RdParams base, std::vector<std::string> names, const PredicateSuite& suite,
                                           const Extractor& extractor) {
  return [base = std::move(base), names = std::move(names), &suite, &extractor](std::span<const double> pi,
                                                                                std::uint64_t seed) {
    const RdParams p = rd_params_at(base, names, pi, seed);
    return trajectory_to_signal(simulate(p, "synth"), suite, extractor);
  };
}

} // namespace svmstl
