#include "svmstl/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

namespace {

struct GlobalFlags {
  std::string config;
  std::optional<long long> seed;
  std::string out;
  std::optional<std::size_t> jobs;
  std::vector<std::string> sets;
  bool force = false;
};

void add_global_flags(CLI::App& cmd, GlobalFlags& g) {
  cmd.add_option("--config", g.config, "pipeline config file (INI)");
  cmd.add_option("--seed", g.seed, "global seed (overrides run.seed)");
  cmd.add_option("--out", g.out, "output directory (overrides paths.out)");
  cmd.add_option("--jobs", g.jobs, "worker threads (overrides run.jobs)");
  cmd.add_option("--set", g.sets, "override a config key: section.key=value")->take_all();
  cmd.add_flag("--force", g.force, "recompute even when inputs are unchanged");
}

svmstl::pipeline::Context build_context(const GlobalFlags& g) {
  using svmstl::Config;
  Config config = g.config.empty() ? Config::parse("", svmstl::pipeline::schema())
                                   : Config::load(g.config, svmstl::pipeline::schema());
  for (const auto& s : g.sets) {
    config.set(s);
  }
  if (g.seed) {
    config.set("run", "seed", std::to_string(*g.seed));
  }
  if (g.jobs) {
    config.set("run", "jobs", std::to_string(*g.jobs));
  }
  if (!g.out.empty()) {
    config.set("paths", "out", g.out);
  }
  return svmstl::pipeline::make_context(std::move(config), g.force, &std::cerr);
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn, monitor and synthesize spatio-temporal logic specifications from image sequences"};
  app.require_subcommand(1);
  GlobalFlags g;

  using Stage = svmstl::pipeline::StageOutcome (*)(const svmstl::pipeline::Context&);
  const std::vector<std::tuple<std::string, std::string, Stage>> stages = {
      {"simulate", "simulate the reaction-diffusion sweep into the corpus", svmstl::pipeline::cmd_simulate},
      {"extract", "compute or ingest per-frame feature tables", svmstl::pipeline::cmd_extract},
      {"cluster-images", "cluster frame features into image classes", svmstl::pipeline::cmd_cluster_images},
      {"learn-predicates", "train one SVM predicate per image class", svmstl::pipeline::cmd_learn_predicates},
      {"signals", "map every trajectory to its predicate signal", svmstl::pipeline::cmd_signals},
      {"cluster-trajectories", "cluster predicate signals into trajectory classes",
       svmstl::pipeline::cmd_cluster_trajectories},
      {"learn-formula", "learn boosted STL trees per trajectory class", svmstl::pipeline::cmd_learn_formula},
      {"synthesize", "search simulation parameters that maximize robustness", svmstl::pipeline::cmd_synthesize},
  };
  std::vector<std::pair<CLI::App*, Stage>> stage_cmds;
  for (const auto& [name, help, fn] : stages) {
    CLI::App* cmd = app.add_subcommand(name, help);
    add_global_flags(*cmd, g);
    stage_cmds.emplace_back(cmd, fn);
  }
  CLI::App* run_all = app.add_subcommand("run-all", "run every stage in order");
  add_global_flags(*run_all, g);

  CLI::App* monitor = app.add_subcommand("monitor", "check a formula on a stored signal");
  std::string formula;
  std::string formula_file;
  std::string signal_path;
  std::size_t time = 0;
  auto* formula_opt = monitor->add_option("--formula", formula, "formula text");
  monitor->add_option("--formula-file", formula_file, "file holding the formula (first non-comment line)")
      ->excludes(formula_opt);
  monitor->add_option("--signal", signal_path, "signal CSV")->required();
  monitor->add_option("--time", time, "evaluation time k");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (monitor->parsed()) {
      if (formula.empty() && formula_file.empty()) {
        throw svmstl::ConfigError("monitor needs --formula or --formula-file");
      }
      const std::string text =
          formula_file.empty() ? formula : svmstl::pipeline::formula_text(svmstl::text::read_file(formula_file));
      const auto r = svmstl::pipeline::cmd_monitor(text, signal_path, time);
      std::cout << "satisfied=" << (r.satisfied ? "true" : "false") << "\n";
      std::cout << "robustness=" << svmstl::text::format_double(r.robustness) << "\n";
      return 0;
    }
    const auto ctx = build_context(g);
    if (run_all->parsed()) {
      svmstl::pipeline::cmd_run_all(ctx);
      return 0;
    }
    for (const auto& [cmd, fn] : stage_cmds) {
      if (cmd->parsed()) {
        fn(ctx);
      }
    }
    return 0;
  } catch (const svmstl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}
