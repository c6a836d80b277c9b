// Command-line front end: train, eval, baseline, histories, tree, list, keys.
//
// Exit codes: 0 success, 1 other failure, 2 configuration error, 3 numerical abort.

#include "qrl/registry.hpp"
#include "qrl/runner.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

using namespace qrl;

struct CommonArgs {
  double scale = 1.0;
  std::vector<std::int64_t> seeds;
  std::vector<std::string> sets;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--scale", a.scale, "desk-scale multiplier in (0, 1]");
  cmd->add_option("--seed", a.seeds, "seed (repeatable)");
  cmd->add_option("--set", a.sets, "override key=value (repeatable)");
  cmd->add_flag("--quiet", a.quiet, "suppress progress lines");
}

ExperimentConfig resolve(const std::string& what, const CommonArgs& a) {
  ExperimentConfig cfg;
  if (std::filesystem::exists(what)) {
    cfg = ExperimentConfig::load(what);
  } else {
    cfg = registry_lookup(what);
  }
  apply_scale(cfg, a.scale);
  cfg.apply_env_overrides();
  for (const auto& s : a.sets) cfg.set_assignment(s);
  if (!a.seeds.empty()) {
    std::string list;
    for (auto s : a.seeds) list += (list.empty() ? "" : ",") + std::to_string(s);
    cfg.set("seeds", list);
  }
  return cfg;
}

RunOptions options(const CommonArgs& a) {
  RunOptions o;
  if (!a.quiet) o.log = [](const std::string& s) { std::cerr << s << "\n"; };
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model-free reinforcement learning of oscillator control circuits"};
  app.require_subcommand(1);

  CommonArgs train_args, base_args;
  std::string train_target, base_method, base_target, ckpt;
  std::vector<std::string> eval_sets;
  std::string out_path;
  bool resume = false;

  auto* train = app.add_subcommand("train", "train a policy with PPO");
  train->add_option("experiment", train_target, "registry name or config file")->required();
  train->add_flag("--resume", resume, "continue from the latest checkpoints");
  add_common(train, train_args);

  auto* eval = app.add_subcommand("eval", "evaluate the deterministic policy of a checkpoint");
  eval->add_option("checkpoint", ckpt, "checkpoint file")->required();
  eval->add_option("--set", eval_sets, "override key=value (repeatable)");

  auto* base = app.add_subcommand("baseline", "run Nelder-Mead or simulated annealing");
  base->add_option("method", base_method, "nm | sa")->required()->check(CLI::IsMember({"nm", "sa"}));
  base->add_option("experiment", base_target, "registry name or config file")->required();
  add_common(base, base_args);

  auto* hist = app.add_subcommand("histories", "enumerate measurement histories of a checkpoint");
  hist->add_option("checkpoint", ckpt, "checkpoint file")->required();
  hist->add_option("--set", eval_sets, "override key=value (repeatable)");
  hist->add_option("--out", out_path, "CSV output (default: stdout)");

  auto* tree = app.add_subcommand("tree", "export the decision tree of a checkpoint as JSON");
  tree->add_option("checkpoint", ckpt, "checkpoint file")->required();
  tree->add_option("--set", eval_sets, "override key=value (repeatable)");

  auto* list = app.add_subcommand("list", "list registered experiments");
  auto* keys = app.add_subcommand("keys", "print the config schema");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*list) {
      for (const auto& n : experiment_names()) std::cout << n << "\n";
    } else if (*keys) {
      for (const auto& k : config_schema())
        std::cout << k.key << " = " << k.fallback << "    # " << k.doc << "\n";
    } else if (*train) {
      const ExperimentConfig cfg = resolve(train_target, train_args);
      RunOptions o = options(train_args);
      o.resume = resume;
      const RunArtifacts art = run_training(cfg, o);
      for (const auto& s : art.seeds)
        std::cout << "seed " << s.seed << ": final " << s.final_metric << " best " << s.best_metric << " ("
                  << s.epochs_run << " epochs, " << s.episodes << " episodes, " << s.wallclock_s << " s)\n";
      std::cout << "report: " << art.report_path << "\n";
    } else if (*base) {
      const ExperimentConfig cfg = resolve(base_target, base_args);
      const BaselineArtifacts art = run_baseline(cfg, base_method, options(base_args));
      for (const auto& r : art.runs)
        std::cout << base_method << " seed " << r.seed << " scale " << r.init_scale << ": F = " << r.final_fidelity
                  << " (" << r.episodes << " episodes)\n";
      std::cout << "trace: " << (std::filesystem::path(art.dir) / "trace.csv").string() << "\n";
    } else if (*eval) {
      const LoadedRun run = load_run(ckpt, eval_sets);
      const ExperimentSetup setup(run.config);
      const double metric = setup.evaluate(*extract_deterministic(*run.model));
      nlohmann::json j{{"checkpoint", ckpt}, {"epoch", run.checkpoint.epoch},
                       {"episodes", run.checkpoint.episodes}, {"eval_metric", metric}};
      std::cout << j.dump(2) << "\n";
    } else if (*hist) {
      const LoadedRun run = load_run(ckpt, eval_sets);
      const ExperimentSetup setup(run.config);
      const HistoryReport rep = report_histories(setup, *extract_deterministic(*run.model));
      if (out_path.empty()) {
        write_history_csv(std::cout, rep);
      } else {
        std::ofstream os(out_path);
        write_history_csv(os, rep);
      }
      std::cerr << "weighted " << rep.branches.weighted_metric << ", best branch " << rep.best_history << " "
                << rep.best_branch_metric << ", total probability " << rep.branches.total_probability << "\n";
    } else if (*tree) {
      const LoadedRun run = load_run(ckpt, eval_sets);
      const ExperimentSetup setup(run.config);
      std::cout << export_decision_tree(*extract_deterministic(*run.model), setup.env()).to_json() << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalAbort& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return 3;
  } catch (const std::domain_error& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
