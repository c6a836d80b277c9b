#include "qrl/runner.hpp"

#include "qrl/registry.hpp"

#include "json.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace qrl {

namespace fsys = std::filesystem;

namespace {

constexpr std::uint64_t kModelTag = 0x6d6f64656cULL;
constexpr std::uint64_t kInputTag = 0x696e707574ULL;
constexpr std::uint64_t kOracleTag = 0x6f7261636cULL;
constexpr std::uint64_t kStartTag = 0x7374617274ULL;

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

double to_real(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(what + ": '" + s + "' is not a number");
  }
}

TargetSpec parse_target(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.empty()) throw ConfigError("empty target");
  const std::string& kind = parts[0];
  auto arg = [&](std::size_t i) {
    if (parts.size() <= i) throw ConfigError("target '" + text + "' is missing arguments");
    return parts[i];
  };
  if (kind == "fock") return TargetSpec::fock(static_cast<int>(to_real(arg(1), "fock level")));
  if (kind == "coherent") return TargetSpec::coherent({to_real(arg(1), "target"), to_real(arg(2), "target")});
  if (kind == "cat") {
    const int sign = parts.size() > 2 ? static_cast<int>(to_real(parts[2], "cat parity")) : 1;
    if (sign != 1 && sign != -1) throw ConfigError("cat parity sign must be 1 or -1");
    return TargetSpec::cat({to_real(arg(1), "cat amplitude"), 0.0}, sign);
  }
  if (kind == "binomial") {
    std::vector<std::pair<int, cplx>> levels;
    for (const auto& item : split(arg(1), ';')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw ConfigError("binomial levels are n=c;n=c");
      levels.emplace_back(static_cast<int>(to_real(item.substr(0, eq), "level")),
                          cplx(to_real(item.substr(eq + 1), "coefficient"), 0.0));
    }
    return TargetSpec::binomial(std::move(levels));
  }
  if (kind == "gkp") return TargetSpec::gkp1d(to_real(arg(1), "gkp delta"));
  throw ConfigError("unknown target kind '" + kind + "'");
}

RewardPtr make_reward(const ExperimentConfig& cfg, const FockSpacePtr& fs, const StateVector& target,
                      const TargetSpec* spec) {
  const std::string r = cfg.str("reward");
  const int points = static_cast<int>(cfg.integer("reward_points"));
  const int M = static_cast<int>(cfg.integer("table_points"));
  const double L = cfg.real("table_extent") > 0.0 ? cfg.real("table_extent") : default_wigner_extent(target);
  if (r == "fock") {
    if (!spec || spec->kind != TargetKind::fock) throw ConfigError("reward=fock needs a fock:n target");
    return make_fock_reward(fs, spec->n);
  }
  if (r == "projector") return make_target_projector_reward(target);
  if (r == "wigner") return make_wigner_reward(fs, wigner_table(*fs, target, L, M), points);
  if (r == "char") return make_char_reward(fs, char_table(*fs, target, L, M), points);
  if (r == "gkp") {
    if (!spec || spec->kind != TargetKind::gkp1d) throw ConfigError("reward=gkp needs a gkp:delta target");
    return make_gkp_reward(fs, spec->delta);
  }
  if (r == "qubit") return make_qubit_excitation_reward(fs->dim());
  throw ConfigError("unknown reward '" + r + "'");
}

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void log_line(const RunOptions& opt, const std::string& s) {
  if (opt.log) opt.log(s);
}

std::string fmt(double v, int prec = 6) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

}  // namespace

Eigen::Matrix2cd logical_gate(const std::string& name) {
  const double r = 1.0 / std::sqrt(2.0);
  Eigen::Matrix2cd H;
  H << r, r, r, -r;
  if (name == "H") return H;
  if (name == "X") {
    Eigen::Matrix2cd X;
    X << 0, 1, 1, 0;
    return X;
  }
  if (name == "sqrtH") {
    // H has eigenvalues +-1; principal root maps them to 1 and i.
    const cplx a(0.5, 0.5), b(0.5, -0.5);
    return a * Eigen::Matrix2cd::Identity() + b * H;
  }
  throw ConfigError("unknown gate '" + name + "' (H, X, sqrtH)");
}

// ---- setup ----

ExperimentSetup::ExperimentSetup(const ExperimentConfig& cfg) : cfg_(cfg) {
  const std::string task = cfg.str("task");
  const int N = static_cast<int>(cfg.integer("N"));
  if (N < 2) throw ConfigError("N must be >= 2");
  base_.fs = build_fock_space(N);
  base_.T = static_cast<int>(cfg.integer("T"));
  base_.phi = static_cast<int>(cfg.integer("phi"));
  try {
    base_.kind = circuit_kind_from_string(cfg.str("circuit"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  base_.chi_tau = cfg.real("chi_tau");
  base_.alpha_scale = cfg.real("alpha_scale");
  base_.leak_max = cfg.real("leak_max");
  base_.abort_on_leak = cfg.boolean("abort_on_leak");
  base_.threads = static_cast<int>(cfg.integer("threads"));
  base_.initial = basis_state(N, 0);

  if (task == "state") {
    const TargetSpec spec = parse_target(cfg.str("target"));
    base_.target = make_target(spec, *base_.fs, base_.leak_max);
    base_.reward = make_reward(cfg, base_.fs, base_.target, &spec);
    if (cfg.str("reward") == "gkp") {
      const RewardPtr reward = base_.reward;
      base_.branch_metric = [reward](const StateVector& joint) { return reward->expected(joint); };
    }
  } else if (task == "gate") {
    const std::string enc = cfg.str("encoding");
    CodeWords code;
    if (enc == "fock") {
      code = fock_code(N);
    } else if (enc == "gkp") {
      double leak = 0.0;
      code = gkp_code(N, cfg.real("code_delta"), &leak);
      if (leak > base_.leak_max) throw ConfigError("GKP code words leak " + fmt(leak) + " at N=" + std::to_string(N));
    } else {
      throw ConfigError("unknown encoding '" + enc + "'");
    }
    gate_inputs_ = cardinal_states(code);
    gate_targets_ = rotated_cardinals(code, logical_gate(cfg.str("gate")));
    for (const auto& t : gate_targets_) gate_rewards_.push_back(make_reward(cfg, base_.fs, t, nullptr));
    base_.initial = gate_inputs_[0];
    base_.target = gate_targets_[0];
    base_.reward = gate_rewards_[0];
  } else if (task == "qubit_flip") {
    if (base_.kind != CircuitKind::qubit_flip) throw ConfigError("task=qubit_flip needs circuit=qubit_flip");
    base_.target = basis_state(N, 0);
    base_.reward = make_qubit_excitation_reward(N);
    base_.branch_metric = [N](const StateVector& joint) { return 1.0 - prob_ground(joint, N); };
  } else {
    throw ConfigError("unknown task '" + task + "'");
  }
  try {
    base_.validate();
    ppo().validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

EnvConfig ExperimentSetup::env(int input) const {
  if (!is_gate()) return base_;
  EnvConfig e = base_;
  e.initial = gate_inputs_.at(input);
  e.target = gate_targets_.at(input);
  e.reward = gate_rewards_.at(input);
  return e;
}

int ExperimentSetup::epoch_input(std::uint64_t seed, int epoch) const {
  if (!is_gate()) return 0;
  Rng rng(derive_seed(seed, kInputTag, static_cast<std::uint64_t>(epoch)));
  return static_cast<int>(rng.index(gate_inputs_.size()));
}

double ExperimentSetup::evaluate(const Policy& policy) const {
  if (!is_gate()) return evaluate_policy(policy, base_);
  std::vector<std::vector<Branch>> outputs;
  for (int i = 0; i < num_inputs(); ++i) {
    const BranchReport rep = enumerate_branches(policy, env(i));
    std::vector<Branch> bs;
    for (const auto& b : rep.branches) bs.push_back({b.probability, b.final_state});
    outputs.push_back(std::move(bs));
  }
  return avg_gate_fidelity(outputs, gate_targets_);
}

std::unique_ptr<TrainableModel> ExperimentSetup::make_model(std::uint64_t seed) const {
  const int A = base_.action_dim();
  const int in = base_.input_dim();
  const double init_std = cfg_.real("init_std");
  if (!(init_std > 0.0)) throw ConfigError("init_std must be positive");
  const std::string kind = cfg_.str("policy");
  if (kind == "constant") {
    return std::make_unique<ConstantGaussianModel>(in, std::vector<double>(A, cfg_.real("init_mean")),
                                                   std::vector<double>(A, std::log(init_std)));
  }
  if (kind != "recurrent") throw ConfigError("unknown policy '" + kind + "'");
  PolicyArch arch;
  arch.input_dim = in;
  arch.action_dim = A;
  arch.lstm_units = static_cast<int>(cfg_.integer("lstm"));
  for (auto w : cfg_.int_list("dense")) arch.dense.push_back(static_cast<int>(w));
  arch.init_std = init_std;
  PolicyParams params(arch, derive_seed(seed, kModelTag));
  const std::string warm = cfg_.str("init_weights");
  if (!warm.empty()) {
    // Warm start: only the weights are taken over; optimiser state and counters start fresh.
    const Checkpoint ck = read_checkpoint(warm);
    if (ck.model_kind != "recurrent" || ck.input_dim != in || ck.action_dim != A || ck.lstm_units != arch.lstm_units ||
        ck.dense != arch.dense || ck.theta.size() != params.theta.size()) {
      throw ConfigError("init_weights: architecture of " + warm + " does not match the configuration");
    }
    params.theta = ck.theta;
  }
  return std::make_unique<RecurrentGaussianModel>(std::move(params));
}

PpoConfig ExperimentSetup::ppo() const {
  PpoConfig p;
  p.clip = cfg_.real("clip");
  p.value_weight = cfg_.real("value_weight");
  p.opt_passes = static_cast<int>(cfg_.integer("opt_passes"));
  p.lr.points = cfg_.schedule("lr");
  p.B = static_cast<int>(cfg_.integer("B"));
  p.epochs = static_cast<int>(cfg_.integer("epochs"));
  p.gamma = cfg_.real("gamma");
  p.entropy_coef = cfg_.real("entropy_coef");
  p.normalize_advantages = cfg_.boolean("normalize_advantages");
  p.grad_clip = cfg_.real("grad_clip");
  return p;
}

// ---- metrics ----

void write_metrics_header(std::ostream& os, bool with_method) {
  if (with_method) os << "method,";
  os << "epoch,episodes_cumulative,mean_return,entropy,eval_metric,wallclock_s\n";
}

void write_metrics_row(std::ostream& os, const MetricsRow& r, const std::string& method) {
  if (!method.empty()) os << method << ",";
  os << r.epoch << "," << r.episodes_cumulative << "," << std::setprecision(10) << r.mean_return << ","
     << r.entropy << ",";
  if (r.evaluated) os << r.eval_metric;
  os << "," << std::setprecision(6) << r.wallclock_s << "\n";
}

// ---- training ----

SeedResult train_seed(const ExperimentSetup& setup, std::uint64_t seed, const RunOptions& opt) {
  const ExperimentConfig& cfg = setup.config();
  const int epochs = static_cast<int>(cfg.integer("epochs"));
  const int eval_every = std::max<int>(1, static_cast<int>(cfg.integer("eval_interval")));
  const int ckpt_every =
      cfg.integer("checkpoint_interval") > 0 ? static_cast<int>(cfg.integer("checkpoint_interval")) : eval_every;
  const double stop_at = cfg.real("stop_at_metric");

  SeedResult res;
  res.seed = seed;
  res.dir = (fsys::path(cfg.str("output_dir")) / cfg.str("name") / ("seed" + std::to_string(seed))).string();
  PpoTrainer trainer(setup.make_model(seed), setup.ppo(), seed);

  const std::string ckpt_path = (fsys::path(res.dir) / "checkpoint.bin").string();
  const std::string best_path = (fsys::path(res.dir) / "best.bin").string();
  const std::string csv_path = (fsys::path(res.dir) / "metrics.csv").string();
  std::ofstream csv;
  if (opt.write_files) {
    fsys::create_directories(res.dir);
    if (opt.resume && fsys::exists(ckpt_path)) {
      const Checkpoint ck = read_checkpoint(ckpt_path);
      trainer.restore(ck.theta, ck.adam, ck.epoch, ck.episodes);
      res.best_metric = ck.best_metric;
      // Keep only rows from epochs already covered by the checkpoint.
      std::ifstream in(csv_path);
      std::string line, kept;
      if (std::getline(in, line)) kept = line + "\n";
      while (std::getline(in, line)) {
        const auto comma = line.find(',');
        if (comma != std::string::npos && std::stoi(line.substr(0, comma)) < ck.epoch) kept += line + "\n";
      }
      in.close();
      csv.open(csv_path, std::ios::trunc);
      csv << kept;
      log_line(opt, "seed " + std::to_string(seed) + ": resumed at epoch " + std::to_string(ck.epoch));
    } else {
      csv.open(csv_path, std::ios::trunc);
      write_metrics_header(csv, false);
    }
    std::ofstream(fsys::path(res.dir) / "config.txt") << cfg.canonical();
  }

  auto save = [&](const std::string& path) {
    if (!opt.write_files) return;
    write_checkpoint(path, make_checkpoint(trainer.model(), trainer.adam(), trainer.epoch(), trainer.episodes(), seed,
                                           res.best_metric, cfg.canonical()));
  };

  const auto t0 = std::chrono::steady_clock::now();
  bool evaluated_last = false;
  while (trainer.epoch() < epochs) {
    const int e = trainer.epoch();
    const EnvConfig env = setup.env(setup.epoch_input(seed, e));
    EpochMetrics m;
    try {
      m = trainer.train_epoch(env);
    } catch (const std::domain_error& err) {
      save((fsys::path(res.dir) / "abort.bin").string());
      throw NumericalAbort(std::string("seed ") + std::to_string(seed) + ": " + err.what());
    }
    MetricsRow row;
    row.epoch = e;
    row.episodes_cumulative = m.episodes_cumulative;
    row.mean_return = m.mean_return;
    row.entropy = m.entropy;
    evaluated_last = (e + 1) % eval_every == 0 || e + 1 == epochs;
    if (evaluated_last) {
      row.evaluated = true;
      row.eval_metric = setup.evaluate(*extract_deterministic(trainer.model()));
      res.final_metric = row.eval_metric;
      if (res.best_epoch < 0 || row.eval_metric > res.best_metric) {
        res.best_metric = row.eval_metric;
        res.best_epoch = e;
        save(best_path);
      }
      log_line(opt, "seed " + std::to_string(seed) + " epoch " + std::to_string(e) + " return " +
                        fmt(m.mean_return, 4) + " eval " + fmt(row.eval_metric, 6));
    }
    row.wallclock_s = elapsed(t0);
    if (csv.is_open()) {
      write_metrics_row(csv, row);
      csv.flush();
    }
    if (opt.on_epoch) opt.on_epoch(seed, row);
    if ((e + 1) % ckpt_every == 0) save(ckpt_path);
    if (stop_at > 0.0 && row.evaluated && row.eval_metric >= stop_at) {
      res.stopped_early = true;
      break;
    }
  }
  if (!evaluated_last && trainer.epoch() > 0) {
    res.final_metric = setup.evaluate(*extract_deterministic(trainer.model()));
    if (res.final_metric > res.best_metric) res.best_metric = res.final_metric;
  }
  save(ckpt_path);
  res.epochs_run = trainer.epoch();
  res.episodes = trainer.episodes();
  res.wallclock_s = elapsed(t0);
  return res;
}

RunArtifacts run_training(const ExperimentConfig& cfg, const RunOptions& opt) {
  const ExperimentSetup setup(cfg);
  RunArtifacts art;
  art.dir = (fsys::path(cfg.str("output_dir")) / cfg.str("name")).string();
  for (auto s : cfg.int_list("seeds")) {
    art.seeds.push_back(train_seed(setup, static_cast<std::uint64_t>(s), opt));
    if (art.best < 0 || art.seeds.back().final_metric > art.seeds[art.best].final_metric)
      art.best = static_cast<int>(art.seeds.size()) - 1;
  }
  if (opt.write_files) {
    nlohmann::json j;
    j["experiment"] = cfg.str("name");
    j["seeds"] = nlohmann::json::array();
    std::int64_t episodes = 0;
    double wall = 0.0;
    for (const auto& s : art.seeds) {
      j["seeds"].push_back({{"seed", s.seed},
                            {"final_metric", s.final_metric},
                            {"best_metric", s.best_metric},
                            {"best_epoch", s.best_epoch},
                            {"epochs", s.epochs_run},
                            {"episodes", s.episodes},
                            {"wallclock_s", s.wallclock_s},
                            {"stopped_early", s.stopped_early}});
      episodes += s.episodes;
      wall += s.wallclock_s;
    }
    j["best_seed"] = art.best >= 0 ? nlohmann::json(art.seeds[art.best].seed) : nlohmann::json(nullptr);
    j["episodes_total"] = episodes;
    j["wallclock_s"] = wall;
    j["config"] = cfg.canonical();
    fsys::create_directories(art.dir);
    art.report_path = (fsys::path(art.dir) / "report.json").string();
    std::ofstream(art.report_path) << j.dump(2) << "\n";
  }
  return art;
}

// ---- baselines ----

BaselineArtifacts run_baseline(const ExperimentConfig& cfg, const std::string& method, const RunOptions& opt) {
  if (method != "nm" && method != "sa") throw ConfigError("baseline method must be nm or sa");
  const ExperimentSetup setup(cfg);
  if (setup.is_gate() || cfg.str("task") != "state") throw ConfigError("baselines run on state tasks");
  const std::string mode_s = cfg.str("oracle");
  if (mode_s != "exact" && mode_s != "averaged") throw ConfigError("oracle must be exact or averaged");
  const OracleMode mode = mode_s == "exact" ? OracleMode::exact_infidelity : OracleMode::averaged_reward;
  const int shots = static_cast<int>(cfg.integer("shots"));
  const std::int64_t budget = cfg.integer("budget_episodes");
  const std::int64_t eval_every = std::max<std::int64_t>(1, cfg.integer("baseline_eval_interval"));

  BaselineArtifacts art;
  art.method = method;
  art.dir = (fsys::path(cfg.str("output_dir")) / cfg.str("name") / method).string();
  std::ofstream csv;
  if (opt.write_files) {
    fsys::create_directories(art.dir);
    csv.open(fsys::path(art.dir) / "trace.csv");
    csv << "seed,init_scale,";
    write_metrics_header(csv, true);
    std::ofstream(fsys::path(art.dir) / "config.txt") << cfg.canonical();
  }
  for (auto s : cfg.int_list("seeds")) {
    for (double scale : cfg.real_list("init_scale")) {
      const auto seed = static_cast<std::uint64_t>(s);
      CostOracle oracle(setup.env(), mode, shots, derive_seed(seed, kOracleTag));
      const std::int64_t max_evals = std::max<std::int64_t>(1, budget / oracle.episodes_per_eval());
      Rng rng(derive_seed(seed, kStartTag));
      std::vector<double> x0(oracle.dim());
      for (double& x : x0) x = scale * rng.normal();

      const auto t0 = std::chrono::steady_clock::now();
      TraceHook hook = [&](const TraceRow& r, const std::vector<double>& best) {
        MetricsRow row;
        row.epoch = static_cast<int>(r.evaluation);
        row.episodes_cumulative = r.evaluation * oracle.episodes_per_eval();
        row.mean_return = -r.cost;
        if (r.evaluation % eval_every == 0 || r.evaluation == max_evals) {
          row.evaluated = true;
          row.eval_metric = oracle.fidelity(best);
        }
        row.wallclock_s = elapsed(t0);
        if (csv.is_open()) {
          csv << seed << "," << scale << ",";
          write_metrics_row(csv, row, method);
        }
      };
      const Objective f = [&](const std::vector<double>& x) { return oracle(x); };
      BaselineRun run;
      run.seed = seed;
      run.init_scale = scale;
      if (method == "nm") {
        NelderMeadOptions o;
        o.initial_step = cfg.real("nm_step");
        o.max_evals = max_evals;
        run.result = nelder_mead(f, x0, o, hook);
      } else {
        AnnealingOptions o;
        o.visit = cfg.real("sa_visit");
        o.accept = cfg.real("sa_accept");
        o.initial_temp = cfg.real("sa_initial_temp");
        o.restart_temp_ratio = cfg.real("sa_restart_ratio");
        o.lower = -cfg.real("sa_bound");
        o.upper = cfg.real("sa_bound");
        o.max_evals = max_evals;
        o.seed = derive_seed(seed, kStartTag, 1);
        run.result = simulated_annealing(f, x0, o, hook);
      }
      for (auto& r : run.result.trace) r.episodes = r.evaluation * oracle.episodes_per_eval();
      run.final_fidelity = oracle.fidelity(run.result.best_x);
      run.episodes = oracle.episodes();
      run.wallclock_s = elapsed(t0);
      log_line(opt, method + " seed " + std::to_string(seed) + " scale " + fmt(scale) + ": F = " +
                        fmt(run.final_fidelity) + " after " + std::to_string(run.episodes) + " episodes");
      art.runs.push_back(std::move(run));
      if (art.best < 0 || art.runs.back().final_fidelity > art.runs[art.best].final_fidelity)
        art.best = static_cast<int>(art.runs.size()) - 1;
    }
  }
  if (opt.write_files) {
    nlohmann::json j;
    j["experiment"] = cfg.str("name");
    j["method"] = method;
    j["oracle"] = mode_s;
    j["runs"] = nlohmann::json::array();
    for (const auto& r : art.runs)
      j["runs"].push_back({{"seed", r.seed},
                           {"init_scale", r.init_scale},
                           {"final_fidelity", r.final_fidelity},
                           {"evaluations", r.result.evaluations},
                           {"episodes", r.episodes},
                           {"wallclock_s", r.wallclock_s}});
    j["best_run"] = art.best;
    std::ofstream(fsys::path(art.dir) / "report.json") << j.dump(2) << "\n";
  }
  return art;
}

// ---- histories ----

HistoryReport report_histories(const ExperimentSetup& setup, const Policy& policy) {
  if (setup.is_gate() || setup.config().str("task") != "state")
    throw ConfigError("histories: only state-preparation experiments have a single history tree");
  HistoryReport rep;
  rep.branches = enumerate_branches(policy, setup.env());
  for (const auto& b : rep.branches.branches) {
    if (rep.best_history.empty() || b.metric > rep.best_branch_metric) {
      rep.best_branch_metric = b.metric;
      rep.best_history = b.bits;
    }
  }
  return rep;
}

void write_history_csv(std::ostream& os, const HistoryReport& report) {
  os << "history,probability,fidelity,cumulative_probability,cumulative_fidelity\n";
  double cp = 0.0, cw = 0.0;
  os << std::setprecision(12);
  for (const auto& b : report.branches.branches) {
    cp += b.probability;
    cw += b.probability * b.metric;
    os << b.bits << "," << b.probability << "," << b.metric << "," << cp << "," << (cp > 0 ? cw / cp : 0.0) << "\n";
  }
}

LoadedRun load_run(const std::string& checkpoint_path, const std::vector<std::string>& overrides) {
  LoadedRun run;
  run.checkpoint = read_checkpoint(checkpoint_path);
  run.config = ExperimentConfig::parse(run.checkpoint.config);
  for (const auto& o : overrides) run.config.set_assignment(o);
  run.model = model_from_checkpoint(run.checkpoint);
  return run;
}

}  // namespace qrl
