#include "qrl/ppo.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace qrl {

void PpoConfig::validate() const {
  if (!(clip > 0.0)) throw std::invalid_argument("ppo: clip must be > 0");
  if (!(value_weight > 0.0)) throw std::invalid_argument("ppo: value_weight must be > 0");
  if (opt_passes < 1) throw std::invalid_argument("ppo: opt_passes must be >= 1");
  if (B < 1) throw std::invalid_argument("ppo: B must be >= 1");
  if (epochs < 0) throw std::invalid_argument("ppo: epochs must be >= 0");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("ppo: gamma must be in (0, 1]");
  if (entropy_coef < 0.0) throw std::invalid_argument("ppo: entropy_coef must be >= 0");
  if (lr.points.empty()) throw std::invalid_argument("ppo: empty learning-rate schedule");
  for (const auto& [e, v] : lr.points)
    if (!(v > 0.0)) throw std::invalid_argument("ppo: learning rates must be positive");
}

std::size_t TrainBatch::num_steps() const {
  std::size_t n = 0;
  for (const auto& ep : batch.episodes) n += ep.steps.size();
  return n;
}

TrainBatch compute_advantages(Batch batch, double gamma, bool normalize) {
  TrainBatch tb;
  tb.batch = std::move(batch);
  const std::size_t B = tb.batch.episodes.size();
  tb.returns.resize(B);
  tb.advantages.resize(B);
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < B; ++i) {
    const auto& ep = tb.batch.episodes[i];
    const int T = static_cast<int>(ep.steps.size());
    tb.returns[i].resize(T);
    tb.advantages[i].resize(T);
    double g = ep.reward;
    for (int t = T - 1; t >= 0; --t) {
      tb.returns[i][t] = g;
      tb.advantages[i][t] = g - ep.steps[t].value;
      sum += tb.advantages[i][t];
      sq += tb.advantages[i][t] * tb.advantages[i][t];
      ++n;
      g *= gamma;
    }
  }
  if (normalize && n > 1) {
    const double mean = sum / n;
    const double sd = std::sqrt(std::max(sq / n - mean * mean, 0.0));
    for (auto& row : tb.advantages)
      for (double& a : row) a = (a - mean) / (sd + 1e-8);
  }
  return tb;
}

LossTerms ppo_loss(const TrainBatch& tb, const TrainableModel& model, const PpoConfig& cfg, std::vector<double>* grad) {
  const auto& tree = tb.batch.tree;
  const auto ev = model.evaluate_tree(tree.parent, tree.input);
  const std::size_t n_steps = tb.num_steps();
  if (n_steps == 0) throw std::invalid_argument("ppo_loss: empty batch");
  const double inv = 1.0 / static_cast<double>(n_steps);
  const int A = model.action_dim();
  const double h0 = 0.5 * (1.0 + std::log(2.0 * kPi));

  std::vector<std::vector<double>> d_mean, d_log_std;
  std::vector<double> d_value;
  if (grad) {
    d_mean.resize(tree.size());
    d_log_std.resize(tree.size());
    d_value.assign(tree.size(), 0.0);
  }
  LossTerms out;
  std::size_t clipped = 0;
  std::vector<double> gm, gs;
  for (std::size_t i = 0; i < tb.batch.episodes.size(); ++i) {
    const auto& ep = tb.batch.episodes[i];
    for (std::size_t t = 0; t < ep.steps.size(); ++t) {
      const StepRecord& s = ep.steps[t];
      const int k = s.node;
      const auto& mu = ev->mean[k];
      const auto& ls = ev->log_std[k];
      const double lp = gaussian_log_prob(mu, ls, s.raw);
      const double rho = std::exp(lp - s.log_prob);
      const double adv = tb.advantages[i][t];
      const double ret = tb.returns[i][t];
      const double surr1 = rho * adv;
      const double surr2 = std::clamp(rho, 1.0 - cfg.clip, 1.0 + cfg.clip) * adv;
      const bool unclipped = surr1 <= surr2;
      const double v = ev->value[k];
      double ent = 0.0;
      for (int d = 0; d < A; ++d) ent += ls[d] + h0;
      out.policy += -std::min(surr1, surr2) * inv;
      out.value += (ret - v) * (ret - v) * inv;
      out.entropy += ent * inv;
      out.approx_kl += (s.log_prob - lp) * inv;
      if (std::abs(rho - 1.0) > cfg.clip) ++clipped;

      if (!grad) continue;
      // d(-min)/d(log pi) is -rho A on the unclipped branch and 0 on the saturated one.
      const double g_lp = unclipped ? -rho * adv * inv : 0.0;
      auto& dm = d_mean[k];
      auto& ds = d_log_std[k];
      if (dm.empty()) {
        dm.assign(A, 0.0);
        ds.assign(A, 0.0);
      }
      if (g_lp != 0.0) {
        log_prob_grad(mu, ls, s.raw, gm, gs);
        for (int d = 0; d < A; ++d) {
          dm[d] += g_lp * gm[d];
          ds[d] += g_lp * gs[d];
        }
      }
      for (int d = 0; d < A; ++d) ds[d] -= cfg.entropy_coef * inv;
      d_value[k] += -2.0 * cfg.value_weight * (ret - v) * inv;
    }
  }
  out.clip_fraction = static_cast<double>(clipped) * inv;
  out.loss = out.policy + cfg.value_weight * out.value - cfg.entropy_coef * out.entropy;
  if (grad) {
    grad->assign(model.theta().size(), 0.0);
    ev->backward(d_mean, d_log_std, d_value, *grad);
  }
  return out;
}

std::uint64_t epoch_seed(std::uint64_t seed, int epoch) {
  return derive_seed(seed, 0x70706fULL, static_cast<std::uint64_t>(epoch));
}

PpoTrainer::PpoTrainer(std::unique_ptr<TrainableModel> model, PpoConfig cfg, std::uint64_t seed)
    : model_(std::move(model)), cfg_(std::move(cfg)), seed_(seed), adam_(model_->theta().size()) {
  cfg_.validate();
}

void PpoTrainer::restore(std::vector<double> theta, AdamState adam, int epoch, std::int64_t episodes) {
  if (theta.size() != model_->theta().size() || adam.m.size() != theta.size())
    throw std::invalid_argument("PpoTrainer::restore: parameter count mismatch");
  model_->theta() = std::move(theta);
  adam_ = std::move(adam);
  epoch_ = epoch;
  episodes_ = episodes;
}

EpochMetrics PpoTrainer::train_epoch(const EnvConfig& env) {
  if (env.input_dim() != model_->input_dim() || env.action_dim() != model_->action_dim())
    throw std::invalid_argument("train_epoch: model and environment dimensions differ");
  EpochMetrics m;
  m.epoch = epoch_;
  m.lr = cfg_.lr.at(epoch_);
  const PolicyPtr policy = model_->snapshot();
  Batch batch = run_batch(*policy, env, cfg_.B, epoch_seed(seed_, epoch_));

  double ret = 0.0;
  for (const auto& ep : batch.episodes) {
    ret += ep.reward;
    m.max_leak = std::max(m.max_leak, ep.max_leak);
  }
  m.mean_return = ret / static_cast<double>(batch.episodes.size());
  TrainBatch tb = compute_advantages(std::move(batch), cfg_.gamma, cfg_.normalize_advantages);

  std::vector<double> grad;
  auto& theta = model_->theta();
  for (int pass = 0; pass < cfg_.opt_passes; ++pass) {
    const LossTerms lt = ppo_loss(tb, *model_, cfg_, &grad);
    if (!std::isfinite(lt.loss))
      throw std::domain_error("train_epoch: non-finite loss at epoch " + std::to_string(epoch_) + ", pass " +
                              std::to_string(pass));
    if (pass == 0) {
      m.loss = lt.loss;
      m.value_loss = lt.value;
      m.entropy = lt.entropy;
    }
    m.clip_fraction = lt.clip_fraction;
    const std::vector<double> last_good = theta;
    try {
      m.grad_norm = adam_step(theta, grad, adam_, m.lr, cfg_.grad_clip);
    } catch (const std::domain_error&) {
      theta = last_good;
      throw;
    }
  }
  episodes_ += cfg_.B;
  m.episodes_cumulative = episodes_;
  ++epoch_;
  return m;
}

PolicyPtr extract_deterministic(const TrainableModel& model) { return extract_deterministic(model.snapshot()); }

PolicyPtr extract_deterministic(PolicyPtr policy) { return std::make_shared<MeanPolicy>(std::move(policy)); }

// ---- decision trees ----

const DecisionNode& DecisionTree::at(const std::string& history) const {
  const int d = static_cast<int>(history.size());
  if (d >= T) throw std::out_of_range("DecisionTree::at: history longer than T-1");
  std::size_t idx = 0;
  for (char c : history) {
    if (c != '0' && c != '1') throw std::invalid_argument("DecisionTree::at: history must be 0/1");
    idx = 2 * idx + (c == '1');
  }
  return nodes.at(((std::size_t{1} << d) - 1) + idx);
}

std::string DecisionTree::to_json() const {
  nlohmann::json j;
  j["T"] = T;
  j["kind"] = to_string(kind);
  j["nodes"] = nlohmann::json::array();
  for (const auto& n : nodes)
    j["nodes"].push_back({{"depth", n.depth}, {"history", n.history}, {"mean", n.mean}, {"action", n.packed}});
  return j.dump(2);
}

DecisionTree export_decision_tree(const Policy& policy, const EnvConfig& cfg) {
  if (cfg.T > 12) throw std::invalid_argument("export_decision_tree: T must be <= 12");
  DecisionTree tree;
  tree.T = cfg.T;
  tree.kind = cfg.kind;
  const ActionMap amap = cfg.action_map();
  struct Frontier {
    std::string history;
    std::vector<double> carry;
  };
  std::vector<Frontier> level{{"", policy.initial_carry()}};
  for (int t = 0; t < cfg.T; ++t) {
    std::vector<Frontier> next;
    for (const auto& f : level) {
      double obs = 0.0;
      if (cfg.has_measurements() && !f.history.empty()) obs = f.history.back() == '1' ? 1.0 : -1.0;
      const PolicyStep out = policy.step(f.carry, policy_input(t, cfg.T, obs));
      tree.nodes.push_back({t, f.history, out.mean, amap(out.mean).pack(cfg.kind)});
      if (t + 1 < cfg.T) {
        next.push_back({f.history + "0", out.carry});
        next.push_back({f.history + "1", out.carry});
      }
    }
    level = std::move(next);
  }
  return tree;
}

}  // namespace qrl
