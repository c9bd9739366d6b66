#include "mspa/grpo.hpp"

#include <numeric>

namespace mspa {

void GrpoConfig::validate() const {
  if (group_size < 2) throw UsageError("grpo.group_size must be at least 2");
  if (!(clip_eps > 0.0)) throw UsageError("grpo.clip_eps must be positive");
  if (!(kl_beta >= 0.0) || !std::isfinite(kl_beta)) throw UsageError("grpo.kl_beta must be >= 0");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw UsageError("grpo.learning_rate must be positive");
  }
  if (batch_size == 0) throw UsageError("grpo.batch_size must be positive");
  if (!(eps_std > 0.0)) throw UsageError("grpo.eps_std must be positive");
}

nlohmann::json to_json_value(const TrainStats& s) {
  return {{"step", s.step},
          {"mean_reward", s.mean_reward},
          {"mean_abs_advantage", s.mean_abs_advantage},
          {"mean_kl", s.mean_kl},
          {"accuracy_so_far", s.accuracy_so_far},
          {"update_norm", s.update_norm}};
}

std::vector<double> compute_advantages(const std::vector<double>& rewards, double eps_std) {
  if (rewards.size() < 2) throw std::invalid_argument("compute_advantages: need at least 2 rewards");
  for (double r : rewards) {
    if (!std::isfinite(r)) throw std::domain_error("compute_advantages: non-finite reward");
  }
  const auto n = static_cast<double>(rewards.size());
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / n);

  std::vector<double> adv(rewards.size(), 0.0);
  if (sd < eps_std) return adv;
  for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / sd;
  // Re-center so the output mean is zero to rounding.
  const double drift = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  for (auto& a : adv) a -= drift;
  return adv;
}

double kl_penalty(double logp_current, double logp_ref) {
  return kl_penalty<double>(logp_current, logp_ref);
}

RewardFn make_reward_fn(RewardWeights weights, std::vector<std::string> required_phrases) {
  return [weights, phrases = std::move(required_phrases)](const TrainingExample& ex,
                                                          const PolicyOutput& out) {
    const auto& ctx = ex.context;
    const auto& chosen = ctx.ids.at(out.choice_index);
    const double acc = accuracy_reward(chosen, ex.truth());
    const double fmt = format_reward(out.explanation, phrases);
    const double sim =
        acc == 1.0 ? 1.0
                   : similarity_reward(
                         ctx.embeddings.row(static_cast<Eigen::Index>(out.choice_index)).transpose(),
                         ctx.embeddings.row(static_cast<Eigen::Index>(ex.truth_index)).transpose());
    return combine(acc, fmt, sim, weights);
  };
}

StepResult grpo_step(const Policy& policy, const Policy& ref, const Batch& batch,
                     const RewardFn& reward_fn, const GrpoConfig& cfg, const Rng& rng) {
  if (batch.empty()) throw std::invalid_argument("grpo_step: empty batch");
  StepResult res{policy, {}, {}, 0, 0};
  res.groups.reserve(batch.size());

  double reward_sum = 0.0;
  double abs_adv_sum = 0.0;
  double kl_sum = 0.0;
  for (std::size_t c = 0; c < batch.size(); ++c) {
    const auto& ex = *batch[c];
    Rng ctx_rng = rng.substream(c);
    GroupSample g;
    g.context_index = c;
    g.outputs = sample_group(policy, ex.context, cfg.group_size, ctx_rng);
    const Vector ref_logp = log_softmax((score_candidates(ref, ex.context) / ref.tau).eval());
    for (const auto& o : g.outputs) {
      auto b = reward_fn(ex, o);
      g.rewards.push_back(b.combined);
      g.breakdowns.push_back(b);
      g.old_log_probs.push_back(o.log_prob);
      reward_sum += b.combined;
      kl_sum += kl_penalty(o.log_prob, ref_logp[static_cast<Eigen::Index>(o.choice_index)]);
      if (o.choice_index == ex.truth_index) ++res.correct;
      ++res.outputs;
    }
    g.advantages = compute_advantages(g.rewards, cfg.eps_std);
    for (double a : g.advantages) abs_adv_sum += std::abs(a);
    res.groups.push_back(std::move(g));
  }

  const Matrix grad = grpo_objective_gradient(policy, ref, batch, res.groups, cfg);
  res.policy.W.noalias() += cfg.learning_rate * grad;

  const auto n = static_cast<double>(res.outputs);
  res.stats.mean_reward = reward_sum / n;
  res.stats.mean_abs_advantage = abs_adv_sum / n;
  res.stats.mean_kl = kl_sum / n;
  res.stats.update_norm = cfg.learning_rate * grad.norm();
  res.stats.accuracy_so_far = static_cast<double>(res.correct) / n;
  return res;
}

TrainResult train(const Policy& initial, const std::vector<TrainingExample>& dataset,
                  const RewardFn& reward_fn, const GrpoConfig& cfg, const EvalHook& eval_hook) {
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  cfg.validate();
  initial.validate();

  const Rng root(cfg.seed);
  const Rng batch_rng = root.substream("batch");
  const Rng sample_rng = root.substream("sample");
  const Policy ref = initial;

  TrainResult result{initial, {}};
  if (eval_hook) eval_hook(0, result.policy);

  const std::size_t batch_size = std::min(cfg.batch_size, dataset.size());
  std::vector<std::size_t> order;
  std::size_t cursor = dataset.size();  // forces a shuffle on the first step
  std::size_t epoch = 0;
  std::size_t correct = 0;
  std::size_t outputs = 0;

  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    Batch batch;
    batch.reserve(batch_size);
    while (batch.size() < batch_size) {
      if (cursor >= order.size()) {
        order.resize(dataset.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng epoch_rng = batch_rng.substream(epoch++);
        epoch_rng.shuffle(order);
        cursor = 0;
      }
      batch.push_back(&dataset[order[cursor++]]);
    }

    auto res = grpo_step(result.policy, ref, batch, reward_fn, cfg, sample_rng.substream(step));
    correct += res.correct;
    outputs += res.outputs;
    res.stats.step = step;
    res.stats.accuracy_so_far = static_cast<double>(correct) / static_cast<double>(outputs);
    result.policy = std::move(res.policy);
    result.stats.push_back(res.stats);

    const bool last = step == cfg.steps;
    if (eval_hook && (last || (cfg.eval_every > 0 && step % cfg.eval_every == 0))) {
      eval_hook(step, result.policy);
    }
  }
  return result;
}

}  // namespace mspa
