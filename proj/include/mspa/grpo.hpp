#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <nlohmann/json.hpp>

#include "mspa/policy.hpp"
#include "mspa/rewards.hpp"
#include "mspa/rng.hpp"

namespace mspa {

struct GrpoConfig {
  std::size_t group_size = 8;
  double clip_eps = 0.2;  // +infinity disables clipping
  double kl_beta = 0.04;
  double learning_rate = 0.01;
  std::size_t steps = 100;
  std::size_t batch_size = 32;  // contexts per step
  double eps_std = 1e-8;
  std::uint64_t seed = 0;
  std::size_t eval_every = 0;  // 0: evaluate only before and after training

  void validate() const;
};

struct TrainingExample {
  RecContext context;
  std::size_t truth_index = 0;

  const AuthorId& truth() const { return context.ids.at(truth_index); }
};

struct GroupSample {
  std::size_t context_index = 0;  // position in the step's batch
  std::vector<PolicyOutput> outputs;
  std::vector<RewardBreakdown> breakdowns;
  std::vector<double> rewards;
  std::vector<double> advantages;
  std::vector<double> old_log_probs;
};

struct TrainStats {
  std::size_t step = 0;
  double mean_reward = 0.0;
  double mean_abs_advantage = 0.0;
  double mean_kl = 0.0;
  double accuracy_so_far = 0.0;
  double update_norm = 0.0;
};

nlohmann::json to_json_value(const TrainStats& s);

/// A_i = (r_i - mean) / std with the population std; all zeros when the
/// std is below eps_std. Requires G >= 2 finite rewards.
std::vector<double> compute_advantages(const std::vector<double>& rewards, double eps_std = 1e-8);

/// rho - log(rho) - 1 with rho = exp(logp_ref - logp_current).
template <typename Scalar>
Scalar kl_penalty(Scalar logp_current, Scalar logp_ref) {
  using std::exp;
  using std::abs;
  if (!std::isfinite(static_cast<double>(logp_current)) ||
      !std::isfinite(static_cast<double>(logp_ref))) {
    throw std::domain_error("kl_penalty: non-finite log-probability");
  }
  const Scalar diff = logp_ref - logp_current;
  if (abs(diff) > Scalar(50)) throw std::overflow_error("KL ratio overflow");
  // rho - log(rho) - 1 == expm1(diff) - diff, which stays accurate near 0.
  using std::expm1;
  return expm1(diff) - diff;
}

double kl_penalty(double logp_current, double logp_ref);

using RewardFn = std::function<RewardBreakdown(const TrainingExample&, const PolicyOutput&)>;

// Accuracy by id, format by phrase match, similarity between the chosen and
// true candidates' feature embeddings (exactly 1 when the choice is right).
RewardFn make_reward_fn(RewardWeights weights,
                        std::vector<std::string> required_phrases = default_required_phrases());

using Batch = std::vector<const TrainingExample*>;

namespace detail {

// Per-output weight on grad log pi in the objective gradient.
template <typename Scalar>
Scalar output_coefficient(Scalar logp, Scalar old_logp, Scalar ref_logp, Scalar advantage,
                          const GrpoConfig& cfg) {
  using std::exp;
  const Scalar ratio = exp(logp - old_logp);
  const Scalar lo = Scalar(1 - cfg.clip_eps);
  const Scalar hi = Scalar(1 + cfg.clip_eps);
  // min(rho*A, clip(rho)*A) follows the unclipped branch unless rho has left
  // the trust region in the direction A favours.
  const bool clipped = (advantage > 0 && ratio > hi) || (advantage < 0 && ratio < lo);
  const Scalar surrogate = clipped ? Scalar(0) : advantage * ratio;
  const Scalar kl = Scalar(cfg.kl_beta) * (exp(ref_logp - logp) - Scalar(1));
  return surrogate + kl;
}

}  // namespace detail

/// Mean over all sampled outputs of
///   min(rho_i A_i, clip(rho_i, 1-eps, 1+eps) A_i) - beta * D_KL_i
/// with rho_i = pi(o_i) / pi_old(o_i) and D_KL_i = kl_penalty(log pi(o_i), log pi_ref(o_i)).
template <typename Scalar>
Scalar grpo_objective(const LinearSoftmaxPolicy<Scalar>& policy,
                      const LinearSoftmaxPolicy<Scalar>& ref, const Batch& batch,
                      const std::vector<GroupSample>& groups, const GrpoConfig& cfg) {
  using std::exp;
  using std::max;
  using std::min;
  Scalar total(0);
  std::size_t n = 0;
  for (const auto& g : groups) {
    const auto& ctx = batch.at(g.context_index)->context;
    const Vec<Scalar> u = ctx.preference.preference_embedding.template cast<Scalar>();
    const Mat<Scalar> V = ctx.embeddings.template cast<Scalar>();
    const Vec<Scalar> logp = log_softmax((score_candidates(policy, u, V) / policy.tau).eval());
    const Vec<Scalar> ref_logp = log_softmax((score_candidates(ref, u, V) / ref.tau).eval());
    for (std::size_t i = 0; i < g.outputs.size(); ++i) {
      const auto j = static_cast<Eigen::Index>(g.outputs[i].choice_index);
      const Scalar a(g.advantages[i]);
      const Scalar ratio = exp(logp[j] - Scalar(g.old_log_probs[i]));
      const Scalar clipped =
          min(max(ratio, Scalar(1 - cfg.clip_eps)), Scalar(1 + cfg.clip_eps));
      total += min(ratio * a, clipped * a) -
               Scalar(cfg.kl_beta) * kl_penalty<Scalar>(logp[j], ref_logp[j]);
      ++n;
    }
  }
  return n == 0 ? Scalar(0) : total / Scalar(n);
}

/// Analytic gradient of grpo_objective with respect to W.
template <typename Scalar>
Mat<Scalar> grpo_objective_gradient(const LinearSoftmaxPolicy<Scalar>& policy,
                                    const LinearSoftmaxPolicy<Scalar>& ref, const Batch& batch,
                                    const std::vector<GroupSample>& groups,
                                    const GrpoConfig& cfg) {
  Mat<Scalar> grad = Mat<Scalar>::Zero(policy.W.rows(), policy.W.cols());
  std::size_t n = 0;
  for (const auto& g : groups) {
    const auto& ctx = batch.at(g.context_index)->context;
    const Vec<Scalar> u = ctx.preference.preference_embedding.template cast<Scalar>();
    const Mat<Scalar> V = ctx.embeddings.template cast<Scalar>();
    const Vec<Scalar> logp = log_softmax((score_candidates(policy, u, V) / policy.tau).eval());
    const Vec<Scalar> ref_logp = log_softmax((score_candidates(ref, u, V) / ref.tau).eval());
    const Vec<Scalar> p = logp.array().exp().matrix();

    // sum_i k_i (v_{o_i} - V^T p) = V^T (sum_i k_i e_{o_i} - (sum_i k_i) p)
    Vec<Scalar> weights = Vec<Scalar>::Zero(V.rows());
    Scalar k_sum(0);
    for (std::size_t i = 0; i < g.outputs.size(); ++i) {
      const auto j = static_cast<Eigen::Index>(g.outputs[i].choice_index);
      const Scalar k = detail::output_coefficient<Scalar>(
          logp[j], Scalar(g.old_log_probs[i]), ref_logp[j], Scalar(g.advantages[i]), cfg);
      weights[j] += k;
      k_sum += k;
      ++n;
    }
    weights -= k_sum * p;
    grad.noalias() += u * (V.transpose() * weights).transpose();
  }
  if (n == 0) return grad;
  return grad / (policy.tau * Scalar(n));
}

struct StepResult {
  Policy policy;
  TrainStats stats;
  std::vector<GroupSample> groups;
  std::size_t correct = 0;  // sampled outputs that picked the ground truth
  std::size_t outputs = 0;
};

/// Sample a group per context, score it, and take one gradient-ascent step
/// on the per-step objective. Context c draws from rng.substream(c).
StepResult grpo_step(const Policy& policy, const Policy& ref, const Batch& batch,
                     const RewardFn& reward_fn, const GrpoConfig& cfg, const Rng& rng);

using EvalHook = std::function<void(std::size_t step, const Policy& policy)>;

struct TrainResult {
  Policy policy;
  std::vector<TrainStats> stats;
};

/// cfg.steps GRPO steps over shuffled minibatches with the reference policy
/// frozen at `initial`. The eval hook fires at step 0, every
/// cfg.eval_every steps, and after the last step.
TrainResult train(const Policy& initial, const std::vector<TrainingExample>& dataset,
                  const RewardFn& reward_fn, const GrpoConfig& cfg, const EvalHook& eval_hook = {});

}  // namespace mspa
