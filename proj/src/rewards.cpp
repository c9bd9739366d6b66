#include "mspa/rewards.hpp"

#include <algorithm>
#include <cmath>

namespace mspa {

RewardWeights::RewardWeights(double lambda1, double lambda2) : lambda1_(lambda1), lambda2_(lambda2) {
  const bool ok = std::isfinite(lambda1) && std::isfinite(lambda2) && lambda1 >= 0.0 &&
                  lambda1 <= 1.0 && lambda2 >= 0.0 && lambda2 <= 1.0 &&
                  lambda1 + lambda2 <= 1.0 + 1e-12;
  if (!ok) throw UsageError("reward weights need lambda1, lambda2 in [0,1] with lambda1 + lambda2 <= 1");
}

std::vector<std::string> default_required_phrases() {
  return {"User Preference", "Recommendation Reason", "Recommended author"};
}

double accuracy_reward(const AuthorId& chosen, const AuthorId& truth) {
  return chosen == truth ? 1.0 : 0.0;
}

double format_reward(std::string_view explanation, const std::vector<std::string>& required_phrases) {
  for (const auto& phrase : required_phrases) {
    if (explanation.find(phrase) == std::string_view::npos) return 0.0;
  }
  return 1.0;
}

double similarity_reward(const Vector& chosen_emb, const Vector& truth_emb) {
  if (chosen_emb.size() != truth_emb.size()) {
    throw std::invalid_argument("similarity_reward: dimension mismatch");
  }
  return std::clamp(cosine(chosen_emb, truth_emb), 0.0, 1.0);
}

RewardBreakdown combine(double accuracy, double format, double similarity,
                        const RewardWeights& weights) {
  RewardBreakdown r{accuracy, format, similarity, 0.0};
  // Same value as l1*acc + l2*fmt + (1-l1-l2)*sim, written so that all-ones
  // components give exactly 1.
  const double v = similarity + weights.lambda1() * (accuracy - similarity) +
                   weights.lambda2() * (format - similarity);
  r.combined = std::clamp(v, 0.0, 1.0);
  return r;
}

}  // namespace mspa
