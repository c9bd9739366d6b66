#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "mspa/linalg.hpp"
#include "mspa/types.hpp"

namespace mspa {

// Mixing weights for accuracy and format; similarity gets the remainder.
class RewardWeights {
 public:
  // Defaults are artifact choices (lambda1 = 0.5, lambda2 = 0.2).
  RewardWeights() : RewardWeights(0.5, 0.2) {}
  RewardWeights(double lambda1, double lambda2);

  double lambda1() const { return lambda1_; }
  double lambda2() const { return lambda2_; }
  double similarity_weight() const { return 1.0 - lambda1_ - lambda2_; }

 private:
  double lambda1_;
  double lambda2_;
};

struct RewardBreakdown {
  double accuracy = 0.0;
  double format = 0.0;
  double similarity = 0.0;
  double combined = 0.0;
};

std::vector<std::string> default_required_phrases();

double accuracy_reward(const AuthorId& chosen, const AuthorId& truth);

// 1 iff every phrase occurs as a case-sensitive substring.
double format_reward(std::string_view explanation, const std::vector<std::string>& required_phrases);

// max(0, cos(chosen, truth)); negative similarity is clamped to zero.
double similarity_reward(const Vector& chosen_emb, const Vector& truth_emb);

RewardBreakdown combine(double accuracy, double format, double similarity,
                        const RewardWeights& weights);

}  // namespace mspa
