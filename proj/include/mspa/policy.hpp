#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "mspa/backend.hpp"
#include "mspa/composer.hpp"
#include "mspa/linalg.hpp"
#include "mspa/rng.hpp"
#include "mspa/types.hpp"

namespace mspa {

/// Bilinear scorer with softmax sampling:
///   score_j = u^T W v_j,   pi(j) = softmax(score / tau)_j
/// where u is the user's preference embedding and v_j a candidate's feature
/// embedding.
template <typename Scalar>
struct LinearSoftmaxPolicy {
  Mat<Scalar> W;
  Scalar tau = Scalar(1);

  static LinearSoftmaxPolicy identity(Eigen::Index d, Scalar tau = Scalar(1)) {
    LinearSoftmaxPolicy p{Mat<Scalar>::Identity(d, d), tau};
    p.validate();
    return p;
  }

  Eigen::Index dim() const { return W.rows(); }

  void validate() const {
    if (W.rows() != W.cols()) throw std::invalid_argument("policy matrix must be square");
    if (!W.allFinite()) throw std::invalid_argument("policy matrix has non-finite entries");
    if (!(tau > Scalar(0) && tau <= Scalar(100))) {
      throw std::invalid_argument("temperature must lie in (0, 100]");
    }
  }

  template <typename NewScalar>
  LinearSoftmaxPolicy<NewScalar> cast() const {
    return {W.template cast<NewScalar>(), NewScalar(tau)};
  }
};

using Policy = LinearSoftmaxPolicy<double>;

// ---- Kernels over raw embeddings ------------------------------------------

template <typename Scalar>
Vec<Scalar> score_candidates(const LinearSoftmaxPolicy<Scalar>& policy, const Vec<Scalar>& u,
                             const Mat<Scalar>& candidates) {
  if (u.size() != policy.W.rows() || candidates.cols() != policy.W.cols()) {
    throw std::invalid_argument("score_candidates: dimension mismatch");
  }
  return candidates * (policy.W.transpose() * u);
}

template <typename Scalar>
Vec<Scalar> choice_probabilities(const LinearSoftmaxPolicy<Scalar>& policy, const Vec<Scalar>& u,
                                 const Mat<Scalar>& candidates) {
  const Vec<Scalar> s = score_candidates(policy, u, candidates);
  if (!s.allFinite()) throw std::domain_error("non-finite candidate scores");
  return softmax((s / policy.tau).eval());
}

template <typename Scalar>
Scalar choice_log_prob(const LinearSoftmaxPolicy<Scalar>& policy, const Vec<Scalar>& u,
                       const Mat<Scalar>& candidates, Eigen::Index choice) {
  const Vec<Scalar> s = score_candidates(policy, u, candidates);
  if (!s.allFinite()) throw std::domain_error("non-finite candidate scores");
  const Vec<Scalar> z = s / policy.tau;
  return z[choice] - log_sum_exp(z);
}

/// d/dW log pi(choice) = (1/tau) u (v_choice - sum_j p_j v_j)^T
template <typename Scalar>
Mat<Scalar> log_prob_grad(const LinearSoftmaxPolicy<Scalar>& policy, const Vec<Scalar>& u,
                          const Mat<Scalar>& candidates, Eigen::Index choice) {
  if (choice < 0 || choice >= candidates.rows()) {
    throw std::out_of_range("log_prob_grad: choice index out of range");
  }
  const Vec<Scalar> p = choice_probabilities(policy, u, candidates);
  const Vec<Scalar> centered = candidates.row(choice).transpose() - candidates.transpose() * p;
  return (u * centered.transpose()) / policy.tau;
}

// ---- Recommendation contexts ----------------------------------------------

struct RecContext {
  PreferenceProfile preference;
  std::vector<AuthorId> ids;
  std::vector<std::string> feature_texts;
  Matrix embeddings;  // m x d, one unit-norm row per candidate

  std::size_t m() const { return ids.size(); }
  void validate() const;
};

struct PolicyOutput {
  std::size_t choice_index = 0;
  std::string explanation;
  double log_prob = 0.0;
};

inline char candidate_label(std::size_t index) { return static_cast<char>('A' + index); }

Vector score_candidates(const Policy& policy, const RecContext& ctx);
Vector choice_probabilities(const Policy& policy, const RecContext& ctx);
Matrix log_prob_grad(const Policy& policy, const RecContext& ctx, std::size_t choice);

/// Structured explanation in the recommendation answer format, naming the
/// chosen candidate. Contains the phrases "User Preference",
/// "Recommendation Reason" and "Recommended author".
std::string templated_explanation(const RecContext& ctx, std::size_t choice);

/// G independent draws from softmax(scores / tau). Requires G >= 2.
std::vector<PolicyOutput> sample_group(const Policy& policy, const RecContext& ctx, std::size_t G,
                                       Rng& rng, bool with_explanations = true);

/// Highest-scoring candidate; ties go to the lexicographically smallest id.
std::size_t greedy_choice(const Vector& scores, const std::vector<AuthorId>& ids);
std::size_t greedy_choice(const Policy& policy, const RecContext& ctx);

// ---- Language-model policy ------------------------------------------------

/// Candidate labels run A..Z; more than 26 candidates is a DataError.
Prompt build_recommendation_prompt(const RecContext& ctx);

struct ParsedRecommendation {
  std::size_t choice_index = 0;
  std::string explanation;
};

class RecommendationParseError : public DataError {
 public:
  RecommendationParseError(const std::string& what, std::string raw)
      : DataError(what), raw_(std::move(raw)) {}
  const std::string& raw_output() const { return raw_; }

 private:
  std::string raw_;
};

/// Finds the first balanced {...} block (string-literal aware), reads its
/// "Answer" letter and maps A->0, B->1, ... Errors: "unparseable",
/// "missing answer", "out of range".
ParsedRecommendation parse_recommendation(std::string_view raw, std::size_t m);

/// Asks the backend for a choice. log_prob is 0: the backend exposes no
/// probabilities, so this policy is for evaluation only.
PolicyOutput llm_policy_recommend(const RecContext& ctx, const CompletionBackend& backend,
                                  int parse_retries = 2);

// ---- Policy checkpoint ----------------------------------------------------

nlohmann::json policy_to_json(const Policy& policy);
Policy policy_from_json(const nlohmann::json& j);

}  // namespace mspa
