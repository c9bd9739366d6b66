#pragma once

#include <map>
#include <string>
#include <vector>

#include "mspa/backend.hpp"
#include "mspa/composer.hpp"
#include "mspa/encoder.hpp"
#include "mspa/grpo.hpp"
#include "mspa/metrics.hpp"
#include "mspa/policy.hpp"

namespace mspa {

// Composer output for a whole dataset.
struct ComposedData {
  std::map<UserId, PreferenceProfile> preferences;
  std::map<AuthorId, std::string> cards;
  std::map<AuthorId, Vector> card_embeddings;

  std::vector<EmbeddingRecord> embedding_records() const;
};

ComposedData compose_all(const Catalog& catalog, const std::vector<TippingSession>& sessions,
                         const CompletionBackend& backend, const TextEncoder& encoder,
                         std::size_t max_inflight = 4, bool users = true, bool authors = true);

RecContext make_context(const CandidateSet& set, const ComposedData& composed);

std::vector<TrainingExample> make_examples(const std::vector<CandidateSet>& sets,
                                           const ComposedData& composed);

/// Greedy accuracy of the linear policy over candidate-set examples.
double greedy_accuracy(const Policy& policy, const std::vector<TrainingExample>& examples);

struct U2AInputs {
  const std::vector<TippingSession>* sessions = nullptr;  // evaluation users
  std::map<std::size_t, std::vector<CandidateSet>> candidates;  // by m, evaluation users only
  std::vector<std::size_t> k_list{5, 10};
  std::vector<std::size_t> hit_k{1000};
};

/// Acc_m per m, full-catalog Recall@K / NDCG@K / HitRate@K with queries
/// normalize(W^T u), and pooled AUC / UAUC over candidate-set scores.
EvalReport evaluate_u2a(const Policy& policy, const U2AInputs& inputs, const ComposedData& composed);

EvalReport evaluate_a2a(const std::vector<SimilarityTriple>& triples, const ComposedData& composed);

}  // namespace mspa
