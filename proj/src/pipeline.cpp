#include "mspa/pipeline.hpp"

#include <set>

namespace mspa {

std::vector<EmbeddingRecord> ComposedData::embedding_records() const {
  std::vector<EmbeddingRecord> out;
  for (const auto& [id, p] : preferences) out.push_back({id, "user", p.preference_embedding});
  for (const auto& [id, v] : card_embeddings) out.push_back({id, "author", v});
  return out;
}

ComposedData compose_all(const Catalog& catalog, const std::vector<TippingSession>& sessions,
                         const CompletionBackend& backend, const TextEncoder& encoder,
                         std::size_t max_inflight, bool users, bool authors) {
  ComposedData out;
  if (users) {
    auto profiles = parallel_map(sessions.size(), max_inflight, [&](std::size_t i) {
      return compose_preference(sessions[i], catalog, backend, encoder);
    });
    for (auto& p : profiles) out.preferences.emplace(p.user_id, std::move(p));
  }
  if (authors) {
    const auto& recs = catalog.records();
    auto cards = parallel_map(recs.size(), max_inflight,
                              [&](std::size_t i) { return describe_author(recs[i], backend); });
    for (std::size_t i = 0; i < recs.size(); ++i) {
      out.card_embeddings.emplace(recs[i].author_id, embed_text(cards[i], encoder));
      out.cards.emplace(recs[i].author_id, std::move(cards[i]));
    }
  }
  return out;
}

RecContext make_context(const CandidateSet& set, const ComposedData& composed) {
  auto pit = composed.preferences.find(set.session_ref);
  if (pit == composed.preferences.end()) throw DataError("no preference profile for " + set.session_ref);
  RecContext ctx;
  ctx.preference = pit->second;
  const auto d = ctx.preference.preference_embedding.size();
  ctx.embeddings.resize(static_cast<Eigen::Index>(set.m()), d);
  for (std::size_t j = 0; j < set.m(); ++j) {
    const auto& id = set.candidates[j];
    auto eit = composed.card_embeddings.find(id);
    auto cit = composed.cards.find(id);
    if (eit == composed.card_embeddings.end() || cit == composed.cards.end()) {
      throw DataError("no author card for " + id);
    }
    if (eit->second.size() != d) throw DataError("embedding dimension mismatch for " + id);
    ctx.ids.push_back(id);
    ctx.feature_texts.push_back(cit->second);
    ctx.embeddings.row(static_cast<Eigen::Index>(j)) = eit->second.transpose();
  }
  return ctx;
}

std::vector<TrainingExample> make_examples(const std::vector<CandidateSet>& sets,
                                           const ComposedData& composed) {
  std::vector<TrainingExample> out;
  out.reserve(sets.size());
  for (const auto& s : sets) out.push_back({make_context(s, composed), s.truth_index});
  return out;
}

double greedy_accuracy(const Policy& policy, const std::vector<TrainingExample>& examples) {
  if (examples.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& ex : examples) hits += greedy_choice(policy, ex.context) == ex.truth_index;
  return static_cast<double>(hits) / static_cast<double>(examples.size());
}

EvalReport evaluate_u2a(const Policy& policy, const U2AInputs& in, const ComposedData& composed) {
  EvalReport r;
  std::vector<ScoredPair> pairs;
  for (const auto& [m, sets] : in.candidates) {
    std::vector<std::string> preds;
    std::vector<std::string> truths;
    for (const auto& set : sets) {
      const auto ctx = make_context(set, composed);
      const Vector scores = score_candidates(policy, ctx);
      preds.push_back(ctx.ids[greedy_choice(scores, ctx.ids)]);
      truths.push_back(set.truth());
      if (m == in.candidates.begin()->first) {
        for (std::size_t j = 0; j < set.m(); ++j) {
          pairs.push_back({set.session_ref, set.candidates[j], scores[static_cast<Eigen::Index>(j)],
                           j == set.truth_index ? 1 : 0});
        }
      }
    }
    r.acc_m[m] = acc_at_m(preds, truths);
    r.counts["sets_m" + std::to_string(m)] = sets.size();
  }
  if (!pairs.empty()) {
    const auto auc = auc_uauc(pairs);
    r.auc = auc.auc;
    r.uauc = auc.uauc;
    r.counts["uauc_users"] = auc.uauc_users;
  }

  if (in.sessions && !in.sessions->empty()) {
    std::vector<std::string> ids;
    Matrix vectors(static_cast<Eigen::Index>(composed.card_embeddings.size()), policy.dim());
    Eigen::Index row = 0;
    for (const auto& [id, v] : composed.card_embeddings) {
      ids.push_back(id);
      vectors.row(row++) = v.transpose();
    }
    const VectorIndex index(std::move(ids), std::move(vectors));

    std::size_t max_k = 1;
    for (auto k : in.k_list) max_k = std::max(max_k, k);
    for (auto k : in.hit_k) max_k = std::max(max_k, k);

    std::vector<Ranking> rankings;
    std::vector<std::string> truths;
    for (const auto& s : *in.sessions) {
      auto pit = composed.preferences.find(s.user_id);
      if (pit == composed.preferences.end()) throw DataError("no preference profile for " + s.user_id);
      Vector q = policy.W.transpose() * pit->second.preference_embedding;
      const double n = q.norm();
      if (!(n > 0.0)) throw DataError("policy maps user " + s.user_id + " to a zero query");
      Ranking ranking;
      for (auto& hit : index.top_k(q / n, max_k)) ranking.push_back(std::move(hit.id));
      rankings.push_back(std::move(ranking));
      truths.push_back(s.ground_truth);
    }
    for (auto k : in.k_list) {
      r.recall[k] = recall_at_k(rankings, truths, k);
      r.ndcg[k] = ndcg_at_k(rankings, truths, k);
    }
    for (auto k : in.hit_k) r.hit_rate[k] = recall_at_k(rankings, truths, k);
    r.counts["queries"] = rankings.size();
    r.counts["pool_size"] = index.size();
  }
  return r;
}

EvalReport evaluate_a2a(const std::vector<SimilarityTriple>& triples, const ComposedData& composed) {
  EvalReport r;
  std::map<std::string, Vector> emb(composed.card_embeddings.begin(), composed.card_embeddings.end());
  r.alignment_rate = alignment_rate(triples, emb);
  r.counts["triples"] = triples.size();
  return r;
}

}  // namespace mspa
