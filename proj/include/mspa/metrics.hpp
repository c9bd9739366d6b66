#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mspa/linalg.hpp"
#include "mspa/types.hpp"

namespace mspa {

struct ScoredId {
  std::string id;
  double score = 0.0;

  bool operator==(const ScoredId&) const = default;
};

// Exact cosine retrieval over unit vectors. Immutable after construction, so
// concurrent queries are safe.
class VectorIndex {
 public:
  VectorIndex() = default;
  VectorIndex(std::vector<std::string> ids, Matrix vectors);

  /// Descending cosine, ties by ascending id, min(K, size) entries.
  std::vector<ScoredId> top_k(const Vector& query, std::size_t K) const;

  std::size_t size() const { return ids_.size(); }
  std::size_t dimension() const { return static_cast<std::size_t>(vectors_.cols()); }
  const std::vector<std::string>& ids() const { return ids_; }
  const Matrix& vectors() const { return vectors_; }

 private:
  std::vector<std::string> ids_;
  Matrix vectors_;
};

using Ranking = std::vector<std::string>;

/// 1-based rank of `truth` in `ranking`, or 0 when absent.
std::size_t rank_of(const Ranking& ranking, const std::string& truth);

double recall_at_k(const std::vector<Ranking>& rankings, const std::vector<std::string>& truths,
                   std::size_t K);
double ndcg_at_k(const std::vector<Ranking>& rankings, const std::vector<std::string>& truths,
                 std::size_t K);
double acc_at_m(const std::vector<std::string>& predictions, const std::vector<std::string>& truths);

/// Fraction of triples with cos(anchor, closer) > cos(anchor, farther);
/// exact ties count as misses.
double alignment_rate(const std::vector<SimilarityTriple>& triples,
                      const std::map<std::string, Vector>& embeddings);

double hit_rate_at_k(const VectorIndex& index, const std::vector<Vector>& user_embeddings,
                     const std::vector<std::string>& truths, std::size_t K);

struct ScoredPair {
  std::string user;
  std::string item;
  double score = 0.0;
  int label = 0;
};

struct AucResult {
  double auc = 0.0;
  double uauc = 0.0;
  std::size_t uauc_users = 0;
};

/// Pooled AUC with half credit for ties, and the mean per-user AUC over
/// users that have both labels.
AucResult auc_uauc(const std::vector<ScoredPair>& pairs);

struct EvalReport {
  std::map<std::size_t, double> acc_m;
  std::map<std::size_t, double> recall;
  std::map<std::size_t, double> ndcg;
  std::optional<double> alignment_rate;
  std::map<std::size_t, double> hit_rate;
  std::optional<double> auc;
  std::optional<double> uauc;
  std::map<std::string, std::size_t> counts;

  void validate() const;
  // Later fields win for keys present in both.
  void merge(const EvalReport& other);
};

nlohmann::json report_to_json(const EvalReport& r);
EvalReport report_from_json(const nlohmann::json& j);
std::string report_to_markdown(const EvalReport& r);

}  // namespace mspa
