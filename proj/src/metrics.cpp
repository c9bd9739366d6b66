#include "mspa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <fmt/format.h>

namespace mspa {

namespace {

void check_aligned(std::size_t a, std::size_t b) {
  if (a != b) throw std::invalid_argument("query and truth lists differ in length");
}

bool ranks_before(const ScoredId& a, const ScoredId& b) {
  return a.score > b.score || (a.score == b.score && a.id < b.id);
}

}  // namespace

VectorIndex::VectorIndex(std::vector<std::string> ids, Matrix vectors)
    : ids_(std::move(ids)), vectors_(std::move(vectors)) {
  if (static_cast<Eigen::Index>(ids_.size()) != vectors_.rows()) {
    throw DataError("index: id count does not match vector count");
  }
  std::set<std::string> seen;
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!seen.insert(ids_[i]).second) throw DataError("index: duplicate id " + ids_[i]);
    if (!is_unit_norm(vectors_.row(static_cast<Eigen::Index>(i)).transpose().eval())) {
      throw DataError("index: vector for " + ids_[i] + " is not unit norm");
    }
  }
}

std::vector<ScoredId> VectorIndex::top_k(const Vector& query, std::size_t K) const {
  if (ids_.empty()) throw DataError("index is empty");
  if (K == 0) throw std::invalid_argument("top_k: K must be >= 1");
  if (query.size() != vectors_.cols()) throw std::invalid_argument("top_k: dimension mismatch");
  const Vector scores = vectors_ * query;
  std::vector<ScoredId> all(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    all[i] = {ids_[i], scores[static_cast<Eigen::Index>(i)]};
  }
  const std::size_t k = std::min(K, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(),
                    ranks_before);
  all.resize(k);
  return all;
}

std::size_t rank_of(const Ranking& ranking, const std::string& truth) {
  auto it = std::find(ranking.begin(), ranking.end(), truth);
  return it == ranking.end() ? 0 : static_cast<std::size_t>(it - ranking.begin()) + 1;
}

double recall_at_k(const std::vector<Ranking>& rankings, const std::vector<std::string>& truths,
                   std::size_t K) {
  check_aligned(rankings.size(), truths.size());
  if (rankings.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t q = 0; q < rankings.size(); ++q) {
    const auto r = rank_of(rankings[q], truths[q]);
    if (r != 0 && r <= K) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(rankings.size());
}

double ndcg_at_k(const std::vector<Ranking>& rankings, const std::vector<std::string>& truths,
                 std::size_t K) {
  check_aligned(rankings.size(), truths.size());
  if (rankings.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t q = 0; q < rankings.size(); ++q) {
    const auto r = rank_of(rankings[q], truths[q]);
    if (r != 0 && r <= K) sum += 1.0 / std::log2(static_cast<double>(r) + 1.0);
  }
  return sum / static_cast<double>(rankings.size());
}

double acc_at_m(const std::vector<std::string>& predictions, const std::vector<std::string>& truths) {
  check_aligned(predictions.size(), truths.size());
  if (predictions.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) hits += predictions[i] == truths[i];
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

double alignment_rate(const std::vector<SimilarityTriple>& triples,
                      const std::map<std::string, Vector>& embeddings) {
  if (triples.empty()) return 0.0;
  auto get = [&](const std::string& id) -> const Vector& {
    auto it = embeddings.find(id);
    if (it == embeddings.end()) throw DataError("missing embedding for " + id);
    return it->second;
  };
  std::size_t aligned = 0;
  for (const auto& t : triples) {
    const Vector& a = get(t.anchor);
    if (cosine(a, get(t.closer)) > cosine(a, get(t.farther))) ++aligned;
  }
  return static_cast<double>(aligned) / static_cast<double>(triples.size());
}

double hit_rate_at_k(const VectorIndex& index, const std::vector<Vector>& user_embeddings,
                     const std::vector<std::string>& truths, std::size_t K) {
  check_aligned(user_embeddings.size(), truths.size());
  std::vector<Ranking> rankings;
  rankings.reserve(user_embeddings.size());
  for (const auto& u : user_embeddings) {
    Ranking r;
    for (auto& s : index.top_k(u, K)) r.push_back(std::move(s.id));
    rankings.push_back(std::move(r));
  }
  return recall_at_k(rankings, truths, K);
}

namespace {

// Mann-Whitney form: (sum of positive mid-ranks - P(P+1)/2) / (P N).
std::optional<double> rank_auc(std::vector<std::pair<double, int>> scored) {
  std::sort(scored.begin(), scored.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double pos_rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < scored.size();) {
    std::size_t j = i;
    while (j < scored.size() && scored[j].first == scored[i].first) ++j;
    const double mid_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (scored[k].second == 1) {
        pos_rank_sum += mid_rank;
        ++pos;
      }
    }
    i = j;
  }
  const std::size_t neg = scored.size() - pos;
  if (pos == 0 || neg == 0) return std::nullopt;
  const double p = static_cast<double>(pos);
  return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

}  // namespace

AucResult auc_uauc(const std::vector<ScoredPair>& pairs) {
  std::vector<std::pair<double, int>> pooled;
  std::map<std::string, std::vector<std::pair<double, int>>> by_user;
  for (const auto& p : pairs) {
    if (p.label != 0 && p.label != 1) throw std::invalid_argument("auc: labels must be 0 or 1");
    pooled.emplace_back(p.score, p.label);
    by_user[p.user].emplace_back(p.score, p.label);
  }
  const auto auc = rank_auc(std::move(pooled));
  if (!auc) throw DataError("auc needs at least one positive and one negative");
  AucResult r;
  r.auc = *auc;
  double sum = 0.0;
  for (auto& [user, scored] : by_user) {
    if (auto a = rank_auc(std::move(scored))) {
      sum += *a;
      ++r.uauc_users;
    }
  }
  r.uauc = r.uauc_users == 0 ? 0.0 : sum / static_cast<double>(r.uauc_users);
  return r;
}

void EvalReport::validate() const {
  auto check = [](double v, const std::string& what) {
    if (!(v >= 0.0 && v <= 1.0)) throw DataError("report: " + what + " outside [0,1]");
  };
  for (const auto& [m, v] : acc_m) check(v, "acc_m");
  for (const auto& [k, v] : recall) check(v, "recall");
  for (const auto& [k, v] : ndcg) check(v, "ndcg");
  for (const auto& [k, v] : hit_rate) check(v, "hit_rate");
  if (alignment_rate) check(*alignment_rate, "alignment_rate");
  if (auc) check(*auc, "auc");
  if (uauc) check(*uauc, "uauc");
}

void EvalReport::merge(const EvalReport& o) {
  for (const auto& [k, v] : o.acc_m) acc_m[k] = v;
  for (const auto& [k, v] : o.recall) recall[k] = v;
  for (const auto& [k, v] : o.ndcg) ndcg[k] = v;
  for (const auto& [k, v] : o.hit_rate) hit_rate[k] = v;
  for (const auto& [k, v] : o.counts) counts[k] = v;
  if (o.alignment_rate) alignment_rate = o.alignment_rate;
  if (o.auc) auc = o.auc;
  if (o.uauc) uauc = o.uauc;
}

namespace {

nlohmann::json keyed(const std::map<std::size_t, double>& m) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : m) j[std::to_string(k)] = v;
  return j;
}

std::map<std::size_t, double> unkeyed(const nlohmann::json& j) {
  std::map<std::size_t, double> m;
  for (const auto& [k, v] : j.items()) m[std::stoul(k)] = v.get<double>();
  return m;
}

nlohmann::json optional_value(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> optional_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}

}  // namespace

nlohmann::json report_to_json(const EvalReport& r) {
  return {{"acc_m", keyed(r.acc_m)},
          {"recall", keyed(r.recall)},
          {"ndcg", keyed(r.ndcg)},
          {"alignment_rate", optional_value(r.alignment_rate)},
          {"hit_rate", keyed(r.hit_rate)},
          {"auc", optional_value(r.auc)},
          {"uauc", optional_value(r.uauc)},
          {"counts", r.counts}};
}

EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport r;
  try {
    if (j.contains("acc_m")) r.acc_m = unkeyed(j["acc_m"]);
    if (j.contains("recall")) r.recall = unkeyed(j["recall"]);
    if (j.contains("ndcg")) r.ndcg = unkeyed(j["ndcg"]);
    if (j.contains("hit_rate")) r.hit_rate = unkeyed(j["hit_rate"]);
    r.alignment_rate = optional_from(j, "alignment_rate");
    r.auc = optional_from(j, "auc");
    r.uauc = optional_from(j, "uauc");
    if (j.contains("counts")) j["counts"].get_to(r.counts);
  } catch (const std::exception& e) {
    throw DataError(std::string("malformed eval report: ") + e.what());
  }
  r.validate();
  return r;
}

std::string report_to_markdown(const EvalReport& r) {
  std::string header = "|";
  std::string rule = "|";
  std::string row = "|";
  auto col = [&](const std::string& name, const std::string& value) {
    header += " " + name + " |";
    rule += "---|";
    row += " " + value + " |";
  };
  for (const auto& [m, v] : r.acc_m) col(fmt::format("Acc_m={} (%)", m), fmt::format("{:.2f}", 100 * v));
  std::set<std::size_t> ks;
  for (const auto& [k, v] : r.recall) ks.insert(k);
  for (auto k : ks) {
    col(fmt::format("Recall@{}", k), fmt::format("{:.3f}", r.recall.at(k)));
    if (r.ndcg.count(k)) col(fmt::format("NDCG@{}", k), fmt::format("{:.3f}", r.ndcg.at(k)));
  }
  if (r.alignment_rate) col("A.R.", fmt::format("{:.3f}", *r.alignment_rate));
  for (const auto& [k, v] : r.hit_rate) col(fmt::format("HitRate@{}", k), fmt::format("{:.3f}", v));
  if (r.auc) col("AUC", fmt::format("{:.4f}", *r.auc));
  if (r.uauc) col("UAUC", fmt::format("{:.4f}", *r.uauc));
  return header + "\n" + rule + "\n" + row + "\n";
}

}  // namespace mspa
