#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "mspa/error.hpp"
#include "mspa/metrics.hpp"
#include "mspa/rng.hpp"

using namespace mspa;

namespace {

Vector random_unit(Rng& rng, Eigen::Index d) {
  Vector v(d);
  for (Eigen::Index i = 0; i < d; ++i) v[i] = rng.normal();
  return v.normalized();
}

std::vector<ScoredId> brute_top_k(const std::vector<std::string>& ids, const Matrix& V, const Vector& q,
                                  std::size_t K) {
  std::vector<ScoredId> all;
  for (std::size_t i = 0; i < ids.size(); ++i) all.push_back({ids[i], V.row(static_cast<Eigen::Index>(i)).dot(q)});
  std::sort(all.begin(), all.end(), [](const ScoredId& a, const ScoredId& b) {
    return a.score != b.score ? a.score > b.score : a.id < b.id;
  });
  all.resize(std::min(K, all.size()));
  return all;
}

// Pairwise count: positives beating negatives, ties worth one half.
double brute_auc(const std::vector<ScoredPair>& pairs) {
  double wins = 0, total = 0;
  for (const auto& p : pairs) {
    if (p.label != 1) continue;
    for (const auto& n : pairs) {
      if (n.label != 0) continue;
      total += 1;
      wins += p.score > n.score ? 1.0 : (p.score == n.score ? 0.5 : 0.0);
    }
  }
  return wins / total;
}

}  // namespace

TEST_CASE("top_k: identity query, tie order, truncation") {
  Matrix V(3, 2);
  V << 1, 0, 0, 1, 0, 1;
  const VectorIndex index({"c", "b", "a"}, V);
  const auto hits = index.top_k(Vector::Unit(2, 0), 5);
  REQUIRE(hits.size() == 3);
  CHECK(hits[0].id == "c");
  CHECK(hits[0].score == 1.0);
  CHECK(hits[1].id == "a");  // b and a tie at 0
  CHECK(hits[2].id == "b");
  CHECK(index.top_k(Vector::Unit(2, 1), 1)[0].id == "a");
}

TEST_CASE("top_k matches a brute-force sort") {
  Rng rng(3);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 1 + rng.index(12);
    std::vector<std::string> ids;
    Matrix V(static_cast<Eigen::Index>(n), 4);
    for (std::size_t i = 0; i < n; ++i) {
      ids.push_back("id" + std::to_string(rng.index(1000)) + "_" + std::to_string(i));
      V.row(static_cast<Eigen::Index>(i)) = random_unit(rng, 4).transpose();
    }
    if (n > 2) V.row(1) = V.row(0);  // force ties
    const VectorIndex index(ids, V);
    const Vector q = random_unit(rng, 4);
    const std::size_t K = 1 + rng.index(n + 2);
    CHECK(index.top_k(q, K) == brute_top_k(ids, V, q, K));
  }
}

TEST_CASE("VectorIndex validation") {
  CHECK_THROWS(VectorIndex({"a", "a"}, Matrix::Identity(2, 2)));
  Matrix bad(1, 2);
  bad << 1.0, 1.0;
  CHECK_THROWS(VectorIndex({"a"}, bad));
  CHECK_THROWS(VectorIndex().top_k(Vector::Unit(2, 0), 1));
  CHECK_THROWS(VectorIndex({"a"}, Matrix::Identity(1, 1)).top_k(Vector::Unit(1, 0), 0));
}

TEST_CASE("recall_at_k examples") {
  auto ranking_with_truth_at = [](std::size_t rank) {
    Ranking r;
    for (std::size_t i = 1; i <= 12; ++i) r.push_back(i == rank ? "t" : "x" + std::to_string(i));
    return r;
  };
  CHECK(recall_at_k({ranking_with_truth_at(1)}, {"t"}, 5) == 1.0);
  CHECK(recall_at_k({ranking_with_truth_at(6)}, {"t"}, 5) == 0.0);
  const std::vector<Ranking> four{ranking_with_truth_at(1), ranking_with_truth_at(3), ranking_with_truth_at(7),
                                  ranking_with_truth_at(2)};
  CHECK(recall_at_k(four, {"t", "t", "t", "t"}, 5) == 0.75);
  CHECK_THROWS(recall_at_k(four, {"t"}, 5));
}

TEST_CASE("ndcg_at_k examples") {
  auto ranking_with_truth_at = [](std::size_t rank) {
    Ranking r;
    for (std::size_t i = 1; i <= 12; ++i) r.push_back(i == rank ? "t" : "x" + std::to_string(i));
    return r;
  };
  CHECK(ndcg_at_k({ranking_with_truth_at(1)}, {"t"}, 5) == 1.0);
  CHECK(ndcg_at_k({ranking_with_truth_at(3)}, {"t"}, 5) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(ndcg_at_k({ranking_with_truth_at(11)}, {"t"}, 10) == 0.0);
  for (std::size_t r = 1; r <= 10; ++r) {
    CHECK(ndcg_at_k({ranking_with_truth_at(r)}, {"t"}, 10) == 1.0 / std::log2(static_cast<double>(r) + 1.0));
  }
}

TEST_CASE("recall and ndcg are nondecreasing in K and agree at rank 1") {
  Rng rng(8);
  for (int t = 0; t < 200; ++t) {
    std::vector<Ranking> rankings;
    std::vector<std::string> truths;
    for (int q = 0; q < 5; ++q) {
      Ranking r;
      for (int i = 0; i < 15; ++i) r.push_back("a" + std::to_string(i));
      Rng(rng.next_u64()).shuffle(r);
      rankings.push_back(r);
      truths.push_back("a" + std::to_string(rng.index(20)));
    }
    for (std::size_t K = 1; K < 16; ++K) {
      CHECK(recall_at_k(rankings, truths, K + 1) >= recall_at_k(rankings, truths, K));
      CHECK(ndcg_at_k(rankings, truths, K + 1) >= ndcg_at_k(rankings, truths, K));
      CHECK(ndcg_at_k(rankings, truths, K) <= 1.0);
    }
    CHECK(ndcg_at_k(rankings, truths, 1) == recall_at_k(rankings, truths, 1));
  }
}

TEST_CASE("acc_at_m and random baselines") {
  CHECK(acc_at_m({"a", "b"}, {"a", "b"}) == 1.0);
  CHECK_THROWS(acc_at_m({"a"}, {"a", "b"}));
  Rng rng(4);
  for (std::size_t m : {4u, 10u}) {
    std::vector<std::string> preds, truths;
    for (int i = 0; i < 10000; ++i) {
      preds.push_back(std::to_string(rng.index(m)));
      truths.push_back(std::to_string(rng.index(m)));
    }
    CHECK(std::abs(acc_at_m(preds, truths) - 1.0 / static_cast<double>(m)) <= 0.02);
  }
}

TEST_CASE("alignment_rate: strict comparison, missing ids, rotation invariance") {
  std::map<std::string, Vector> emb;
  emb["a"] = Vector::Unit(2, 0);
  Vector b(2), c(2);
  b << 0.9, std::sqrt(1 - 0.81);
  c << 0.2, std::sqrt(1 - 0.04);
  emb["b"] = b;
  emb["c"] = c;
  CHECK(alignment_rate({{"a", "b", "c"}}, emb) == 1.0);
  CHECK(alignment_rate({{"a", "c", "b"}}, emb) == 0.0);
  emb["d"] = b;
  CHECK(alignment_rate({{"a", "b", "d"}}, emb) == 0.0);  // tie
  try {
    alignment_rate({{"a", "b", "zz"}}, emb);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("zz") != std::string::npos);
  }

  Rng rng(12);
  std::map<std::string, Vector> e2;
  for (int i = 0; i < 30; ++i) e2["n" + std::to_string(i)] = random_unit(rng, 5);
  std::vector<SimilarityTriple> triples;
  for (int i = 0; i < 200; ++i) {
    triples.push_back({"n" + std::to_string(rng.index(30)), "n" + std::to_string(rng.index(30)),
                       "n" + std::to_string(rng.index(30))});
  }
  Matrix A(5, 5);
  for (Eigen::Index i = 0; i < 25; ++i) A.data()[i] = rng.normal();
  const Matrix Q = Eigen::HouseholderQR<Matrix>(A).householderQ();
  std::map<std::string, Vector> rotated;
  for (const auto& [k, v] : e2) rotated[k] = Q * v;
  CHECK(std::abs(alignment_rate(triples, e2) - alignment_rate(triples, rotated)) <= 1e-9);
}

TEST_CASE("hit_rate_at_k: exhaustive window, nearest neighbour, brute force") {
  Rng rng(21);
  const std::size_t n = 60;
  std::vector<std::string> ids;
  Matrix V(static_cast<Eigen::Index>(n), 8);
  for (std::size_t i = 0; i < n; ++i) {
    ids.push_back("a" + std::to_string(100 + i));
    V.row(static_cast<Eigen::Index>(i)) = random_unit(rng, 8).transpose();
  }
  const VectorIndex index(ids, V);
  std::vector<Vector> users;
  std::vector<std::string> truths;
  for (int u = 0; u < 100; ++u) {
    users.push_back(random_unit(rng, 8));
    truths.push_back(ids[rng.index(n)]);
  }
  CHECK(hit_rate_at_k(index, users, truths, n) == 1.0);
  CHECK(hit_rate_at_k(index, users, truths, 1000) == 1.0);

  const Vector q = V.row(7).transpose();
  CHECK(hit_rate_at_k(index, {q}, {ids[7]}, 1) == 1.0);

  double hits = 0;
  for (std::size_t u = 0; u < users.size(); ++u) {
    for (const auto& h : brute_top_k(ids, V, users[u], 10)) hits += h.id == truths[u];
  }
  CHECK(hit_rate_at_k(index, users, truths, 10) == hits / 100.0);
}

TEST_CASE("auc_uauc examples and errors") {
  CHECK(auc_uauc({{"u", "a", 0.9, 1}, {"u", "b", 0.1, 0}}).auc == 1.0);
  CHECK(auc_uauc({{"u", "a", 0.4, 1}, {"u", "b", 0.4, 0}}).auc == 0.5);
  CHECK_THROWS(auc_uauc({{"u", "a", 0.4, 1}, {"u", "b", 0.3, 1}}));
  CHECK_THROWS(auc_uauc({{"u", "a", 0.4, 0}}));
}

TEST_CASE("auc_uauc: three users with 2x2 score tables") {
  const std::vector<ScoredPair> pairs{
      {"u1", "a", 0.9, 1}, {"u1", "b", 0.8, 1}, {"u1", "c", 0.85, 0}, {"u1", "d", 0.1, 0},
      {"u2", "a", 0.3, 1}, {"u2", "b", 0.3, 1}, {"u2", "c", 0.3, 0},  {"u2", "d", 0.7, 0},
      {"u3", "a", 0.2, 1}, {"u3", "b", 0.6, 1}, {"u3", "c", 0.5, 0},  {"u3", "d", 0.4, 0},
  };
  const auto r = auc_uauc(pairs);
  CHECK(r.auc == doctest::Approx(brute_auc(pairs)).epsilon(1e-15));
  double u = 0;
  for (const char* user : {"u1", "u2", "u3"}) {
    std::vector<ScoredPair> sub;
    for (const auto& p : pairs) {
      if (p.user == user) sub.push_back(p);
    }
    u += brute_auc(sub);
  }
  CHECK(r.uauc == doctest::Approx(u / 3.0).epsilon(1e-15));
  CHECK(r.uauc_users == 3);
}

TEST_CASE("auc_uauc matches pairwise counting on random instances") {
  Rng rng(44);
  for (int t = 0; t < 500; ++t) {
    std::vector<ScoredPair> pairs;
    const std::size_t n_users = 1 + rng.index(5);
    for (std::size_t u = 0; u < n_users; ++u) {
      const std::size_t n = 1 + rng.index(6);
      for (std::size_t i = 0; i < n; ++i) {
        pairs.push_back({"u" + std::to_string(u), "i" + std::to_string(i),
                         static_cast<double>(rng.index(5)) / 4.0, rng.bernoulli(0.4) ? 1 : 0});
      }
    }
    bool pos = false, neg = false;
    for (const auto& p : pairs) (p.label ? pos : neg) = true;
    if (!pos || !neg) {
      CHECK_THROWS(auc_uauc(pairs));
      continue;
    }
    const auto r = auc_uauc(pairs);
    CHECK(r.auc == doctest::Approx(brute_auc(pairs)).epsilon(1e-12));
    std::map<std::string, std::vector<ScoredPair>> by_user;
    for (const auto& p : pairs) by_user[p.user].push_back(p);
    double s = 0;
    std::size_t k = 0;
    for (const auto& [user, sub] : by_user) {
      bool up = false, un = false;
      for (const auto& p : sub) (p.label ? up : un) = true;
      if (up && un) {
        s += brute_auc(sub);
        ++k;
      }
    }
    CHECK(r.uauc_users == k);
    if (k > 0) CHECK(r.uauc == doctest::Approx(s / static_cast<double>(k)).epsilon(1e-12));
  }
}

TEST_CASE("EvalReport validation, merge, JSON and markdown") {
  EvalReport a;
  a.acc_m[4] = 0.5;
  a.recall[5] = 0.2;
  a.ndcg[5] = 0.1;
  a.hit_rate[1000] = 1.0;
  a.auc = 0.7;
  a.uauc = 0.65;
  a.counts["queries"] = 10;
  CHECK_NOTHROW(a.validate());

  EvalReport b;
  b.alignment_rate = 0.9;
  b.counts["triples"] = 500;
  a.merge(b);
  CHECK(a.alignment_rate == 0.9);
  CHECK(a.counts.at("triples") == 500);
  CHECK(a.acc_m.at(4) == 0.5);

  const auto back = report_from_json(report_to_json(a));
  CHECK(back.acc_m == a.acc_m);
  CHECK(back.recall == a.recall);
  CHECK(back.alignment_rate == a.alignment_rate);
  CHECK(back.auc == a.auc);
  CHECK(back.counts == a.counts);
  CHECK(report_to_json(back).dump() == report_to_json(a).dump());

  const auto md = report_to_markdown(a);
  CHECK(md.find("Acc_m=4") != std::string::npos);
  CHECK(md.find("A.R.") != std::string::npos);

  EvalReport bad;
  bad.acc_m[4] = 1.2;
  CHECK_THROWS_AS(bad.validate(), DataError);
}
