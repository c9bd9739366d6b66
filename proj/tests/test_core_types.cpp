#include <doctest.h>

#include <cmath>
#include <set>

#include "mspa/error.hpp"
#include "mspa/jsonl.hpp"
#include "mspa/linalg.hpp"
#include "mspa/rng.hpp"
#include "mspa/types.hpp"

using namespace mspa;

namespace {

AuthorRecord full_author(const std::string& id) {
  AuthorRecord a;
  a.author_id = id;
  a.textual_profile = "Nickname: " + id + ". Sings folk songs.";
  a.visuals = {{"frames/" + id + "_0.jpg", std::string("outdoor market with red hanfu")},
               {"frames/" + id + "_1.jpg", std::nullopt}};
  a.audio_text = "welcome to the stream";
  a.comments = {"great voice", "encore"};
  a.region = "Sichuan";
  return a;
}

AuthorRecord empty_author(const std::string& id) {
  AuthorRecord a;
  a.author_id = id;
  a.visuals = {{"frames/x.jpg", std::nullopt}};
  return a;
}

}  // namespace

TEST_CASE("validate_catalog rejects an author with no textual signal") {
  const auto report = validate_catalog({full_author("a1"), empty_author("a2"), full_author("a3")});
  REQUIRE(report.rejected.size() == 1);
  CHECK(report.rejected[0].author_id == "a2");
  CHECK(report.rejected[0].reason == "no textual signal");
  CHECK(report.accepted.size() == 2);
}

TEST_CASE("validate_catalog: duplicate id is a hard error naming the id") {
  try {
    validate_catalog({full_author("a1"), full_author("a1")});
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("a1") != std::string::npos);
  }
}

TEST_CASE("validate_catalog accepts a fully populated catalog") {
  const auto report = validate_catalog({full_author("a1"), full_author("a2"), full_author("a3")});
  CHECK(report.accepted.size() == 3);
  CHECK(report.rejected.empty());
}

TEST_CASE("validate_catalog is idempotent on the accepted subset") {
  auto caption_only = empty_author("a4");
  caption_only.visuals[0].caption = "indoor studio";
  const auto first =
      validate_catalog({full_author("a1"), empty_author("a2"), full_author("a3"), caption_only});
  CHECK(first.accepted.size() == 3);
  const auto second = validate_catalog(first.accepted);
  CHECK(second.rejected.empty());
  CHECK(second.accepted == first.accepted);
}

TEST_CASE("validate_catalog rejects an empty id") {
  const auto report = validate_catalog({full_author("")});
  REQUIRE(report.rejected.size() == 1);
  CHECK(report.rejected[0].reason == "empty author id");
}

TEST_CASE("Catalog lookup and duplicate detection") {
  Catalog cat({full_author("b"), full_author("a")});
  CHECK(cat.contains("a"));
  CHECK_FALSE(cat.contains("c"));
  CHECK(cat.at("b").author_id == "b");
  CHECK(cat.records()[0].author_id == "b");
  CHECK_THROWS_AS(cat.at("c"), DataError);
  CHECK_THROWS_AS(Catalog({full_author("a"), full_author("a")}), DataError);
}

TEST_CASE("check_session enforces the session invariants") {
  Catalog cat({full_author("a1"), full_author("a2"), full_author("a3"), full_author("a4")});
  CHECK_NOTHROW(check_session({"u1", {"a1", "a2", "a3"}, "a4"}, cat));
  CHECK_THROWS_AS(check_session({"u1", {"a1", "a2"}, "a4"}, cat), DataError);
  CHECK_THROWS_AS(check_session({"u1", {"a1", "a2", "a3"}, "a3"}, cat), DataError);
  CHECK_THROWS_AS(check_session({"u1", {"a1", "a2", "a9"}, "a4"}, cat), DataError);
}

TEST_CASE("serialization round-trips every type field for field") {
  const auto a = full_author("a1");
  CHECK(decode_jsonl<AuthorRecord>(encode_jsonl(std::vector{a}))[0] == a);

  auto sparse = full_author("a2");
  sparse.region.reset();
  sparse.comments.clear();
  CHECK(decode_jsonl<AuthorRecord>(encode_jsonl(std::vector{sparse}))[0] == sparse);

  const TippingSession s{"u1", {"a3", "a1", "a2"}, "a4"};
  CHECK(decode_jsonl<TippingSession>(encode_jsonl(std::vector{s}))[0] == s);

  const CandidateSet c{"u1", {"a7", "a4", "a2", "a9"}, 1};
  CHECK(decode_jsonl<CandidateSet>(encode_jsonl(std::vector{c}))[0] == c);

  PreferenceProfile p;
  p.user_id = "u1";
  p.preference_text = "This user prefers Sichuan authors.";
  p.preference_embedding = Vector::Random(16).normalized();
  p.preference_embedding[3] = 0.1 + 1e-17;  // exercise full double precision
  p.provenance = {"mock/seed=3", "00ff"};
  CHECK(decode_jsonl<PreferenceProfile>(encode_jsonl(std::vector{p}))[0] == p);

  const Recommendation r{"a2", "{\"Answer\":\"B\"}", "prose {\"Answer\":\"B\"}"};
  CHECK(decode_jsonl<Recommendation>(encode_jsonl(std::vector{r}))[0] == r);

  const SimilarityTriple t{"a1", "a2", "a3"};
  CHECK(decode_jsonl<SimilarityTriple>(encode_jsonl(std::vector{t}))[0] == t);
}

TEST_CASE("JSONL uses the snake_case field names") {
  const auto j = nlohmann::json(full_author("a1"));
  for (const char* key : {"author_id", "textual_profile", "visuals", "audio_text", "comments", "region"}) {
    CHECK(j.contains(key));
  }
  const auto c = nlohmann::json(CandidateSet{"u1", {"a1", "a2"}, 0});
  CHECK(c.contains("session_ref"));
  CHECK(c.contains("candidates"));
  CHECK(c.contains("truth_index"));
}

TEST_CASE("decode_jsonl reports the failing line") {
  try {
    decode_jsonl<TippingSession>("{\"user_id\":\"u\",\"history\":[],\"ground_truth\":\"a\"}\n{oops}\n",
                                 "sessions.jsonl");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("sessions.jsonl:2") != std::string::npos);
  }
}

TEST_CASE("CandidateSet from_json rejects a truth index outside the list") {
  const auto j = nlohmann::json::parse(R"({"session_ref":"u","candidates":["a","b"],"truth_index":2})");
  CHECK_THROWS(j.get<CandidateSet>());
}

TEST_CASE("linalg helpers") {
  Vector x(3);
  x << 1000.0, 1000.0, 999.0;
  CHECK(softmax(x).sum() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(log_sum_exp(x) == doctest::Approx(1000.0 + std::log(2.0 + std::exp(-1.0))));
  Vector a(2), b(2);
  a << 3.0, 4.0;
  b << 4.0, -3.0;
  CHECK(cosine(a, b) == doctest::Approx(0.0));
  CHECK(is_unit_norm(a.normalized()));
  CHECK_FALSE(is_unit_norm(a));
}

TEST_CASE("Rng is a pure function of its seed and substream names") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 10; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    CHECK(x != c.next_u64());
  }
  CHECK(Rng(42).substream("gen").next_u64() == Rng(42).substream("gen").next_u64());
  CHECK(Rng(42).substream("gen").key() != Rng(42).substream("train").key());
  CHECK(Rng(42).substream(0).key() != Rng(42).substream(1).key());
}

TEST_CASE("Rng distributions have the expected moments") {
  Rng r(7);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0;
  std::vector<int> counts(5, 0);
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    su += u;
    const double z = r.normal();
    sn += z;
    sn2 += z * z;
    ++counts[r.index(5)];
  }
  CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(std::abs(sn / n) < 0.01);
  CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.02));
  for (int k : counts) CHECK(std::abs(k - n / 5) < 4 * std::sqrt(n * 0.2 * 0.8));
}

TEST_CASE("Rng shuffle is a permutation") {
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  Rng r(1);
  r.shuffle(v);
  CHECK(std::set<int>(v.begin(), v.end()).size() == 10);
}

TEST_CASE("fnv1a64 reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}
