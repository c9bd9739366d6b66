#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <set>
#include <thread>

#include "mspa/assets.hpp"
#include "mspa/backend.hpp"
#include "mspa/composer.hpp"
#include "mspa/encoder.hpp"
#include "mspa/error.hpp"
#include "mspa/pipeline.hpp"
#include "mspa/rng.hpp"
#include "mspa/synthdata.hpp"

#include <httplib.h>

using namespace mspa;

namespace {

AuthorRecord author(const std::string& id, const std::string& profile, const std::string& region,
                    const std::string& caption = "indoor studio with lamp") {
  AuthorRecord a;
  a.author_id = id;
  a.textual_profile = profile;
  a.visuals = {{"frames/" + id + ".jpg", caption}};
  a.audio_text = "hello";
  a.comments = {"nice"};
  a.region = region;
  return a;
}

Catalog small_catalog() {
  return Catalog({author("a1", "Folk singer from Sichuan", "Sichuan"),
                  author("a2", "Opera singer from Sichuan", "Sichuan"),
                  author("a3", "Guitar player from Sichuan", "Sichuan"),
                  author("a4", "Dancer from Guangdong", "Guangdong", "outdoor market with lanterns")});
}

// Brute-force hashing encoder: tokens are maximal runs of ASCII
// alphanumerics or non-ASCII bytes, lowercased.
Vector reference_hash(const std::string& text, std::size_t d) {
  Vector v = Vector::Zero(static_cast<Eigen::Index>(d));
  std::string tok;
  auto flush = [&] {
    if (!tok.empty()) v[static_cast<Eigen::Index>(fnv1a64(tok) % d)] += 1.0;
    tok.clear();
  };
  for (unsigned char c : text) {
    if (std::isalnum(c) || c >= 0x80) {
      tok += static_cast<char>(c >= 0x80 ? c : std::tolower(c));
    } else {
      flush();
    }
  }
  flush();
  return v;
}

}  // namespace

// ---- bundles and prompts ---------------------------------------------------

TEST_CASE("assemble_author_bundle uses the fixed labeled layout") {
  AuthorRecord a;
  a.author_id = "x";
  a.textual_profile = "hi";
  a.audio_text = "song";
  a.comments = {"gg"};
  CHECK(assemble_author_bundle(a).text_block == "Profile: hi\nAudio: song\nComments: gg");

  a.comments = {"gg", "wow"};
  CHECK(assemble_author_bundle(a).text_block == "Profile: hi\nAudio: song\nComments: gg | wow");
}

TEST_CASE("assemble_author_bundle keeps an empty comments section") {
  AuthorRecord a;
  a.author_id = "x";
  a.textual_profile = "hi";
  a.audio_text = "song";
  const auto text = assemble_author_bundle(a).text_block;
  CHECK(text == "Profile: hi\nAudio: song\nComments:");
}

TEST_CASE("assemble_author_bundle is deterministic and keeps visual order") {
  auto a = author("a1", "p", "r");
  a.visuals.push_back({"frames/second.jpg", std::nullopt});
  const auto b1 = assemble_author_bundle(a);
  const auto b2 = assemble_author_bundle(a);
  CHECK(b1 == b2);
  REQUIRE(b1.visual_parts.size() == 2);
  CHECK(b1.visual_parts[1].path == "frames/second.jpg");
}

TEST_CASE("build_preference_prompt has one ordered part per history author") {
  const auto cat = small_catalog();
  const auto p = build_preference_prompt({"u1", {"a1", "a2", "a3"}, "a4"}, cat);
  CHECK(p.instruction == assets::preference_instruction);
  REQUIRE(p.parts.size() == 3);
  CHECK(p.parts[0].text.find("Folk singer") != std::string::npos);
  CHECK(p.parts[1].text.find("Opera singer") != std::string::npos);
  CHECK(p.parts[2].text.find("Guitar player") != std::string::npos);
  CHECK_FALSE(p.answer_format.empty());
}

TEST_CASE("permuting the history permutes the prompt parts") {
  const auto cat = small_catalog();
  const auto fwd = build_preference_prompt({"u1", {"a1", "a2", "a3"}, "a4"}, cat);
  const auto rev = build_preference_prompt({"u1", {"a3", "a2", "a1"}, "a4"}, cat);
  CHECK(fwd.parts[0].text != rev.parts[0].text);
  CHECK(to_request(fwd, false).messages.size() == to_request(rev, false).messages.size());
  CHECK(prompt_hash(to_request(fwd, false)) != prompt_hash(to_request(rev, false)));
  // Same bundles, different order: the bodies after each "Author i:" label swap.
  auto body = [](const PromptPart& part) { return part.text.substr(part.text.find('\n')); };
  CHECK(body(fwd.parts[0]) == body(rev.parts[2]));
  CHECK(body(fwd.parts[2]) == body(rev.parts[0]));
}

TEST_CASE("build_preference_prompt names an unknown author") {
  const auto cat = small_catalog();
  try {
    build_preference_prompt({"u1", {"a1", "a2", "a9"}, "a4"}, cat);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()) == "unknown author a9");
  }
}

TEST_CASE("to_request forwards images only when the backend accepts them") {
  const auto cat = small_catalog();
  const auto p = build_preference_prompt({"u1", {"a1", "a2", "a3"}, "a4"}, cat);
  auto count = [](const ChatRequest& r, const std::string& type) {
    std::size_t n = 0;
    for (const auto& m : r.messages) {
      for (const auto& c : m.content) n += c.type == type;
    }
    return n;
  };
  CHECK(count(to_request(p, false), "image_ref") == 0);
  CHECK(count(to_request(p, true), "image_ref") == 3);
  // Captions reach text-only backends either way.
  const auto req = to_request(p, false);
  bool caption_seen = false;
  for (const auto& m : req.messages) {
    for (const auto& c : m.content) caption_seen |= c.value.find("indoor studio with lamp") != std::string::npos;
  }
  CHECK(caption_seen);
}

// ---- mock backend ------------------------------------------------------------

TEST_CASE("mock preference text echoes the majority region") {
  const auto cat = small_catalog();
  const MockBackend mock(3);
  const HashingEncoder enc(256);
  const auto p = compose_preference({"u1", {"a1", "a2", "a3"}, "a4"}, cat, mock, enc);
  CHECK(p.preference_text.find("Sichuan") != std::string::npos);
  CHECK(p.preference_text.rfind("This user prefers ", 0) == 0);
  CHECK(is_unit_norm(p.preference_embedding));
  CHECK(p.provenance.backend == mock.identifier());
  CHECK(p.provenance.prompt_hash.size() == 16);
}

TEST_CASE("mock compose_preference is deterministic") {
  const auto cat = small_catalog();
  const MockBackend mock(3);
  const HashingEncoder enc(256);
  const TippingSession s{"u1", {"a1", "a2", "a3"}, "a4"};
  CHECK(compose_preference(s, cat, mock, enc) == compose_preference(s, cat, mock, enc));
}

TEST_CASE("mock outputs are pure functions of the prompt") {
  const auto cat = small_catalog();
  const auto req = to_request(build_preference_prompt({"u1", {"a1", "a2", "a3"}, "a4"}, cat), false);
  const MockBackend m1(1), m2(1);
  CHECK(m1.complete(req) == m2.complete(req));
  ChatRequest unknown = req;
  unknown.messages[0].content[0].value = "Write a poem.";
  CHECK_THROWS_AS(m1.complete(unknown), BackendError);
}

TEST_CASE("mock author card echoes captions and is unique per author") {
  const MockBackend mock(0);
  const auto a = author("a4", "Dancer from Guangdong", "Guangdong", "outdoor market with lanterns");
  const auto card = describe_author(a, mock);
  CHECK(card.find("outdoor market") != std::string::npos);
  CHECK(card.find("a4") != std::string::npos);

  auto twin = a;
  twin.author_id = "a5";
  CHECK(describe_author(twin, mock) != card);
}

TEST_CASE("compose_preference for a single-cluster session lands nearer that cluster") {
  GenConfig g;
  g.num_authors = 160;
  g.num_users = 50;
  g.seed = 5;
  const auto data = generate(g);
  const Catalog cat(data.catalog.records);
  const MockBackend mock(0);
  const HashingEncoder enc(256);
  const auto composed = compose_all(cat, {}, mock, enc, 4, false, true);

  // Oracle: mean cosine between the preference embedding and each cluster's
  // card embeddings, computed by brute force.
  auto mean_cos = [&](const Vector& u, std::size_t cluster) {
    double s = 0.0;
    const auto members = data.catalog.members(cluster);
    for (auto i : members) s += u.dot(composed.card_embeddings.at(data.catalog.records[i].author_id));
    return s / static_cast<double>(members.size());
  };

  const auto members = data.catalog.members(2);
  REQUIRE(members.size() >= 4);
  TippingSession s{"u_probe", {}, data.catalog.records[members[3]].author_id};
  for (std::size_t k = 0; k < 3; ++k) s.history.push_back(data.catalog.records[members[k]].author_id);
  const auto p = compose_preference(s, cat, mock, enc);
  CHECK(mean_cos(p.preference_embedding, 2) > mean_cos(p.preference_embedding, 5));
}

TEST_CASE("author cards sit closest to their own cluster's vocabulary text") {
  GenConfig g;
  g.num_authors = 160;
  g.num_users = 50;
  g.seed = 9;
  const auto data = generate(g);
  const MockBackend mock(0);
  const HashingEncoder enc(256);
  const auto& vocab = Vocabulary::bundled();

  std::vector<Vector> centroid_text;
  for (const auto& cv : vocab.clusters) {
    std::string t = cv.region;
    for (const auto* list : {&cv.keywords, &cv.appearance, &cv.places}) {
      for (const auto& w : *list) t += " " + w;
    }
    centroid_text.push_back(embed_text(t, enc));
  }
  std::size_t own = 0;
  for (std::size_t i = 0; i < data.catalog.records.size(); ++i) {
    const auto e = embed_text(describe_author(data.catalog.records[i], mock), enc);
    std::size_t best = 0;
    for (std::size_t c = 1; c < centroid_text.size(); ++c) {
      if (e.dot(centroid_text[c]) > e.dot(centroid_text[best])) best = c;
    }
    own += best == data.catalog.latent[i].cluster;
  }
  // Off-cluster regions (20% of authors) can pull a card away; the bulk must
  // still side with their own cluster.
  CHECK(static_cast<double>(own) / static_cast<double>(data.catalog.records.size()) >= 0.9);
}

// ---- encoder -------------------------------------------------------------------

TEST_CASE("embed_text is deterministic and unit norm") {
  const HashingEncoder enc(256);
  const auto a = embed_text("Red Hanfu dance, outdoor!", enc);
  CHECK(a == embed_text("Red Hanfu dance, outdoor!", enc));
  CHECK(std::abs(a.norm() - 1.0) <= 1e-6);
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    std::string s;
    const auto len = 1 + rng.index(40);
    for (std::uint64_t k = 0; k < len; ++k) s += static_cast<char>('a' + rng.index(26));
    CHECK(std::abs(embed_text(s, enc).norm() - 1.0) <= 1e-6);
  }
}

TEST_CASE("embed_text on empty or whitespace text raises empty text") {
  const HashingEncoder enc(64);
  for (const char* s : {"", "   ", "\t\n"}) {
    try {
      embed_text(s, enc);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()) == "empty text");
    }
  }
  CHECK_THROWS_AS(embed_text("?!", enc), DataError);
}

TEST_CASE("hashing encoder matches a brute-force reference") {
  const HashingEncoder enc(97);
  for (const char* s : {"red hanfu dance", "Esports SHOOTER commentary 2024", "a-b_c d", "Chéng du"}) {
    const Vector ref = reference_hash(s, 97);
    CHECK(enc.counts(s) == ref);
    CHECK((enc.encode(s) - ref.normalized()).norm() < 1e-15);
  }
}

TEST_CASE("shared tokens order hashing cosines") {
  const HashingEncoder enc(256);
  const auto base = embed_text("red hanfu dance", enc);
  const double near = base.dot(embed_text("red hanfu dancing show", enc));
  const double far = base.dot(embed_text("esports shooter commentary", enc));
  // Oracle from the brute-force counts: two shared tokens versus none.
  const Vector rb = reference_hash("red hanfu dance", 256).normalized();
  CHECK(near == doctest::Approx(rb.dot(reference_hash("red hanfu dancing show", 256).normalized())));
  CHECK(near > far);
}

TEST_CASE("adding a token never lowers its bucket count") {
  const HashingEncoder enc(16);
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    std::string s;
    for (int w = 0; w < 6; ++w) s += "w" + std::to_string(rng.index(30)) + " ";
    const std::string tok = "w" + std::to_string(rng.index(30));
    const auto before = enc.counts(s);
    const auto after = enc.counts(s + tok);
    const auto b = static_cast<Eigen::Index>(enc.bucket(tok));
    CHECK(after[b] >= before[b] + 1.0);
  }
}

TEST_CASE("embeddings cache round-trips and validates kind") {
  const std::vector<EmbeddingRecord> recs{{"u1", "user", Vector::Ones(3).normalized()},
                                          {"a1", "author", Vector::Unit(3, 1)}};
  const auto back = decode_embeddings(encode_embeddings(recs));
  REQUIRE(back.size() == 2);
  CHECK(back[0].id == "u1");
  CHECK(back[0].vector == recs[0].vector);
  CHECK(back[1].kind == "author");
  CHECK_THROWS_AS(decode_embeddings("{\"id\":\"x\",\"kind\":\"item\",\"vector\":[1.0]}\n"), DataError);
}

// ---- bounded parallelism ---------------------------------------------------

TEST_CASE("parallel_map restores input order and bounds concurrency") {
  std::atomic<int> live{0}, peak{0};
  const auto out = parallel_map(64, 4, [&](std::size_t i) {
    const int now = ++live;
    int p = peak.load();
    while (now > p && !peak.compare_exchange_weak(p, now)) {
    }
    std::this_thread::sleep_for(std::chrono::microseconds(200));
    --live;
    return i * i;
  });
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == i * i);
  CHECK(peak.load() <= 4);
}

TEST_CASE("parallel_map rethrows the lowest-index failure") {
  try {
    parallel_map(20, 3, [](std::size_t i) -> int {
      if (i == 7 || i == 15) throw DataError("boom " + std::to_string(i));
      return 0;
    });
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()) == "boom 7");
  }
}

// ---- HTTP backend against an in-process server ------------------------------

namespace {

struct TestServer {
  httplib::Server server;
  int port = 0;
  std::thread thread;

  TestServer() = default;
  void start() {
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~TestServer() {
    server.stop();
    if (thread.joinable()) thread.join();
  }
  std::string url(const std::string& path) const {
    return "http://127.0.0.1:" + std::to_string(port) + path;
  }
};

ChatRequest simple_request() {
  ChatRequest r;
  r.messages = {{"system", {{"text", "be brief"}}},
                {"user", {{"text", "hello"}, {"image_ref", "frames/a.jpg"}}}};
  return r;
}

}  // namespace

TEST_CASE("HTTP backend speaks the chat-completion protocol") {
  TestServer ts;
  nlohmann::json seen;
  std::string auth;
  ts.server.Post("/v1/chat", [&](const httplib::Request& req, httplib::Response& res) {
    seen = nlohmann::json::parse(req.body);
    auth = req.get_header_value("Authorization");
    res.set_content(R"({"text":"a preference"})", "application/json");
  });
  ts.start();

  HttpBackendConfig cfg;
  cfg.endpoint = ts.url("/v1/chat");
  cfg.model = "m-test";
  cfg.temperature = 0.7;
  cfg.seed = 42;
  cfg.timeout_s = 5;
  cfg.api_key = "k123";
  const HttpBackend backend(cfg);
  CHECK(backend.complete(simple_request()) == "a preference");
  CHECK(seen["model"] == "m-test");
  CHECK(seen["temperature"] == 0.7);
  CHECK(seen["seed"] == 42);
  REQUIRE(seen["messages"].size() == 2);
  CHECK(seen["messages"][1]["role"] == "user");
  CHECK(seen["messages"][1]["content"][1]["type"] == "image_ref");
  CHECK(seen["messages"][1]["content"][1]["value"] == "frames/a.jpg");
  CHECK(auth == "Bearer k123");
}

TEST_CASE("HTTP backend retries server errors then succeeds") {
  TestServer ts;
  std::atomic<int> calls{0};
  ts.server.Post("/c", [&](const httplib::Request&, httplib::Response& res) {
    if (++calls < 3) {
      res.status = 503;
      return;
    }
    res.set_content(R"({"text":"ok"})", "application/json");
  });
  ts.start();
  HttpBackendConfig cfg;
  cfg.endpoint = ts.url("/c");
  cfg.model = "m";
  cfg.timeout_s = 5;
  cfg.retries = 3;
  CHECK(HttpBackend(cfg).complete(simple_request()) == "ok");
  CHECK(calls.load() == 3);
}

TEST_CASE("HTTP backend reports a retryable error with the attempt count") {
  TestServer ts;
  std::atomic<int> calls{0};
  ts.server.Post("/c", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 500;
  });
  ts.start();
  HttpBackendConfig cfg;
  cfg.endpoint = ts.url("/c");
  cfg.model = "m";
  cfg.timeout_s = 5;
  cfg.retries = 2;
  try {
    HttpBackend(cfg).complete(simple_request());
    FAIL("expected BackendError");
  } catch (const BackendError& e) {
    CHECK(e.retryable());
    CHECK(e.attempts() == 2);
  }
  CHECK(calls.load() == 2);
}

TEST_CASE("HTTP backend: unreachable endpoint is retryable") {
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  HttpBackendConfig cfg;
  cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/c";
  cfg.model = "m";
  cfg.timeout_s = 1;
  cfg.retries = 2;
  try {
    HttpBackend(cfg).complete(simple_request());
    FAIL("expected BackendError");
  } catch (const BackendError& e) {
    CHECK(e.retryable());
    CHECK(e.attempts() == 2);
  }
}

TEST_CASE("HTTP backend: empty completion and client errors are hard errors") {
  TestServer ts;
  ts.server.Post("/empty", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"text":"  "})", "application/json");
  });
  ts.server.Post("/bad", [](const httplib::Request&, httplib::Response& res) { res.status = 401; });
  ts.start();
  HttpBackendConfig cfg;
  cfg.model = "m";
  cfg.timeout_s = 5;
  cfg.endpoint = ts.url("/empty");
  try {
    HttpBackend(cfg).complete(simple_request());
    FAIL("expected BackendError");
  } catch (const BackendError& e) {
    CHECK_FALSE(e.retryable());
  }
  cfg.endpoint = ts.url("/bad");
  try {
    HttpBackend(cfg).complete(simple_request());
    FAIL("expected BackendError");
  } catch (const BackendError& e) {
    CHECK_FALSE(e.retryable());
  }
}

TEST_CASE("HTTP backend drives compose_preference end to end") {
  TestServer ts;
  ts.server.Post("/c", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"text":"Likes Sichuan folk singers."})", "application/json");
  });
  ts.start();
  HttpBackendConfig cfg;
  cfg.endpoint = ts.url("/c");
  cfg.model = "m";
  cfg.timeout_s = 5;
  const HttpBackend backend(cfg);
  const HashingEncoder enc(64);
  const auto p = compose_preference({"u1", {"a1", "a2", "a3"}, "a4"}, small_catalog(), backend, enc);
  CHECK(p.preference_text == "Likes Sichuan folk singers.");
  CHECK(p.provenance.backend == "http:m");
}

TEST_CASE("HTTP encoder re-normalizes and checks the dimension") {
  TestServer ts;
  ts.server.Post("/e", [](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    if (body["input"] == "short") {
      res.set_content(R"({"embedding":[1.0, 2.0]})", "application/json");
    } else {
      res.set_content(R"({"embedding":[3.0, 0.0, 4.0]})", "application/json");
    }
  });
  ts.start();
  HttpEncoderConfig cfg;
  cfg.endpoint = ts.url("/e");
  cfg.model = "enc";
  cfg.dim = 3;
  cfg.timeout_s = 5;
  const HttpEncoder enc(cfg);
  const auto v = embed_text("some text", enc);
  CHECK(v[0] == doctest::Approx(0.6));
  CHECK(v[2] == doctest::Approx(0.8));
  CHECK_THROWS_AS(enc.encode("short"), BackendError);
}
