#include "mspa/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "mspa/config.hpp"
#include "mspa/error.hpp"
#include "mspa/jsonl.hpp"
#include "mspa/log.hpp"
#include "mspa/pipeline.hpp"
#include "mspa/rng.hpp"

namespace mspa {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

struct AuthorCard {
  AuthorId author_id;
  std::string card;
};

void to_json(json& j, const AuthorCard& c) { j = json{{"author_id", c.author_id}, {"card", c.card}}; }
void from_json(const json& j, AuthorCard& c) {
  j.at("author_id").get_to(c.author_id);
  j.at("card").get_to(c.card);
}

std::string hex64(std::uint64_t v) { return fmt::format("{:016x}", v); }

void require(const fs::path& p) {
  if (!fs::exists(p)) throw DataError("missing input file " + p.string());
}

template <typename T>
std::vector<T> load(const fs::path& p) {
  require(p);
  return read_jsonl<T>(p);
}

void write_json(const fs::path& p, const json& j) { write_file(p, j.dump(2) + "\n"); }

json read_json(const fs::path& p) {
  require(p);
  try {
    return json::parse(read_file(p));
  } catch (const json::exception& e) {
    throw DataError(p.string() + ": " + e.what());
  }
}

struct Splits {
  std::vector<UserId> train, val, test;
};

Splits load_splits(const RunConfig& cfg) {
  const auto j = read_json(cfg.path(cfg.paths.splits));
  Splits s;
  try {
    j.at("train").get_to(s.train);
    j.at("val").get_to(s.val);
    j.at("test").get_to(s.test);
  } catch (const json::exception& e) {
    throw DataError("splits file: " + std::string(e.what()));
  }
  return s;
}

std::set<UserId> split_users(const Splits& s, const std::string& which) {
  std::set<UserId> out;
  auto add = [&](const std::vector<UserId>& v) { out.insert(v.begin(), v.end()); };
  if (which == "train" || which == "all") add(s.train);
  if (which == "val" || which == "heldout" || which == "all") add(s.val);
  if (which == "test" || which == "heldout" || which == "all") add(s.test);
  return out;
}

Catalog load_catalog(const RunConfig& cfg) { return Catalog(load<AuthorRecord>(cfg.path(cfg.paths.catalog))); }

ComposedData load_composed(const RunConfig& cfg, bool users = true, bool authors = true) {
  ComposedData c;
  if (users) {
    for (auto& p : load<PreferenceProfile>(cfg.path(cfg.paths.preferences))) {
      c.preferences.emplace(p.user_id, std::move(p));
    }
  }
  if (authors) {
    for (auto& card : load<AuthorCard>(cfg.path(cfg.paths.cards))) {
      c.cards.emplace(card.author_id, std::move(card.card));
    }
    const auto emb_path = cfg.path(cfg.paths.embeddings);
    require(emb_path);
    for (auto& r : read_embeddings(emb_path)) {
      if (r.kind == "author") c.card_embeddings.emplace(r.id, std::move(r.vector));
    }
  }
  return c;
}

std::map<std::size_t, std::vector<CandidateSet>> candidates_by_m(const RunConfig& cfg,
                                                                 const std::set<UserId>* users) {
  std::map<std::size_t, std::vector<CandidateSet>> out;
  for (auto& s : load<CandidateSet>(cfg.path(cfg.paths.candidates))) {
    if (users && !users->count(s.session_ref)) continue;
    out[s.m()].push_back(std::move(s));
  }
  return out;
}

Policy load_policy(const RunConfig& cfg, bool identity, Eigen::Index dim) {
  if (identity) return Policy::identity(dim, cfg.tau);
  const auto p = policy_from_json(read_json(cfg.path(cfg.paths.policy)));
  if (p.dim() != dim) throw DataError("policy dimension does not match the embeddings");
  return p;
}

Eigen::Index embedding_dim(const ComposedData& c) {
  if (!c.card_embeddings.empty()) return c.card_embeddings.begin()->second.size();
  if (!c.preferences.empty()) return c.preferences.begin()->second.preference_embedding.size();
  throw DataError("no embeddings available");
}

// ---- subcommands -----------------------------------------------------------

void cmd_gen_data(const RunConfig& cfg) {
  fs::create_directories(cfg.out);
  const auto data = generate(cfg.gen);

  std::vector<CandidateSet> sets;
  for (const auto& [m, cd] : data.candidates) {
    sets.insert(sets.end(), cd.sets.begin(), cd.sets.end());
    if (cd.fallbacks > 0) log::warn("hard_negative_fallback", {{"m", m}, {"count", cd.fallbacks}});
  }

  const std::vector<std::pair<std::string, std::string>> files{
      {cfg.paths.catalog, encode_jsonl(data.catalog.records)},
      {cfg.paths.sessions, encode_jsonl(data.sessions.sessions)},
      {cfg.paths.candidates, encode_jsonl(sets)},
      {cfg.paths.triples, encode_jsonl(data.triples)},
      {cfg.paths.splits, json{{"train", data.sessions.train},
                              {"val", data.sessions.val},
                              {"test", data.sessions.test}}
                                 .dump(2) + "\n"},
  };
  ordered_json hashes = ordered_json::object();
  for (const auto& [name, bytes] : files) {
    write_file(cfg.path(name), bytes);
    hashes[fs::path(name).filename().string()] = {{"fnv1a64", hex64(fnv1a64(bytes))},
                                                  {"bytes", bytes.size()}};
  }
  ordered_json manifest;
  manifest["rng"] = kRngAlgorithm;
  manifest["vocab_version"] = Vocabulary::bundled().version;
  manifest["config"] = gen_config_to_json(cfg.gen);
  manifest["counts"] = {{"authors", data.catalog.records.size()},
                        {"sessions", data.sessions.sessions.size()},
                        {"discarded_users", data.sessions.discarded},
                        {"candidate_sets", sets.size()},
                        {"triples", data.triples.size()}};
  manifest["files"] = hashes;
  write_file(cfg.out / "gen_manifest.json", manifest.dump(2) + "\n");
  log::info("gen_data", {{"authors", data.catalog.records.size()},
                         {"sessions", data.sessions.sessions.size()},
                         {"out", cfg.out.string()}});
}

void cmd_compose(const RunConfig& cfg, const std::string& only) {
  const bool users = only != "authors";
  const bool authors = only != "users";
  const auto catalog = load_catalog(cfg);
  std::vector<TippingSession> sessions;
  if (users) sessions = load<TippingSession>(cfg.path(cfg.paths.sessions));
  const auto backend = cfg.make_backend();
  const auto encoder = cfg.make_encoder();
  const auto composed =
      compose_all(catalog, sessions, *backend, *encoder, cfg.backend.max_inflight, users, authors);

  std::vector<EmbeddingRecord> records = composed.embedding_records();
  const auto emb_path = cfg.path(cfg.paths.embeddings);
  if (!(users && authors) && fs::exists(emb_path)) {
    const std::string keep = users ? "author" : "user";
    for (auto& r : read_embeddings(emb_path)) {
      if (r.kind == keep) records.push_back(std::move(r));
    }
  }
  std::stable_sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return a.kind != b.kind ? a.kind > b.kind : false;
  });

  if (users) {
    std::vector<PreferenceProfile> prefs;
    for (const auto& [id, p] : composed.preferences) prefs.push_back(p);
    write_jsonl(cfg.path(cfg.paths.preferences), prefs);
  }
  if (authors) {
    std::vector<AuthorCard> cards;
    for (const auto& [id, text] : composed.cards) cards.push_back({id, text});
    write_jsonl(cfg.path(cfg.paths.cards), cards);
  }
  write_embeddings(emb_path, records);
  log::info("compose", {{"backend", backend->identifier()},
                        {"encoder", encoder->identifier()},
                        {"users", composed.preferences.size()},
                        {"authors", composed.cards.size()}});
}

void cmd_train(const RunConfig& cfg) {
  const auto splits = load_splits(cfg);
  const auto train_users = split_users(splits, "train");
  const auto val_users = split_users(splits, "val");
  const auto composed = load_composed(cfg);
  auto by_m = candidates_by_m(cfg, nullptr);
  std::vector<CandidateSet> train_sets, val_sets;
  for (auto& s : by_m[cfg.train_m]) {
    if (train_users.count(s.session_ref)) train_sets.push_back(std::move(s));
    else if (val_users.count(s.session_ref)) val_sets.push_back(std::move(s));
  }
  if (train_sets.empty()) {
    throw DataError(fmt::format("no training candidate sets with m={}", cfg.train_m));
  }
  const auto train_ex = make_examples(train_sets, composed);
  const auto val_ex = make_examples(val_sets, composed);
  const auto initial = Policy::identity(embedding_dim(composed), cfg.tau);

  auto hook = [&](std::size_t step, const Policy& p) {
    log::info("eval", {{"step", step},
                       {"train_acc", greedy_accuracy(p, train_ex)},
                       {"val_acc", greedy_accuracy(p, val_ex)}});
  };
  const auto result = train(initial, train_ex, make_reward_fn(cfg.weights(), cfg.reward.required_phrases),
                            cfg.grpo, hook);

  std::string lines;
  for (const auto& s : result.stats) lines += to_json_value(s).dump() + "\n";
  fs::create_directories(cfg.out);
  write_file(cfg.out / "train_stats.jsonl", lines);
  write_json(cfg.path(cfg.paths.policy), policy_to_json(result.policy));
  log::info("train", {{"steps", cfg.grpo.steps}, {"examples", train_ex.size()}});
}

void cmd_recommend(const RunConfig& cfg, const std::string& session, std::size_t m, bool llm,
                   bool identity, std::ostream& out) {
  const auto by_m = candidates_by_m(cfg, nullptr);
  const CandidateSet* set = nullptr;
  if (auto it = by_m.find(m); it != by_m.end()) {
    for (const auto& s : it->second) {
      if (s.session_ref == session) set = &s;
    }
  }
  if (!set) throw DataError(fmt::format("session {} not found in candidates (m={})", session, m));
  const auto composed = load_composed(cfg);
  const auto ctx = make_context(*set, composed);

  PolicyOutput o;
  std::string source;
  if (llm) {
    const auto backend = cfg.make_backend();
    o = llm_policy_recommend(ctx, *backend);
    source = backend->identifier();
  } else {
    const auto policy = load_policy(cfg, identity, embedding_dim(composed));
    o.choice_index = greedy_choice(policy, ctx);
    o.explanation = templated_explanation(ctx, o.choice_index);
    o.log_prob = std::log(choice_probabilities(policy, ctx)[static_cast<Eigen::Index>(o.choice_index)]);
    source = identity ? "identity" : "policy";
  }
  ordered_json j;
  j["session"] = session;
  j["chosen"] = ctx.ids[o.choice_index];
  j["label"] = std::string(1, candidate_label(o.choice_index));
  j["explanation"] = o.explanation;
  j["log_prob"] = o.log_prob;
  j["source"] = source;
  out << j.dump() << "\n";
}

U2AInputs eval_inputs(const RunConfig& cfg, const std::set<UserId>& users,
                      std::vector<TippingSession>& sessions_store) {
  for (auto& s : load<TippingSession>(cfg.path(cfg.paths.sessions))) {
    if (users.count(s.user_id)) sessions_store.push_back(std::move(s));
  }
  U2AInputs in;
  in.sessions = &sessions_store;
  auto by_m = candidates_by_m(cfg, &users);
  for (auto m : cfg.eval.m_list) {
    auto it = by_m.find(m);
    if (it == by_m.end() || it->second.empty()) {
      log::warn("no_candidate_sets", {{"m", m}});
      continue;
    }
    in.candidates[m] = std::move(it->second);
  }
  in.k_list = cfg.eval.k_list;
  in.hit_k = cfg.eval.hit_k;
  return in;
}

void cmd_eval_u2a(const RunConfig& cfg, bool identity) {
  const auto users = split_users(load_splits(cfg), cfg.eval.split);
  std::vector<TippingSession> sessions;
  const auto in = eval_inputs(cfg, users, sessions);
  const auto composed = load_composed(cfg);
  const auto policy = load_policy(cfg, identity, embedding_dim(composed));
  auto report = evaluate_u2a(policy, in, composed);
  report.validate();
  fs::create_directories(cfg.out);
  write_json(cfg.out / "eval_u2a.json", report_to_json(report));
  for (const auto& [m, acc] : report.acc_m) log::info("eval_u2a", {{"m", m}, {"acc", acc}});
}

void cmd_eval_a2a(const RunConfig& cfg) {
  const auto triples = load<SimilarityTriple>(cfg.path(cfg.paths.triples));
  const auto composed = load_composed(cfg, false, true);
  auto report = evaluate_a2a(triples, composed);
  report.validate();
  fs::create_directories(cfg.out);
  write_json(cfg.out / "eval_a2a.json", report_to_json(report));
  log::info("eval_a2a", {{"alignment_rate", *report.alignment_rate}, {"triples", triples.size()}});
}

void cmd_retrieve(const RunConfig& cfg, const std::string& query, std::size_t k, bool identity,
                  std::ostream& out) {
  const auto composed = load_composed(cfg);
  const auto dim = embedding_dim(composed);
  Vector q;
  if (auto pit = composed.preferences.find(query); pit != composed.preferences.end()) {
    const auto policy = load_policy(cfg, identity, dim);
    q = policy.W.transpose() * pit->second.preference_embedding;
  } else if (auto ait = composed.card_embeddings.find(query); ait != composed.card_embeddings.end()) {
    q = ait->second;
  } else {
    throw DataError("unknown query id " + query);
  }
  const double n = q.norm();
  if (!(n > 0.0)) throw DataError("query " + query + " maps to a zero vector");
  std::vector<std::string> ids;
  Matrix vectors(static_cast<Eigen::Index>(composed.card_embeddings.size()), dim);
  Eigen::Index row = 0;
  for (const auto& [id, v] : composed.card_embeddings) {
    ids.push_back(id);
    vectors.row(row++) = v.transpose();
  }
  const VectorIndex index(std::move(ids), std::move(vectors));
  std::size_t rank = 1;
  for (const auto& hit : index.top_k(q / n, k)) {
    out << fmt::format("{}\t{}\t{:.6f}\n", rank++, hit.id, hit.score);
  }
}

void cmd_report(const RunConfig& cfg) {
  EvalReport merged;
  std::size_t found = 0;
  for (const char* name : {"eval_u2a.json", "eval_a2a.json"}) {
    const auto p = cfg.out / name;
    if (!fs::exists(p)) continue;
    merged.merge(report_from_json(read_json(p)));
    ++found;
  }
  if (found == 0) throw DataError("no eval_u2a.json or eval_a2a.json in " + cfg.out.string());
  merged.validate();
  write_json(cfg.out / "eval_report.json", report_to_json(merged));
  write_file(cfg.out / "eval_report.md", report_to_markdown(merged));
  log::info("report", {{"inputs", found}});
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out) {
  CLI::App app{"Multimodal preference alignment toolkit: synthetic data, GRPO training, evaluation"};
  app.name("mspa");
  app.require_subcommand(1);

  ConfigSources src;
  std::string config_file;
  std::uint64_t seed = 0;
  std::string out_dir;
  app.add_option("--config", config_file, "JSON config file")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "Top-level seed");
  auto* out_opt = app.add_option("--out", out_dir, "Output directory");
  app.add_option("--set", src.sets, "Override section.key=value")->take_all();
  app.fallthrough();

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic dataset");
  std::string only = "both";
  auto* compose = app.add_subcommand("compose", "Compose preference profiles and author cards");
  compose->add_option("--only", only, "users, authors or both")
      ->check(CLI::IsMember({"users", "authors", "both"}));
  auto* train_cmd = app.add_subcommand("train", "Train the linear policy with GRPO");

  std::string session;
  std::size_t rec_m = 0;
  bool llm = false;
  bool identity = false;
  auto* recommend = app.add_subcommand("recommend", "Recommend one author for a session");
  recommend->add_option("--session", session, "User id of the session")->required();
  recommend->add_option("--m", rec_m, "Candidate set size (default train.m)");
  recommend->add_flag("--llm", llm, "Ask the completion backend instead of the trained policy");
  recommend->add_flag("--identity", identity, "Use the untrained policy W = I");

  auto* eval_u2a = app.add_subcommand("eval-u2a", "User-to-author evaluation");
  eval_u2a->add_flag("--identity", identity, "Evaluate the untrained policy W = I");
  auto* eval_a2a = app.add_subcommand("eval-a2a", "Author-to-author alignment rate");

  std::string query;
  std::size_t k = 10;
  auto* retrieve = app.add_subcommand("retrieve", "Top-K authors for a user or author id");
  retrieve->add_option("--query", query, "User or author id")->required();
  retrieve->add_option("--k", k, "Number of results")->check(CLI::PositiveNumber);
  retrieve->add_flag("--identity", identity, "Use the untrained policy W = I");

  auto* report = app.add_subcommand("report", "Merge evaluation outputs into eval_report.json");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    src.file = config_file;
    if (seed_opt->count() > 0) src.seed = seed;
    if (out_opt->count() > 0) src.out = out_dir;
    const auto cfg = load_config(src);

    if (gen->parsed()) cmd_gen_data(cfg);
    else if (compose->parsed()) cmd_compose(cfg, only);
    else if (train_cmd->parsed()) cmd_train(cfg);
    else if (recommend->parsed()) cmd_recommend(cfg, session, rec_m ? rec_m : cfg.train_m, llm, identity, out);
    else if (eval_u2a->parsed()) cmd_eval_u2a(cfg, identity);
    else if (eval_a2a->parsed()) cmd_eval_a2a(cfg);
    else if (retrieve->parsed()) cmd_retrieve(cfg, query, k, identity, out);
    else if (report->parsed()) cmd_report(cfg);
    return 0;
  } catch (const UsageError& e) {
    log::error("usage", {{"message", e.what()}});
    return 1;
  } catch (const BackendError& e) {
    log::error("backend", {{"message", e.what()}, {"retryable", e.retryable()}});
    return 2;
  } catch (const std::exception& e) {
    log::error("data", {{"message", e.what()}});
    return 2;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args);
}

}  // namespace mspa
