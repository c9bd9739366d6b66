#include "mspa/config.hpp"

#include <cstdlib>
#include <set>

#include "mspa/error.hpp"
#include "mspa/jsonl.hpp"
#include "mspa/rng.hpp"

namespace mspa {

using nlohmann::json;

std::filesystem::path RunConfig::path(const std::string& p) const {
  const std::filesystem::path fp(p);
  return fp.is_absolute() ? fp : out / fp;
}

std::unique_ptr<CompletionBackend> RunConfig::make_backend() const {
  if (backend.kind == "mock") return std::make_unique<MockBackend>(backend.seed, encoder.dim);
  HttpBackendConfig c;
  c.endpoint = backend.endpoint;
  c.model = backend.model;
  c.temperature = backend.temperature;
  c.seed = backend.seed;
  c.timeout_s = backend.timeout_s;
  c.retries = backend.retries;
  c.images = backend.images;
  c.api_key = api_key;
  return std::make_unique<HttpBackend>(std::move(c));
}

std::unique_ptr<TextEncoder> RunConfig::make_encoder() const {
  if (encoder.kind == "hash") return std::make_unique<HashingEncoder>(encoder.dim);
  HttpEncoderConfig c;
  c.endpoint = encoder.endpoint;
  c.model = encoder.model;
  c.dim = encoder.dim;
  c.timeout_s = backend.timeout_s;
  c.retries = backend.retries;
  c.api_key = api_key;
  return std::make_unique<HttpEncoder>(std::move(c));
}

void RunConfig::validate() const {
  gen.validate();
  if (backend.kind != "mock" && backend.kind != "http") {
    throw UsageError("backend.kind must be mock or http");
  }
  if (backend.kind == "http" && (backend.endpoint.empty() || backend.model.empty())) {
    throw UsageError("backend.endpoint and backend.model are required for the http backend");
  }
  if (backend.max_inflight == 0) throw UsageError("backend.max_inflight must be positive");
  if (encoder.kind != "hash" && encoder.kind != "http") {
    throw UsageError("encoder.kind must be hash or http");
  }
  if (encoder.kind == "http" && encoder.endpoint.empty()) {
    throw UsageError("encoder.endpoint is required for the http encoder");
  }
  if (encoder.dim == 0) throw UsageError("encoder.dim must be positive");
  weights();
  if (!(tau > 0.0 && tau <= 100.0)) throw UsageError("policy.tau must lie in (0, 100]");
  grpo.validate();
  if (train_m < 2) throw UsageError("train.m must be at least 2");
  static const std::set<std::string> splits{"train", "val", "test", "heldout", "all"};
  if (!splits.count(eval.split)) throw UsageError("eval.split must be train, val, test, heldout or all");
  for (auto k : eval.k_list) {
    if (k == 0) throw UsageError("eval.k_list entries must be positive");
  }
  for (auto k : eval.hit_k) {
    if (k == 0) throw UsageError("eval.hit_k entries must be positive");
  }
}

json config_to_json(const RunConfig& c) {
  return {
      {"seed", c.seed},
      {"out", c.out.string()},
      {"gen", gen_config_to_json(c.gen)},
      {"backend",
       {{"kind", c.backend.kind},
        {"endpoint", c.backend.endpoint},
        {"model", c.backend.model},
        {"seed", c.backend.seed},
        {"temperature", c.backend.temperature},
        {"max_inflight", c.backend.max_inflight},
        {"timeout_s", c.backend.timeout_s},
        {"retries", c.backend.retries},
        {"images", c.backend.images}}},
      {"encoder",
       {{"kind", c.encoder.kind},
        {"dim", c.encoder.dim},
        {"endpoint", c.encoder.endpoint},
        {"model", c.encoder.model}}},
      {"reward",
       {{"lambda1", c.reward.lambda1},
        {"lambda2", c.reward.lambda2},
        {"required_phrases", c.reward.required_phrases}}},
      {"policy", {{"tau", c.tau}}},
      {"grpo",
       {{"group_size", c.grpo.group_size},
        {"clip_eps", c.grpo.clip_eps},
        {"kl_beta", c.grpo.kl_beta},
        {"learning_rate", c.grpo.learning_rate},
        {"steps", c.grpo.steps},
        {"batch_size", c.grpo.batch_size},
        {"eps_std", c.grpo.eps_std},
        {"seed", c.grpo.seed},
        {"eval_every", c.grpo.eval_every}}},
      {"train", {{"m", c.train_m}}},
      {"eval",
       {{"k_list", c.eval.k_list},
        {"m_list", c.eval.m_list},
        {"hit_k", c.eval.hit_k},
        {"split", c.eval.split}}},
      {"paths",
       {{"catalog", c.paths.catalog},
        {"sessions", c.paths.sessions},
        {"candidates", c.paths.candidates},
        {"triples", c.paths.triples},
        {"splits", c.paths.splits},
        {"preferences", c.paths.preferences},
        {"cards", c.paths.cards},
        {"embeddings", c.paths.embeddings},
        {"policy", c.paths.policy}}},
  };
}

namespace {

// Writes `value` at `key` ("section.name" or a top-level name), rejecting
// keys the defaults do not have.
void assign(json& doc, const std::string& key, const json& value, std::set<std::string>& given) {
  const auto dot = key.find('.');
  if (dot == std::string::npos) {
    if (!doc.contains(key) || doc[key].is_object()) throw UsageError("unknown config key: " + key);
    doc[key] = value;
  } else {
    const auto section = key.substr(0, dot);
    const auto name = key.substr(dot + 1);
    if (!doc.contains(section) || !doc[section].is_object() || !doc[section].contains(name)) {
      throw UsageError("unknown config key: " + key);
    }
    doc[section][name] = value;
  }
  given.insert(key);
}

void apply_file(json& doc, const json& file, std::set<std::string>& given) {
  if (!file.is_object()) throw UsageError("config file must hold a JSON object");
  for (const auto& [k, v] : file.items()) {
    if (v.is_object()) {
      for (const auto& [name, sub] : v.items()) assign(doc, k + "." + name, sub, given);
    } else {
      assign(doc, k, v, given);
    }
  }
}

template <typename T>
T read(const json& j, const char* section, const char* key) {
  try {
    return j.at(section).at(key).get<T>();
  } catch (const json::exception&) {
    throw UsageError(std::string("invalid value for ") + section + "." + key);
  }
}

}  // namespace

RunConfig load_config(const ConfigSources& src) {
  json doc = config_to_json(RunConfig{});
  std::set<std::string> given;

  if (!src.file.empty()) {
    json file;
    try {
      file = json::parse(read_file(src.file));
    } catch (const json::exception& e) {
      throw UsageError("cannot parse config " + src.file.string() + ": " + e.what());
    } catch (const DataError& e) {
      throw UsageError(e.what());
    }
    apply_file(doc, file, given);
  }
  if (src.seed) assign(doc, "seed", *src.seed, given);
  if (src.out) assign(doc, "out", src.out->string(), given);
  for (const auto& s : src.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects section.key=value, got " + s);
    const auto key = s.substr(0, eq);
    const auto raw = s.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    assign(doc, key, value, given);
  }

  RunConfig c;
  try {
    c.seed = doc.at("seed").get<std::uint64_t>();
    c.out = doc.at("out").get<std::string>();
  } catch (const json::exception&) {
    throw UsageError("seed must be a non-negative integer and out a string");
  }
  const Rng root(c.seed);
  if (!given.count("gen.seed")) doc["gen"]["seed"] = root.substream("gen").key();
  if (!given.count("grpo.seed")) doc["grpo"]["seed"] = root.substream("train").key();
  if (!given.count("backend.seed")) doc["backend"]["seed"] = root.substream("sample").key();

  c.gen = gen_config_from_json(doc.at("gen"));

  c.backend.kind = read<std::string>(doc, "backend", "kind");
  c.backend.endpoint = read<std::string>(doc, "backend", "endpoint");
  c.backend.model = read<std::string>(doc, "backend", "model");
  c.backend.seed = read<std::uint64_t>(doc, "backend", "seed");
  c.backend.temperature = read<double>(doc, "backend", "temperature");
  c.backend.max_inflight = read<std::size_t>(doc, "backend", "max_inflight");
  c.backend.timeout_s = read<int>(doc, "backend", "timeout_s");
  c.backend.retries = read<int>(doc, "backend", "retries");
  c.backend.images = read<bool>(doc, "backend", "images");

  c.encoder.kind = read<std::string>(doc, "encoder", "kind");
  c.encoder.dim = read<std::size_t>(doc, "encoder", "dim");
  c.encoder.endpoint = read<std::string>(doc, "encoder", "endpoint");
  c.encoder.model = read<std::string>(doc, "encoder", "model");

  c.reward.lambda1 = read<double>(doc, "reward", "lambda1");
  c.reward.lambda2 = read<double>(doc, "reward", "lambda2");
  c.reward.required_phrases = read<std::vector<std::string>>(doc, "reward", "required_phrases");

  c.tau = read<double>(doc, "policy", "tau");

  c.grpo.group_size = read<std::size_t>(doc, "grpo", "group_size");
  c.grpo.clip_eps = read<double>(doc, "grpo", "clip_eps");
  c.grpo.kl_beta = read<double>(doc, "grpo", "kl_beta");
  c.grpo.learning_rate = read<double>(doc, "grpo", "learning_rate");
  c.grpo.steps = read<std::size_t>(doc, "grpo", "steps");
  c.grpo.batch_size = read<std::size_t>(doc, "grpo", "batch_size");
  c.grpo.eps_std = read<double>(doc, "grpo", "eps_std");
  c.grpo.seed = read<std::uint64_t>(doc, "grpo", "seed");
  c.grpo.eval_every = read<std::size_t>(doc, "grpo", "eval_every");

  c.train_m = read<std::size_t>(doc, "train", "m");

  c.eval.k_list = read<std::vector<std::size_t>>(doc, "eval", "k_list");
  c.eval.m_list = read<std::vector<std::size_t>>(doc, "eval", "m_list");
  c.eval.hit_k = read<std::vector<std::size_t>>(doc, "eval", "hit_k");
  c.eval.split = read<std::string>(doc, "eval", "split");

  c.paths.catalog = read<std::string>(doc, "paths", "catalog");
  c.paths.sessions = read<std::string>(doc, "paths", "sessions");
  c.paths.candidates = read<std::string>(doc, "paths", "candidates");
  c.paths.triples = read<std::string>(doc, "paths", "triples");
  c.paths.splits = read<std::string>(doc, "paths", "splits");
  c.paths.preferences = read<std::string>(doc, "paths", "preferences");
  c.paths.cards = read<std::string>(doc, "paths", "cards");
  c.paths.embeddings = read<std::string>(doc, "paths", "embeddings");
  c.paths.policy = read<std::string>(doc, "paths", "policy");

  if (const char* key = std::getenv("MSPA_API_KEY")) c.api_key = key;
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return c;
}

}  // namespace mspa
