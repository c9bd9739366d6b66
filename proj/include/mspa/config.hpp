#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mspa/backend.hpp"
#include "mspa/encoder.hpp"
#include "mspa/grpo.hpp"
#include "mspa/rewards.hpp"
#include "mspa/synthdata.hpp"

namespace mspa {

struct BackendSettings {
  std::string kind = "mock";  // mock | http
  std::string endpoint;
  std::string model;
  std::uint64_t seed = 0;
  double temperature = 0.0;
  std::size_t max_inflight = 4;
  int timeout_s = 60;
  int retries = 3;
  bool images = false;
};

struct EncoderSettings {
  std::string kind = "hash";  // hash | http
  std::size_t dim = 256;
  std::string endpoint;
  std::string model;
};

struct RewardSettings {
  double lambda1 = 0.5;
  double lambda2 = 0.2;
  std::vector<std::string> required_phrases = default_required_phrases();
};

struct EvalSettings {
  std::vector<std::size_t> k_list{5, 10};
  std::vector<std::size_t> m_list{4, 10};
  std::vector<std::size_t> hit_k{1000};
  std::string split = "test";  // train | val | test | heldout (val + test) | all
};

// Input and output file locations. Relative paths resolve against `out`.
struct PathSettings {
  std::string catalog = "catalog.jsonl";
  std::string sessions = "sessions.jsonl";
  std::string candidates = "candidates.jsonl";
  std::string triples = "triples.jsonl";
  std::string splits = "splits.json";
  std::string preferences = "preferences.jsonl";
  std::string cards = "author_cards.jsonl";
  std::string embeddings = "embeddings.jsonl";
  std::string policy = "policy_W.json";
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out = "run";
  GenConfig gen;
  BackendSettings backend;
  EncoderSettings encoder;
  RewardSettings reward;
  double tau = 1.0;  // policy.tau
  GrpoConfig grpo;
  std::size_t train_m = 4;
  EvalSettings eval;
  PathSettings paths;
  std::string api_key;  // MSPA_API_KEY, never serialized

  std::filesystem::path path(const std::string& p) const;
  RewardWeights weights() const { return RewardWeights(reward.lambda1, reward.lambda2); }
  std::unique_ptr<CompletionBackend> make_backend() const;
  std::unique_ptr<TextEncoder> make_encoder() const;
  void validate() const;
};

nlohmann::json config_to_json(const RunConfig& cfg);

struct ConfigSources {
  std::filesystem::path file;        // empty: none
  std::vector<std::string> sets;     // "section.key=value"
  std::optional<std::uint64_t> seed;  // --seed
  std::optional<std::filesystem::path> out;
};

/// Defaults, then the config file, then --seed/--out/--set. The top-level
/// seed derives gen.seed, grpo.seed and backend.seed from the substreams
/// "gen", "train" and "sample" unless those keys are given explicitly.
RunConfig load_config(const ConfigSources& src);

}  // namespace mspa
