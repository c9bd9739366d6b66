#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mspa/encoder.hpp"
#include "mspa/vocab.hpp"

namespace mspa {

struct ContentItem {
  std::string type;  // "text" | "image_ref"
  std::string value;

  bool operator==(const ContentItem&) const = default;
};

struct ChatMessage {
  std::string role;
  std::vector<ContentItem> content;

  bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  std::uint64_t seed = 0;
};

// Wire body for the chat-completion protocol (model filled by the caller).
nlohmann::json request_to_json(const ChatRequest& req, const std::string& model);

/// Stand-in for the multimodal language model.
class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  virtual std::string identifier() const = 0;
  virtual bool accepts_images() const = 0;
  virtual std::string complete(const ChatRequest& req) const = 0;
};

// Deterministic offline backend. It recognises the three bundled
// instructions (preference extraction, author card, recommendation) and
// answers each from the prompt content alone:
//   preference      "This user prefers {region} authors, {keyword} content,
//                    and {indoor|outdoor} scenes." by token-frequency majority
//   author card     id, region, keywords and captions echoed from the bundle
//   recommendation  JSON answer naming the candidate whose text embedding has
//                    the largest cosine with the preference text
// Any other instruction is a non-retryable BackendError.
class MockBackend final : public CompletionBackend {
 public:
  explicit MockBackend(std::uint64_t seed = 0, std::size_t encoder_dim = 256,
                       const Vocabulary& vocab = Vocabulary::bundled());

  std::string identifier() const override;
  bool accepts_images() const override { return false; }
  std::string complete(const ChatRequest& req) const override;

 private:
  std::string preference(const std::vector<std::string>& texts) const;
  std::string author_card(const std::vector<std::string>& texts) const;
  std::string recommend(const std::vector<std::string>& texts) const;

  std::uint64_t seed_;
  HashingEncoder encoder_;
  Vocabulary vocab_;
};

struct HttpBackendConfig {
  std::string endpoint;
  std::string model;
  double temperature = 0.0;
  std::uint64_t seed = 0;
  int timeout_s = 60;
  int retries = 3;
  bool images = false;
  std::string api_key;  // from MSPA_API_KEY
};

// POST {model, messages:[{role, content:[{type, value}]}], temperature, seed}
// -> {text}.
class HttpBackend final : public CompletionBackend {
 public:
  explicit HttpBackend(HttpBackendConfig cfg) : cfg_(std::move(cfg)) {}

  std::string identifier() const override { return "http:" + cfg_.model; }
  bool accepts_images() const override { return cfg_.images; }
  std::string complete(const ChatRequest& req) const override;

 private:
  HttpBackendConfig cfg_;
};

}  // namespace mspa
