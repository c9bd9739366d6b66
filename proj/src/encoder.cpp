#include "mspa/encoder.hpp"

#include <nlohmann/json.hpp>

#include "http.hpp"
#include "mspa/error.hpp"
#include "mspa/jsonl.hpp"
#include "mspa/rng.hpp"
#include "mspa/types.hpp"
#include "mspa/vocab.hpp"

namespace mspa {

HashingEncoder::HashingEncoder(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw UsageError("encoder dimension must be positive");
}

std::string HashingEncoder::identifier() const { return "hash-fnv1a64/" + std::to_string(dim_); }

std::size_t HashingEncoder::bucket(std::string_view token) const {
  return static_cast<std::size_t>(fnv1a64(token) % dim_);
}

Vector HashingEncoder::counts(std::string_view text) const {
  Vector v = Vector::Zero(static_cast<Eigen::Index>(dim_));
  for (const auto& tok : tokenize(text)) v[static_cast<Eigen::Index>(bucket(tok))] += 1.0;
  return v;
}

Vector HashingEncoder::encode(std::string_view text) const {
  Vector v = counts(text);
  const double n = v.norm();
  if (n == 0.0) throw DataError("empty text");
  return v / n;
}

HttpEncoder::HttpEncoder(HttpEncoderConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.dim == 0) throw UsageError("encoder dimension must be positive");
}

Vector HttpEncoder::encode(std::string_view text) const {
  const nlohmann::json body{{"model", cfg_.model}, {"input", std::string(text)}};
  const auto reply =
      detail::post_json(cfg_.endpoint, body, cfg_.timeout_s, cfg_.retries, cfg_.api_key);
  if (!reply.contains("embedding") || !reply["embedding"].is_array()) {
    throw BackendError("encoder reply lacks an embedding array", false, 1);
  }
  Vector v = vector_from_json(reply["embedding"]);
  if (static_cast<std::size_t>(v.size()) != cfg_.dim) {
    throw BackendError("encoder returned dimension " + std::to_string(v.size()) +
                           ", expected " + std::to_string(cfg_.dim),
                       false, 1);
  }
  const double n = v.norm();
  if (!(n > 0.0) || !v.allFinite()) throw BackendError("encoder returned a zero vector", false, 1);
  return v / n;
}

Vector embed_text(std::string_view text, const TextEncoder& encoder) {
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    throw DataError("empty text");
  }
  return encoder.encode(text);
}

std::string encode_embeddings(const std::vector<EmbeddingRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::json j{{"id", r.id}, {"kind", r.kind}, {"vector", vector_to_json(r.vector)}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<EmbeddingRecord> decode_embeddings(const std::string& bytes) {
  std::vector<EmbeddingRecord> out;
  for (const auto& j : decode_jsonl<nlohmann::json>(bytes, "embeddings.jsonl")) {
    EmbeddingRecord r;
    r.id = j.at("id").get<std::string>();
    r.kind = j.at("kind").get<std::string>();
    if (r.kind != "user" && r.kind != "author") {
      throw DataError("embedding " + r.id + " has unknown kind " + r.kind);
    }
    r.vector = vector_from_json(j.at("vector"));
    out.push_back(std::move(r));
  }
  return out;
}

void write_embeddings(const std::filesystem::path& path, const std::vector<EmbeddingRecord>& records) {
  write_file(path, encode_embeddings(records));
}

std::vector<EmbeddingRecord> read_embeddings(const std::filesystem::path& path) {
  return decode_embeddings(read_file(path));
}

}  // namespace mspa
