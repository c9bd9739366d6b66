#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "mspa/linalg.hpp"

namespace mspa {

class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual std::string identifier() const = 0;
  virtual std::size_t dimension() const = 0;
  // Returns a unit-norm vector; throws DataError("empty text") when the
  // text has no tokens.
  virtual Vector encode(std::string_view text) const = 0;
};

// Feature-hashing bag of words: each lowercased alphanumeric token adds one
// to bucket fnv1a64(token) mod d, then the vector is L2-normalized.
class HashingEncoder final : public TextEncoder {
 public:
  explicit HashingEncoder(std::size_t dim = 256);

  std::string identifier() const override;
  std::size_t dimension() const override { return dim_; }
  Vector encode(std::string_view text) const override;

  // Unnormalized term-frequency counts.
  Vector counts(std::string_view text) const;
  std::size_t bucket(std::string_view token) const;

 private:
  std::size_t dim_;
};

struct HttpEncoderConfig {
  std::string endpoint;  // http://host:port/path
  std::string model;
  std::size_t dim = 256;
  int timeout_s = 30;
  int retries = 3;
  std::string api_key;
};

// POST {"model", "input"} -> {"embedding": [f64; d]}; the result is
// re-normalized locally.
class HttpEncoder final : public TextEncoder {
 public:
  explicit HttpEncoder(HttpEncoderConfig cfg);

  std::string identifier() const override { return "http:" + cfg_.model; }
  std::size_t dimension() const override { return cfg_.dim; }
  Vector encode(std::string_view text) const override;

 private:
  HttpEncoderConfig cfg_;
};

/// Unit-norm embedding of `text`. Empty or whitespace-only text is an error.
Vector embed_text(std::string_view text, const TextEncoder& encoder);

struct EmbeddingRecord {
  std::string id;
  std::string kind;  // "user" | "author"
  Vector vector;
};

std::string encode_embeddings(const std::vector<EmbeddingRecord>& records);
std::vector<EmbeddingRecord> decode_embeddings(const std::string& bytes);
void write_embeddings(const std::filesystem::path& path, const std::vector<EmbeddingRecord>& records);
std::vector<EmbeddingRecord> read_embeddings(const std::filesystem::path& path);

}  // namespace mspa
