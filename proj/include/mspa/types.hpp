#pragma once

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

#include "mspa/error.hpp"
#include "mspa/linalg.hpp"

namespace mspa {

using AuthorId = std::string;
using UserId = std::string;

struct VisualRef {
  std::string path;
  std::optional<std::string> caption;

  bool operator==(const VisualRef&) const = default;
};

struct AuthorRecord {
  AuthorId author_id;
  std::string textual_profile;
  std::vector<VisualRef> visuals;
  std::string audio_text;
  std::vector<std::string> comments;
  std::optional<std::string> region;

  bool operator==(const AuthorRecord&) const = default;
};

// Ordered tipping history; `ground_truth` is the held-out last tip.
struct TippingSession {
  UserId user_id;
  std::vector<AuthorId> history;
  AuthorId ground_truth;

  bool operator==(const TippingSession&) const = default;
};

struct CandidateSet {
  UserId session_ref;
  std::vector<AuthorId> candidates;
  std::size_t truth_index = 0;

  std::size_t m() const { return candidates.size(); }
  const AuthorId& truth() const { return candidates.at(truth_index); }

  bool operator==(const CandidateSet&) const = default;
};

struct Provenance {
  std::string backend;
  std::string prompt_hash;

  bool operator==(const Provenance&) const = default;
};

struct PreferenceProfile {
  UserId user_id;
  std::string preference_text;
  Vector preference_embedding;
  Provenance provenance;

  bool operator==(const PreferenceProfile& o) const {
    return user_id == o.user_id && preference_text == o.preference_text &&
           preference_embedding.size() == o.preference_embedding.size() &&
           preference_embedding == o.preference_embedding && provenance == o.provenance;
  }
};

struct Recommendation {
  AuthorId chosen;
  std::string explanation;
  std::string raw_output;

  bool operator==(const Recommendation&) const = default;
};

struct SimilarityTriple {
  AuthorId anchor;
  AuthorId closer;
  AuthorId farther;

  bool operator==(const SimilarityTriple&) const = default;
};

/// Catalog keyed by author id, preserving file order for iteration.
class Catalog {
 public:
  Catalog() = default;
  explicit Catalog(std::vector<AuthorRecord> records);

  const AuthorRecord& at(const AuthorId& id) const;
  const AuthorRecord* find(const AuthorId& id) const;
  bool contains(const AuthorId& id) const { return find(id) != nullptr; }

  const std::vector<AuthorRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

 private:
  std::vector<AuthorRecord> records_;
  std::vector<std::size_t> sorted_;  // indices sorted by id
};

struct Rejection {
  AuthorId author_id;
  std::string reason;

  bool operator==(const Rejection&) const = default;
};

struct ValidationReport {
  std::vector<AuthorRecord> accepted;
  std::vector<Rejection> rejected;
};

// True when at least one of profile, audio text, comments or captions carries text.
bool has_textual_signal(const AuthorRecord& author);

/// Splits a catalog into accepted records and rejections. Duplicate ids are
/// a hard error (DataError naming the id), not a rejection.
ValidationReport validate_catalog(const std::vector<AuthorRecord>& catalog);

/// Throws DataError unless the session has >= 3 history entries, a ground
/// truth outside the history, and every id resolves in `catalog`.
void check_session(const TippingSession& session, const Catalog& catalog);

// JSON mapping; field names follow the on-disk snake_case schema.
void to_json(nlohmann::json& j, const VisualRef& v);
void from_json(const nlohmann::json& j, VisualRef& v);
void to_json(nlohmann::json& j, const AuthorRecord& a);
void from_json(const nlohmann::json& j, AuthorRecord& a);
void to_json(nlohmann::json& j, const TippingSession& s);
void from_json(const nlohmann::json& j, TippingSession& s);
void to_json(nlohmann::json& j, const CandidateSet& c);
void from_json(const nlohmann::json& j, CandidateSet& c);
void to_json(nlohmann::json& j, const PreferenceProfile& p);
void from_json(const nlohmann::json& j, PreferenceProfile& p);
void to_json(nlohmann::json& j, const Recommendation& r);
void from_json(const nlohmann::json& j, Recommendation& r);
void to_json(nlohmann::json& j, const SimilarityTriple& t);
void from_json(const nlohmann::json& j, SimilarityTriple& t);

nlohmann::json vector_to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& j);

}  // namespace mspa
