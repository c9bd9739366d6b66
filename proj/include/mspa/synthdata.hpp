#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mspa/linalg.hpp"
#include "mspa/rng.hpp"
#include "mspa/types.hpp"
#include "mspa/vocab.hpp"

namespace mspa {

struct GenConfig {
  std::size_t num_authors = 400;
  std::size_t num_users = 1000;
  std::size_t clusters = 8;
  std::size_t latent_dim = 256;
  // History length range; each user tips one more author (the ground truth).
  std::size_t min_history = 3;
  std::size_t max_history = 8;
  std::vector<std::size_t> m_values{4, 10};
  double signal_strength = 8.0;  // beta_gen
  std::array<double, 3> split{0.7, 0.2, 0.1};
  std::uint64_t seed = 0;

  // Per-author latent noise scale is uniform in [min, max]; authors near the
  // low end sit close to their cluster centroid and get tipped more often.
  double author_noise_min = 0.2;
  double author_noise_max = 2.0;
  double user_noise = 0.5;
  // Probability that an author's stated region is its cluster's region.
  double region_fidelity = 0.8;
  std::size_t keywords_per_author = 2;
  std::size_t triple_count = 500;
  double triple_margin = 0.2;

  void validate() const;
};

nlohmann::json gen_config_to_json(const GenConfig& cfg);
// Missing keys keep their defaults.
GenConfig gen_config_from_json(const nlohmann::json& j);

struct LatentAuthor {
  Vector z;
  std::size_t cluster = 0;
  double noise_scale = 0.0;
};

struct LatentCatalog {
  Matrix centroids;  // clusters x d
  std::vector<AuthorRecord> records;
  std::vector<LatentAuthor> latent;  // parallel to records

  std::size_t index_of(const AuthorId& id) const;
  const LatentAuthor& latent_of(const AuthorId& id) const { return latent.at(index_of(id)); }
  std::vector<std::size_t> members(std::size_t cluster) const;
};

struct LatentUser {
  UserId user_id;
  std::size_t cluster = 0;
  Vector p;
};

struct SessionData {
  std::vector<TippingSession> sessions;
  std::vector<LatentUser> users;  // parallel to sessions
  std::vector<UserId> train, val, test;
  std::size_t discarded = 0;
};

struct CandidateData {
  std::vector<CandidateSet> sets;  // parallel to the sessions passed in
  std::size_t fallbacks = 0;       // hard negatives drawn uniformly instead
};

std::string author_id_for(std::size_t index);
std::string user_id_for(std::size_t index);

LatentCatalog gen_catalog(const GenConfig& cfg, const Vocabulary& vocab = Vocabulary::bundled());
SessionData gen_sessions(const LatentCatalog& catalog, const GenConfig& cfg);
CandidateData gen_candidate_sets(const std::vector<TippingSession>& sessions,
                                 const LatentCatalog& catalog, std::size_t m, const GenConfig& cfg);
std::vector<SimilarityTriple> gen_triples(const LatentCatalog& catalog, std::size_t count,
                                          const GenConfig& cfg);

// Orders users by a seeded hash of their id and cuts 7:2:1 (or cfg.split).
void assign_splits(SessionData& data, const GenConfig& cfg);

struct GeneratedData {
  LatentCatalog catalog;
  SessionData sessions;
  std::map<std::size_t, CandidateData> candidates;  // by m
  std::vector<SimilarityTriple> triples;
};

GeneratedData generate(const GenConfig& cfg, const Vocabulary& vocab = Vocabulary::bundled());

}  // namespace mspa
