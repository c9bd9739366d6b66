#include "mspa/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace mspa {

void GenConfig::validate() const {
  if (num_authors < 3) throw UsageError("gen.num_authors must be at least 3");
  if (clusters == 0 || clusters > num_authors) throw UsageError("gen.clusters must be in [1, num_authors]");
  if (latent_dim == 0) throw UsageError("gen.latent_dim must be positive");
  if (min_history < 3) throw UsageError("gen.min_history must be at least 3");
  if (max_history < min_history) throw UsageError("gen.max_history must be >= min_history");
  if (!(signal_strength >= 0.0)) throw UsageError("gen.signal_strength must be >= 0");
  const double total = split[0] + split[1] + split[2];
  if (std::abs(total - 1.0) > 1e-9 || split[0] < 0 || split[1] < 0 || split[2] < 0) {
    throw UsageError("gen.split ratios must be non-negative and sum to 1");
  }
  if (!(author_noise_min >= 0.0 && author_noise_max >= author_noise_min)) {
    throw UsageError("gen.author_noise range is invalid");
  }
  if (!(region_fidelity >= 0.0 && region_fidelity <= 1.0)) {
    throw UsageError("gen.region_fidelity must be in [0,1]");
  }
  if (keywords_per_author == 0) throw UsageError("gen.keywords_per_author must be positive");
  for (auto m : m_values) {
    if (m < 2 || m > 26) throw UsageError("gen.m_values entries must be in [2, 26]");
  }
}

nlohmann::json gen_config_to_json(const GenConfig& c) {
  return {{"num_authors", c.num_authors},
          {"num_users", c.num_users},
          {"clusters", c.clusters},
          {"latent_dim", c.latent_dim},
          {"min_history", c.min_history},
          {"max_history", c.max_history},
          {"m_values", c.m_values},
          {"signal_strength", c.signal_strength},
          {"split", c.split},
          {"seed", c.seed},
          {"author_noise_min", c.author_noise_min},
          {"author_noise_max", c.author_noise_max},
          {"user_noise", c.user_noise},
          {"region_fidelity", c.region_fidelity},
          {"keywords_per_author", c.keywords_per_author},
          {"triple_count", c.triple_count},
          {"triple_margin", c.triple_margin}};
}

GenConfig gen_config_from_json(const nlohmann::json& j) {
  GenConfig c;
  try {
#define MSPA_READ(key) c.key = j.value(#key, c.key)
    MSPA_READ(num_authors);
    MSPA_READ(num_users);
    MSPA_READ(clusters);
    MSPA_READ(latent_dim);
    MSPA_READ(min_history);
    MSPA_READ(max_history);
    MSPA_READ(m_values);
    MSPA_READ(signal_strength);
    MSPA_READ(split);
    MSPA_READ(seed);
    MSPA_READ(author_noise_min);
    MSPA_READ(author_noise_max);
    MSPA_READ(user_noise);
    MSPA_READ(region_fidelity);
    MSPA_READ(keywords_per_author);
    MSPA_READ(triple_count);
    MSPA_READ(triple_margin);
#undef MSPA_READ
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("invalid gen config: ") + e.what());
  }
  return c;
}

std::string author_id_for(std::size_t index) { return fmt::format("a{:05d}", index); }
std::string user_id_for(std::size_t index) { return fmt::format("u{:05d}", index); }

std::size_t LatentCatalog::index_of(const AuthorId& id) const {
  // Generated ids are "a" + zero-padded index.
  if (id.size() > 1 && id[0] == 'a') {
    const auto idx = static_cast<std::size_t>(std::stoul(id.substr(1)));
    if (idx < records.size() && records[idx].author_id == id) return idx;
  }
  throw DataError("unknown author " + id);
}

std::vector<std::size_t> LatentCatalog::members(std::size_t cluster) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < latent.size(); ++i) {
    if (latent[i].cluster == cluster) out.push_back(i);
  }
  return out;
}

namespace {

Vector gaussian_direction(Rng& rng, std::size_t d) {
  // N(0, I/d): squared norm concentrates at 1.
  Vector g(static_cast<Eigen::Index>(d));
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = rng.normal() * scale;
  return g;
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& items) {
  return items[static_cast<std::size_t>(rng.index(items.size()))];
}

// Cluster vocabulary with a numeric suffix once the bundled clusters run out.
ClusterVocab cluster_vocab(const Vocabulary& vocab, std::size_t cluster) {
  ClusterVocab cv = vocab.clusters[cluster % vocab.clusters.size()];
  const std::size_t round = cluster / vocab.clusters.size();
  if (round == 0) return cv;
  const auto suffix = std::to_string(round + 1);
  cv.name += suffix;
  cv.region += suffix;
  for (auto& k : cv.keywords) k += suffix;
  return cv;
}

AuthorRecord make_record(std::size_t index, const LatentAuthor& la, const GenConfig& cfg,
                         const Vocabulary& vocab, const std::vector<std::string>& regions, Rng& rng) {
  const ClusterVocab cv = cluster_vocab(vocab, la.cluster);
  AuthorRecord rec;
  rec.author_id = author_id_for(index);

  const double span = cfg.author_noise_max - cfg.author_noise_min;
  const double frac = span > 0 ? (la.noise_scale - cfg.author_noise_min) / span : 0.0;
  const auto tier_idx = std::min(vocab.tiers.size() - 1,
                                 static_cast<std::size_t>(frac * static_cast<double>(vocab.tiers.size())));
  const auto& tier = vocab.tiers[tier_idx];

  const std::string region = rng.bernoulli(cfg.region_fidelity) ? cv.region : pick(rng, regions);
  rec.region = region;

  std::vector<std::string> kws = cv.keywords;
  rng.shuffle(kws);
  kws.resize(std::min(cfg.keywords_per_author, kws.size()));

  std::string kw_list;
  for (std::size_t i = 0; i < kws.size(); ++i) {
    kw_list += (i == 0 ? "" : (i + 1 == kws.size() ? " and " : ", ")) + kws[i];
  }
  rec.textual_profile = fmt::format("Nickname: star{}. {} streamer from {}. Streams {}.", index,
                                    tier, region, kw_list);
  rec.audio_text = fmt::format("welcome back everyone, today is {} night, {} {}", kws.front(),
                               pick(rng, vocab.filler), pick(rng, vocab.filler));

  const std::size_t n_comments = 1 + static_cast<std::size_t>(rng.index(4));
  for (std::size_t c = 0; c < n_comments; ++c) {
    std::string comment = pick(rng, vocab.filler) + " " + pick(rng, vocab.filler) + " " +
                          pick(rng, vocab.filler);
    if (rng.bernoulli(0.3)) comment += " " + pick(rng, kws);
    rec.comments.push_back(std::move(comment));
  }

  const std::size_t n_images = 1 + static_cast<std::size_t>(rng.index(2));
  for (std::size_t v = 0; v < n_images; ++v) {
    const auto& scene = pick(rng, vocab.scenes);
    rec.visuals.push_back({fmt::format("frames/{}_{}.jpg", rec.author_id, v),
                           scene + " " + pick(rng, cv.places) + " with " + pick(rng, cv.appearance)});
  }
  return rec;
}

}  // namespace

LatentCatalog gen_catalog(const GenConfig& cfg, const Vocabulary& vocab) {
  cfg.validate();
  const Rng root = Rng(cfg.seed).substream("gen");
  const auto d = cfg.latent_dim;

  LatentCatalog cat;
  cat.centroids.resize(static_cast<Eigen::Index>(cfg.clusters), static_cast<Eigen::Index>(d));
  Rng centroid_rng = root.substream("centroids");
  for (std::size_t k = 0; k < cfg.clusters; ++k) {
    Vector c = gaussian_direction(centroid_rng, d);
    cat.centroids.row(static_cast<Eigen::Index>(k)) = c.normalized().transpose();
  }

  std::vector<std::string> regions;
  for (std::size_t k = 0; k < cfg.clusters; ++k) regions.push_back(cluster_vocab(vocab, k).region);

  const Rng author_root = root.substream("author");
  for (std::size_t a = 0; a < cfg.num_authors; ++a) {
    Rng rng = author_root.substream(a);
    LatentAuthor la;
    la.cluster = a % cfg.clusters;
    la.noise_scale = rng.uniform(cfg.author_noise_min, cfg.author_noise_max);
    const Vector c = cat.centroids.row(static_cast<Eigen::Index>(la.cluster)).transpose();
    la.z = (c + la.noise_scale * gaussian_direction(rng, d)).normalized();
    cat.records.push_back(make_record(a, la, cfg, vocab, regions, rng));
    cat.latent.push_back(std::move(la));
  }
  return cat;
}

void assign_splits(SessionData& data, const GenConfig& cfg) {
  const std::uint64_t key = Rng(cfg.seed).substream("split").key();
  std::vector<std::pair<std::uint64_t, UserId>> order;
  for (const auto& s : data.sessions) {
    order.emplace_back(splitmix64_mix(fnv1a64(s.user_id) ^ key), s.user_id);
  }
  std::sort(order.begin(), order.end());
  const auto n = static_cast<double>(order.size());
  const auto n_train = static_cast<std::size_t>(std::llround(cfg.split[0] * n));
  const auto n_val = std::min(order.size() - n_train,
                              static_cast<std::size_t>(std::llround(cfg.split[1] * n)));
  data.train.clear();
  data.val.clear();
  data.test.clear();
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& bucket = i < n_train ? data.train : (i < n_train + n_val ? data.val : data.test);
    bucket.push_back(order[i].second);
  }
  for (auto* b : {&data.train, &data.val, &data.test}) std::sort(b->begin(), b->end());
}

SessionData gen_sessions(const LatentCatalog& catalog, const GenConfig& cfg) {
  cfg.validate();
  if (catalog.records.size() < cfg.max_history + 1) {
    throw DataError("catalog has fewer authors than the longest session");
  }
  const Rng user_root = Rng(cfg.seed).substream("gen").substream("user");
  const auto d = cfg.latent_dim;
  const auto N = catalog.records.size();

  Matrix Z(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(d));
  for (std::size_t a = 0; a < N; ++a) Z.row(static_cast<Eigen::Index>(a)) = catalog.latent[a].z.transpose();

  SessionData out;
  std::vector<double> weights(N);
  for (std::size_t u = 0; u < cfg.num_users; ++u) {
    Rng rng = user_root.substream(u);
    LatentUser lu;
    lu.user_id = user_id_for(u);
    lu.cluster = static_cast<std::size_t>(rng.index(cfg.clusters));
    const Vector c = catalog.centroids.row(static_cast<Eigen::Index>(lu.cluster)).transpose();
    lu.p = (c + cfg.user_noise * gaussian_direction(rng, d)).normalized();

    const std::size_t history_len =
        cfg.min_history + static_cast<std::size_t>(rng.index(cfg.max_history - cfg.min_history + 1));
    const Vector logits = cfg.signal_strength * (Z * lu.p);
    const double hi = logits.maxCoeff();
    for (std::size_t a = 0; a < N; ++a) weights[a] = std::exp(logits[static_cast<Eigen::Index>(a)] - hi);

    // Sequential draws without replacement, proportional to softmax(beta p.z).
    std::vector<AuthorId> tips;
    for (std::size_t t = 0; t <= history_len; ++t) {
      double total = 0.0;
      for (double w : weights) total += w;
      const double r = rng.uniform() * total;
      double acc = 0.0;
      std::size_t chosen = N;
      for (std::size_t a = 0; a < N; ++a) {
        if (weights[a] == 0.0) continue;
        acc += weights[a];
        chosen = a;
        if (r < acc) break;
      }
      tips.push_back(catalog.records[chosen].author_id);
      weights[chosen] = 0.0;
    }

    TippingSession s;
    s.user_id = lu.user_id;
    s.ground_truth = tips.back();
    tips.pop_back();
    s.history = std::move(tips);
    if (s.history.size() < 3) {
      ++out.discarded;
      continue;
    }
    out.sessions.push_back(std::move(s));
    out.users.push_back(std::move(lu));
  }
  assign_splits(out, cfg);
  return out;
}

CandidateData gen_candidate_sets(const std::vector<TippingSession>& sessions,
                                 const LatentCatalog& catalog, std::size_t m, const GenConfig& cfg) {
  if (catalog.records.size() < m) throw DataError("catalog smaller than candidate set size");
  if (m < 2 || m > 26) throw UsageError("candidate set size must be in [2, 26]");
  const Rng root = Rng(cfg.seed).substream("gen").substream("candidates").substream(m);
  const auto N = catalog.records.size();

  CandidateData out;
  for (std::size_t s = 0; s < sessions.size(); ++s) {
    Rng rng = root.substream(s);
    const auto truth = catalog.index_of(sessions[s].ground_truth);
    const auto cluster = catalog.latent[truth].cluster;
    const std::size_t distractors = m - 1;
    const std::size_t hard = distractors / 2;

    std::vector<std::size_t> chosen{truth};
    auto taken = [&](std::size_t a) {
      return std::find(chosen.begin(), chosen.end(), a) != chosen.end();
    };

    std::vector<std::size_t> same;
    std::vector<std::size_t> other;
    for (std::size_t a = 0; a < N; ++a) {
      if (a == truth) continue;
      (catalog.latent[a].cluster == cluster ? same : other).push_back(a);
    }

    rng.shuffle(same);
    std::size_t got = 0;
    for (std::size_t i = 0; i < same.size() && got < hard; ++i, ++got) chosen.push_back(same[i]);
    if (got < hard) out.fallbacks += hard - got;

    // Easy negatives from other clusters, then uniform top-up if needed.
    rng.shuffle(other);
    for (std::size_t i = 0; i < other.size() && chosen.size() < m; ++i) chosen.push_back(other[i]);
    while (chosen.size() < m) {
      const auto a = static_cast<std::size_t>(rng.index(N));
      if (!taken(a)) chosen.push_back(a);
    }

    rng.shuffle(chosen);
    CandidateSet set;
    set.session_ref = sessions[s].user_id;
    for (std::size_t j = 0; j < chosen.size(); ++j) {
      set.candidates.push_back(catalog.records[chosen[j]].author_id);
      if (chosen[j] == truth) set.truth_index = j;
    }
    out.sets.push_back(std::move(set));
  }
  return out;
}

std::vector<SimilarityTriple> gen_triples(const LatentCatalog& catalog, std::size_t count,
                                          const GenConfig& cfg) {
  const auto N = catalog.records.size();
  if (N < 3) throw DataError("triples need at least 3 authors");
  Rng rng = Rng(cfg.seed).substream("gen").substream("triples");
  constexpr std::size_t kSampled = 10;
  constexpr int kRetries = 50;

  std::vector<std::vector<std::size_t>> by_cluster(cfg.clusters);
  for (std::size_t a = 0; a < N; ++a) by_cluster.at(catalog.latent[a].cluster).push_back(a);

  std::vector<SimilarityTriple> out;
  for (std::size_t t = 0; t < count; ++t) {
    bool done = false;
    for (int attempt = 0; attempt < kRetries && !done; ++attempt) {
      const auto anchor = static_cast<std::size_t>(rng.index(N));
      const auto& za = catalog.latent[anchor].z;
      const auto& mates = by_cluster[catalog.latent[anchor].cluster];
      if (mates.size() < 2 || mates.size() == N) continue;

      std::size_t closer = N;
      double best = -2.0;
      for (std::size_t i = 0; i < kSampled; ++i) {
        const auto b = mates[static_cast<std::size_t>(rng.index(mates.size()))];
        if (b == anchor) continue;
        const double c = za.dot(catalog.latent[b].z);
        if (c > best) {
          best = c;
          closer = b;
        }
      }
      std::size_t farther = N;
      double worst = 2.0;
      for (std::size_t i = 0; i < kSampled; ++i) {
        const auto b = static_cast<std::size_t>(rng.index(N));
        if (catalog.latent[b].cluster == catalog.latent[anchor].cluster) continue;
        const double c = za.dot(catalog.latent[b].z);
        if (c < worst) {
          worst = c;
          farther = b;
        }
      }
      if (closer == N || farther == N || best - worst < cfg.triple_margin) continue;
      out.push_back({catalog.records[anchor].author_id, catalog.records[closer].author_id,
                     catalog.records[farther].author_id});
      done = true;
    }
    if (!done) {
      throw DataError(fmt::format("could not build triple {} with margin {} after {} attempts; "
                                  "lower gen.triple_margin",
                                  t, cfg.triple_margin, kRetries));
    }
  }
  return out;
}

GeneratedData generate(const GenConfig& cfg, const Vocabulary& vocab) {
  GeneratedData g;
  g.catalog = gen_catalog(cfg, vocab);
  g.sessions = gen_sessions(g.catalog, cfg);
  for (auto m : cfg.m_values) g.candidates[m] = gen_candidate_sets(g.sessions.sessions, g.catalog, m, cfg);
  g.triples = gen_triples(g.catalog, cfg.triple_count, cfg);
  return g;
}

}  // namespace mspa
