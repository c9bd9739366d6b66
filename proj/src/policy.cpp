#include "mspa/policy.hpp"

#include <nlohmann/json.hpp>

#include "mspa/assets.hpp"

namespace mspa {

void RecContext::validate() const {
  const auto m = static_cast<Eigen::Index>(ids.size());
  if (m == 0) throw DataError("recommendation context has no candidates");
  if (embeddings.rows() != m || feature_texts.size() != ids.size()) {
    throw DataError("recommendation context for " + preference.user_id + " is inconsistent");
  }
  if (embeddings.cols() != preference.preference_embedding.size()) {
    throw DataError("embedding dimension mismatch for " + preference.user_id);
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    if (!is_unit_norm(embeddings.row(j).transpose().eval())) {
      throw DataError("candidate embedding " + ids[static_cast<std::size_t>(j)] +
                      " is not unit norm");
    }
  }
}

Vector score_candidates(const Policy& policy, const RecContext& ctx) {
  return score_candidates(policy, ctx.preference.preference_embedding, ctx.embeddings);
}

Vector choice_probabilities(const Policy& policy, const RecContext& ctx) {
  return choice_probabilities(policy, ctx.preference.preference_embedding, ctx.embeddings);
}

Matrix log_prob_grad(const Policy& policy, const RecContext& ctx, std::size_t choice) {
  return log_prob_grad(policy, ctx.preference.preference_embedding, ctx.embeddings,
                       static_cast<Eigen::Index>(choice));
}

std::string templated_explanation(const RecContext& ctx, std::size_t choice) {
  nlohmann::ordered_json e;
  e["User Preference"] = ctx.preference.preference_text;
  e["Recommendation Reason"] = "Recommended author " + ctx.ids.at(choice) +
                               " scores highest against the user's preference among the " +
                               std::to_string(ctx.m()) + " candidates.";
  e["Answer"] = std::string(1, candidate_label(choice));
  return e.dump();
}

std::vector<PolicyOutput> sample_group(const Policy& policy, const RecContext& ctx, std::size_t G,
                                       Rng& rng, bool with_explanations) {
  if (G < 2) throw std::invalid_argument("group size must be at least 2");
  const Vector s = score_candidates(policy, ctx);
  if (!s.allFinite()) throw std::domain_error("non-finite candidate scores");
  const Vector z = s / policy.tau;
  const Vector logp = log_softmax(z);
  const Vector p = logp.array().exp().matrix();

  std::vector<PolicyOutput> out(G);
  for (auto& o : out) {
    const double r = rng.uniform();
    double acc = 0.0;
    auto pick = static_cast<std::size_t>(p.size() - 1);
    for (Eigen::Index j = 0; j < p.size(); ++j) {
      acc += p[j];
      if (r < acc) {
        pick = static_cast<std::size_t>(j);
        break;
      }
    }
    o.choice_index = pick;
    o.log_prob = logp[static_cast<Eigen::Index>(pick)];
    if (with_explanations) o.explanation = templated_explanation(ctx, pick);
  }
  return out;
}

std::size_t greedy_choice(const Vector& scores, const std::vector<AuthorId>& ids) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < ids.size(); ++j) {
    const double sj = scores[static_cast<Eigen::Index>(j)];
    const double sb = scores[static_cast<Eigen::Index>(best)];
    if (sj > sb || (sj == sb && ids[j] < ids[best])) best = j;
  }
  return best;
}

std::size_t greedy_choice(const Policy& policy, const RecContext& ctx) {
  return greedy_choice(score_candidates(policy, ctx), ctx.ids);
}

Prompt build_recommendation_prompt(const RecContext& ctx) {
  if (ctx.m() > 26) throw DataError("too many candidates");
  Prompt p;
  p.instruction = std::string(assets::recommendation_instruction);
  p.answer_format = std::string(assets::recommendation_answer_format);
  p.parts.push_back({"User preference: " + ctx.preference.preference_text, {}});
  for (std::size_t j = 0; j < ctx.m(); ++j) {
    p.parts.push_back({std::string(1, candidate_label(j)) + ": " + ctx.feature_texts[j], {}});
  }
  return p;
}

namespace {

// Extent of the first balanced-brace block, skipping braces inside JSON
// string literals.
std::string_view first_json_block(std::string_view raw) {
  const auto start = raw.find('{');
  if (start == std::string_view::npos) return {};
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < raw.size(); ++i) {
    const char c = raw[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}' && --depth == 0) {
      return raw.substr(start, i - start + 1);
    }
  }
  return {};
}

}  // namespace

ParsedRecommendation parse_recommendation(std::string_view raw, std::size_t m) {
  const auto block = first_json_block(raw);
  if (block.empty()) throw RecommendationParseError("unparseable", std::string(raw));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(block);
  } catch (const nlohmann::json::exception&) {
    throw RecommendationParseError("unparseable", std::string(raw));
  }
  if (!j.is_object() || !j.contains("Answer") || !j["Answer"].is_string()) {
    throw RecommendationParseError("missing answer", std::string(raw));
  }
  const auto answer = j["Answer"].get<std::string>();
  if (answer.size() != 1 || answer[0] < 'A' || answer[0] > 'Z') {
    throw RecommendationParseError("unparseable", std::string(raw));
  }
  const auto index = static_cast<std::size_t>(answer[0] - 'A');
  if (index >= m) throw RecommendationParseError("out of range", std::string(raw));
  return {index, std::string(block)};
}

PolicyOutput llm_policy_recommend(const RecContext& ctx, const CompletionBackend& backend,
                                  int parse_retries) {
  const auto req = to_request(build_recommendation_prompt(ctx), backend.accepts_images());
  const int attempts = std::max(parse_retries, 1);
  std::string raw;
  for (int attempt = 1;; ++attempt) {
    raw = backend.complete(req);
    try {
      auto parsed = parse_recommendation(raw, ctx.m());
      return {parsed.choice_index, std::move(parsed.explanation), 0.0};
    } catch (const RecommendationParseError& e) {
      if (attempt >= attempts) {
        throw RecommendationParseError(std::string(e.what()) + " after " +
                                           std::to_string(attempts) + " attempts",
                                       raw);
      }
    }
  }
}

nlohmann::json policy_to_json(const Policy& policy) {
  nlohmann::json w = nlohmann::json::array();
  for (Eigen::Index i = 0; i < policy.W.rows(); ++i) {
    for (Eigen::Index k = 0; k < policy.W.cols(); ++k) w.push_back(policy.W(i, k));
  }
  return {{"d", policy.W.rows()}, {"tau", policy.tau}, {"W", w}};
}

Policy policy_from_json(const nlohmann::json& j) {
  const auto d = j.at("d").get<Eigen::Index>();
  const auto& w = j.at("W");
  if (d <= 0 || w.size() != static_cast<std::size_t>(d * d)) {
    throw DataError("policy checkpoint: W must hold d*d entries");
  }
  Policy p{Matrix(d, d), j.at("tau").get<double>()};
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index k = 0; k < d; ++k) {
      p.W(i, k) = w[static_cast<std::size_t>(i * d + k)].get<double>();
    }
  }
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("policy checkpoint: ") + e.what());
  }
  return p;
}

}  // namespace mspa
