#include "mspa/backend.hpp"

#include <algorithm>
#include <map>

#include "http.hpp"
#include "mspa/assets.hpp"
#include "mspa/error.hpp"
#include "mspa/linalg.hpp"

namespace mspa {

namespace {

constexpr std::string_view kImagePrefix = "[image] ";
constexpr std::string_view kAuthorIdPrefix = "Author ID: ";
constexpr std::string_view kPreferencePrefix = "User preference: ";

std::string lower(std::string s) {
  for (auto& c : s) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return s;
}

// Most frequent vocabulary term among `tokens`; ties go to the
// lexicographically smallest term. Returns `fallback` when none occur.
std::string majority(const std::vector<std::string>& tokens, const std::vector<std::string>& terms,
                     const std::string& fallback) {
  std::map<std::string, std::pair<std::string, int>> counts;  // lowered -> (original, n)
  for (const auto& t : terms) counts.emplace(lower(t), std::make_pair(t, 0));
  for (const auto& tok : tokens) {
    auto it = counts.find(tok);
    if (it != counts.end()) ++it->second.second;
  }
  std::string best;
  int best_n = 0;
  for (const auto& [key, entry] : counts) {  // map order == lexicographic
    if (entry.second > best_n) {
      best = entry.first;
      best_n = entry.second;
    }
  }
  return best_n > 0 ? best : fallback;
}

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

}  // namespace

nlohmann::json request_to_json(const ChatRequest& req, const std::string& model) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : req.messages) {
    nlohmann::json content = nlohmann::json::array();
    for (const auto& c : m.content) content.push_back({{"type", c.type}, {"value", c.value}});
    messages.push_back({{"role", m.role}, {"content", content}});
  }
  return {{"model", model},
          {"messages", messages},
          {"temperature", req.temperature},
          {"seed", req.seed}};
}

MockBackend::MockBackend(std::uint64_t seed, std::size_t encoder_dim, const Vocabulary& vocab)
    : seed_(seed), encoder_(encoder_dim), vocab_(vocab) {}

std::string MockBackend::identifier() const { return "mock/seed=" + std::to_string(seed_); }

std::string MockBackend::complete(const ChatRequest& req) const {
  std::string instruction;
  std::vector<std::string> texts;
  for (const auto& m : req.messages) {
    for (const auto& c : m.content) {
      if (c.type != "text") continue;
      if (m.role == "system") {
        instruction += c.value;
      } else {
        texts.push_back(c.value);
      }
    }
  }
  // The trailing answer-format item is not content.
  if (!texts.empty() && starts_with(texts.back(), "Answer format: ")) texts.pop_back();

  if (instruction == assets::preference_instruction) return preference(texts);
  if (instruction == assets::author_card_instruction) return author_card(texts);
  if (instruction == assets::recommendation_instruction) return recommend(texts);
  throw BackendError("mock backend: unrecognised instruction", false, 1);
}

std::string MockBackend::preference(const std::vector<std::string>& texts) const {
  std::vector<std::string> tokens;
  for (const auto& t : texts) {
    auto tk = tokenize(t);
    tokens.insert(tokens.end(), tk.begin(), tk.end());
  }
  const auto region = majority(tokens, vocab_.regions(), "diverse");
  const auto keyword = majority(tokens, vocab_.keywords(), "varied");
  const auto scene = majority(tokens, vocab_.scenes, "mixed");
  return "This user prefers " + region + " authors, " + keyword + " content, and " + scene +
         " scenes.";
}

std::string MockBackend::author_card(const std::vector<std::string>& texts) const {
  std::string id = "unknown";
  std::string profile;
  std::vector<std::string> captions;
  std::vector<std::string> tokens;
  for (const auto& t : texts) {
    if (starts_with(t, kImagePrefix)) {
      captions.push_back(t.substr(kImagePrefix.size()));
      continue;
    }
    std::string_view rest(t);
    if (starts_with(rest, kAuthorIdPrefix)) {
      const auto nl = rest.find('\n');
      id = std::string(rest.substr(kAuthorIdPrefix.size(), nl - kAuthorIdPrefix.size()));
      rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
    }
    if (starts_with(rest, "Profile: ")) {
      profile = std::string(rest.substr(9, rest.find('\n') - 9));
    }
    auto tk = tokenize(rest);
    tokens.insert(tokens.end(), tk.begin(), tk.end());
  }
  for (const auto& c : captions) {
    auto tk = tokenize(c);
    tokens.insert(tokens.end(), tk.begin(), tk.end());
  }

  // Keywords in order of first appearance, deduplicated.
  std::vector<std::string> found;
  const auto kws = vocab_.keywords();
  for (const auto& tok : tokens) {
    for (const auto& kw : kws) {
      if (tok == lower(kw) && std::find(found.begin(), found.end(), kw) == found.end()) {
        found.push_back(kw);
      }
    }
  }
  std::string content;
  for (const auto& kw : found) content += (content.empty() ? "" : " ") + kw;
  std::string scenes;
  for (const auto& c : captions) scenes += (scenes.empty() ? "" : "; ") + c;

  return "Author " + id + ". Region: " + majority(tokens, vocab_.regions(), "unknown") +
         ". Content: " + (content.empty() ? "general" : content) +
         ". Scenes: " + (scenes.empty() ? "none" : scenes) + ". Profile: " + profile;
}

std::string MockBackend::recommend(const std::vector<std::string>& texts) const {
  if (texts.size() < 2 || !starts_with(texts.front(), kPreferencePrefix)) {
    throw BackendError("mock backend: malformed recommendation prompt", false, 1);
  }
  const std::string pref = texts.front().substr(kPreferencePrefix.size());
  const Vector u = encoder_.encode(pref);
  std::size_t best = 0;
  double best_cos = -2.0;
  std::string best_label;
  for (std::size_t j = 1; j < texts.size(); ++j) {
    const auto colon = texts[j].find(": ");
    if (colon == std::string::npos) continue;
    const Vector v = encoder_.encode(texts[j].substr(colon + 2));
    const double c = u.dot(v);
    if (c > best_cos) {
      best_cos = c;
      best = j;
      best_label = texts[j].substr(0, colon);
    }
  }
  if (best == 0) throw BackendError("mock backend: no candidates", false, 1);
  nlohmann::ordered_json answer;
  answer["User Preference"] = pref;
  answer["Recommendation Reason"] = "Recommended author " + best_label +
                                    " has the closest match to the stated preference; the other "
                                    "candidates share fewer of its signals.";
  answer["Answer"] = best_label;
  return answer.dump();
}

std::string HttpBackend::complete(const ChatRequest& req) const {
  ChatRequest sent = req;
  sent.temperature = cfg_.temperature;
  sent.seed = cfg_.seed;
  const auto reply = detail::post_json(cfg_.endpoint, request_to_json(sent, cfg_.model),
                                       cfg_.timeout_s, cfg_.retries, cfg_.api_key);
  if (!reply.contains("text") || !reply["text"].is_string()) {
    throw BackendError("completion reply lacks a text field", false, 1);
  }
  auto text = reply["text"].get<std::string>();
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw BackendError("empty completion", false, 1);
  }
  return text;
}

}  // namespace mspa
