#include "mspa/vocab.hpp"

#include <nlohmann/json.hpp>

#include "mspa/assets.hpp"
#include "mspa/error.hpp"

namespace mspa {

std::vector<std::string> Vocabulary::regions() const {
  std::vector<std::string> out;
  for (const auto& c : clusters) out.push_back(c.region);
  return out;
}

std::vector<std::string> Vocabulary::keywords() const {
  std::vector<std::string> out;
  for (const auto& c : clusters) out.insert(out.end(), c.keywords.begin(), c.keywords.end());
  return out;
}

Vocabulary Vocabulary::parse(std::string_view json_text) {
  Vocabulary v;
  try {
    const auto j = nlohmann::json::parse(json_text);
    v.version = j.at("version").get<int>();
    j.at("scenes").get_to(v.scenes);
    j.at("tiers").get_to(v.tiers);
    j.at("filler").get_to(v.filler);
    for (const auto& c : j.at("clusters")) {
      ClusterVocab cv;
      c.at("name").get_to(cv.name);
      c.at("region").get_to(cv.region);
      c.at("keywords").get_to(cv.keywords);
      c.at("appearance").get_to(cv.appearance);
      c.at("places").get_to(cv.places);
      v.clusters.push_back(std::move(cv));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid vocabulary: ") + e.what());
  }
  if (v.clusters.empty() || v.scenes.size() != 2 || v.tiers.empty()) {
    throw DataError("invalid vocabulary: needs clusters, two scenes and tiers");
  }
  return v;
}

const Vocabulary& Vocabulary::bundled() {
  static const Vocabulary v = parse(assets::cluster_vocab);
  return v;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c >= 0x80) {
      cur.push_back(ch);
    } else if (c >= 'A' && c <= 'Z') {
      cur.push_back(static_cast<char>(c - 'A' + 'a'));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

}  // namespace mspa
