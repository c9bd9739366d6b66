#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mspa {

struct ClusterVocab {
  std::string name;
  std::string region;
  std::vector<std::string> keywords;
  std::vector<std::string> appearance;
  std::vector<std::string> places;
};

// Versioned keyword vocabulary shared by the synthetic generator and the mock
// backend. Loaded from the bundled cluster_vocab asset unless overridden.
struct Vocabulary {
  int version = 0;
  std::vector<std::string> scenes;
  std::vector<std::string> tiers;
  std::vector<std::string> filler;
  std::vector<ClusterVocab> clusters;

  std::vector<std::string> regions() const;
  std::vector<std::string> keywords() const;

  static Vocabulary parse(std::string_view json_text);
  static const Vocabulary& bundled();
};

// Lowercased alphanumeric tokens; bytes >= 0x80 are kept inside tokens so
// UTF-8 text is not shredded.
std::vector<std::string> tokenize(std::string_view text);

}  // namespace mspa
