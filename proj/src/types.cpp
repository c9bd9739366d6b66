#include "mspa/types.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "mspa/jsonl.hpp"

namespace mspa {

using nlohmann::json;

namespace {

bool blank(const std::string& s) {
  return s.find_first_not_of(" \t\r\n") == std::string::npos;
}

template <typename T>
void get_optional(const json& j, const char* key, std::optional<T>& out) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    out.reset();
  } else {
    out = it->get<T>();
  }
}

}  // namespace

Catalog::Catalog(std::vector<AuthorRecord> records) : records_(std::move(records)) {
  sorted_.resize(records_.size());
  for (std::size_t i = 0; i < sorted_.size(); ++i) sorted_[i] = i;
  std::sort(sorted_.begin(), sorted_.end(), [&](std::size_t a, std::size_t b) {
    return records_[a].author_id < records_[b].author_id;
  });
  for (std::size_t i = 1; i < sorted_.size(); ++i) {
    if (records_[sorted_[i]].author_id == records_[sorted_[i - 1]].author_id) {
      throw DataError("duplicate author id " + records_[sorted_[i]].author_id);
    }
  }
}

const AuthorRecord* Catalog::find(const AuthorId& id) const {
  auto it = std::lower_bound(sorted_.begin(), sorted_.end(), id,
                             [&](std::size_t i, const AuthorId& key) {
                               return records_[i].author_id < key;
                             });
  if (it == sorted_.end() || records_[*it].author_id != id) return nullptr;
  return &records_[*it];
}

const AuthorRecord& Catalog::at(const AuthorId& id) const {
  if (const auto* rec = find(id)) return *rec;
  throw DataError("unknown author " + id);
}

bool has_textual_signal(const AuthorRecord& author) {
  if (!blank(author.textual_profile) || !blank(author.audio_text)) return true;
  for (const auto& c : author.comments) {
    if (!blank(c)) return true;
  }
  for (const auto& v : author.visuals) {
    if (v.caption && !blank(*v.caption)) return true;
  }
  return false;
}

ValidationReport validate_catalog(const std::vector<AuthorRecord>& catalog) {
  std::set<AuthorId> seen;
  for (const auto& a : catalog) {
    if (!seen.insert(a.author_id).second) {
      throw DataError("duplicate author id " + a.author_id);
    }
  }
  ValidationReport report;
  for (const auto& a : catalog) {
    if (a.author_id.empty()) {
      report.rejected.push_back({a.author_id, "empty author id"});
    } else if (!has_textual_signal(a)) {
      report.rejected.push_back({a.author_id, "no textual signal"});
    } else {
      report.accepted.push_back(a);
    }
  }
  return report;
}

void check_session(const TippingSession& session, const Catalog& catalog) {
  if (session.history.size() < 3) {
    throw DataError("session " + session.user_id + " has fewer than 3 tipped authors");
  }
  if (std::find(session.history.begin(), session.history.end(), session.ground_truth) !=
      session.history.end()) {
    throw DataError("session " + session.user_id + " has its ground truth in the history");
  }
  for (const auto& id : session.history) {
    if (!catalog.contains(id)) throw DataError("unknown author " + id);
  }
  if (!catalog.contains(session.ground_truth)) {
    throw DataError("unknown author " + session.ground_truth);
  }
}

void to_json(json& j, const VisualRef& v) {
  j = json{{"path", v.path}};
  j["caption"] = v.caption ? json(*v.caption) : json(nullptr);
}

void from_json(const json& j, VisualRef& v) {
  j.at("path").get_to(v.path);
  get_optional(j, "caption", v.caption);
}

void to_json(json& j, const AuthorRecord& a) {
  j = json{{"author_id", a.author_id},
           {"textual_profile", a.textual_profile},
           {"visuals", a.visuals},
           {"audio_text", a.audio_text},
           {"comments", a.comments}};
  j["region"] = a.region ? json(*a.region) : json(nullptr);
}

void from_json(const json& j, AuthorRecord& a) {
  j.at("author_id").get_to(a.author_id);
  a.textual_profile = j.value("textual_profile", std::string{});
  a.visuals = j.value("visuals", std::vector<VisualRef>{});
  a.audio_text = j.value("audio_text", std::string{});
  a.comments = j.value("comments", std::vector<std::string>{});
  get_optional(j, "region", a.region);
}

void to_json(json& j, const TippingSession& s) {
  j = json{{"user_id", s.user_id}, {"history", s.history}, {"ground_truth", s.ground_truth}};
}

void from_json(const json& j, TippingSession& s) {
  j.at("user_id").get_to(s.user_id);
  j.at("history").get_to(s.history);
  j.at("ground_truth").get_to(s.ground_truth);
}

void to_json(json& j, const CandidateSet& c) {
  j = json{{"session_ref", c.session_ref},
           {"candidates", c.candidates},
           {"truth_index", c.truth_index}};
}

void from_json(const json& j, CandidateSet& c) {
  j.at("session_ref").get_to(c.session_ref);
  j.at("candidates").get_to(c.candidates);
  j.at("truth_index").get_to(c.truth_index);
  if (c.truth_index >= c.candidates.size()) {
    throw DataError("candidate set " + c.session_ref + " has truth_index out of range");
  }
}

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vector vector_from_json(const json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

void to_json(json& j, const PreferenceProfile& p) {
  j = json{{"user_id", p.user_id},
           {"preference_text", p.preference_text},
           {"preference_embedding", vector_to_json(p.preference_embedding)},
           {"provenance",
            {{"backend", p.provenance.backend}, {"prompt_hash", p.provenance.prompt_hash}}}};
}

void from_json(const json& j, PreferenceProfile& p) {
  j.at("user_id").get_to(p.user_id);
  j.at("preference_text").get_to(p.preference_text);
  p.preference_embedding = vector_from_json(j.at("preference_embedding"));
  const auto& prov = j.at("provenance");
  prov.at("backend").get_to(p.provenance.backend);
  prov.at("prompt_hash").get_to(p.provenance.prompt_hash);
}

void to_json(json& j, const Recommendation& r) {
  j = json{{"chosen", r.chosen}, {"explanation", r.explanation}, {"raw_output", r.raw_output}};
}

void from_json(const json& j, Recommendation& r) {
  j.at("chosen").get_to(r.chosen);
  j.at("explanation").get_to(r.explanation);
  j.at("raw_output").get_to(r.raw_output);
}

void to_json(json& j, const SimilarityTriple& t) {
  j = json{{"anchor", t.anchor}, {"closer", t.closer}, {"farther", t.farther}};
}

void from_json(const json& j, SimilarityTriple& t) {
  j.at("anchor").get_to(t.anchor);
  j.at("closer").get_to(t.closer);
  j.at("farther").get_to(t.farther);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace mspa
