#include "mspa/composer.hpp"

#include <fmt/format.h>

#include "mspa/assets.hpp"
#include "mspa/rng.hpp"

namespace mspa {

ModalBundle assemble_author_bundle(const AuthorRecord& author) {
  std::string comments;
  for (std::size_t i = 0; i < author.comments.size(); ++i) {
    if (i > 0) comments += " | ";
    comments += author.comments[i];
  }
  ModalBundle b;
  b.text_block = "Profile: " + author.textual_profile + "\nAudio: " + author.audio_text +
                 "\nComments:" + (comments.empty() ? "" : " " + comments);
  b.visual_parts = author.visuals;
  return b;
}

Prompt build_preference_prompt(const TippingSession& session, const Catalog& catalog) {
  Prompt p;
  p.instruction = std::string(assets::preference_instruction);
  p.answer_format = "A natural-language description of the user's behavioral preference.";
  for (std::size_t i = 0; i < session.history.size(); ++i) {
    const auto* author = catalog.find(session.history[i]);
    if (!author) throw DataError("unknown author " + session.history[i]);
    auto bundle = assemble_author_bundle(*author);
    p.parts.push_back({fmt::format("Author {}:\n{}", i + 1, bundle.text_block),
                       std::move(bundle.visual_parts)});
  }
  return p;
}

Prompt build_author_prompt(const AuthorRecord& author) {
  auto bundle = assemble_author_bundle(author);
  Prompt p;
  p.instruction = std::string(assets::author_card_instruction);
  p.answer_format = "A short natural-language author card.";
  p.parts.push_back({"Author ID: " + author.author_id + "\n" + bundle.text_block,
                     std::move(bundle.visual_parts)});
  return p;
}

ChatRequest to_request(const Prompt& prompt, bool images) {
  ChatRequest req;
  req.messages.push_back({"system", {{"text", prompt.instruction}}});
  ChatMessage user{"user", {}};
  for (const auto& part : prompt.parts) {
    user.content.push_back({"text", part.text});
    for (const auto& img : part.images) {
      if (images) user.content.push_back({"image_ref", img.path});
      if (img.caption && !img.caption->empty()) {
        user.content.push_back({"text", "[image] " + *img.caption});
      }
    }
  }
  user.content.push_back({"text", "Answer format: " + prompt.answer_format});
  req.messages.push_back(std::move(user));
  return req;
}

std::string prompt_hash(const ChatRequest& req) {
  return fmt::format("{:016x}", fnv1a64(request_to_json(req, "").dump()));
}

PreferenceProfile compose_preference(const TippingSession& session, const Catalog& catalog,
                                     const CompletionBackend& backend,
                                     const TextEncoder& encoder) {
  const auto req = to_request(build_preference_prompt(session, catalog), backend.accepts_images());
  PreferenceProfile profile;
  profile.user_id = session.user_id;
  profile.preference_text = backend.complete(req);
  if (profile.preference_text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw BackendError("empty completion for user " + session.user_id, false, 1);
  }
  profile.preference_embedding = embed_text(profile.preference_text, encoder);
  profile.provenance = {backend.identifier(), prompt_hash(req)};
  return profile;
}

std::string describe_author(const AuthorRecord& author, const CompletionBackend& backend) {
  const auto req = to_request(build_author_prompt(author), backend.accepts_images());
  auto card = backend.complete(req);
  if (card.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw BackendError("empty completion for author " + author.author_id, false, 1);
  }
  return card;
}

}  // namespace mspa
