#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mspa/backend.hpp"
#include "mspa/encoder.hpp"
#include "mspa/types.hpp"

namespace mspa {

// Text and visual material of one author, in a fixed layout:
//   "Profile: {t}\nAudio: {a}\nComments: {c1 | c2 | ...}"
struct ModalBundle {
  std::string text_block;
  std::vector<VisualRef> visual_parts;

  bool operator==(const ModalBundle&) const = default;
};

struct PromptPart {
  std::string text;
  std::vector<VisualRef> images;

  bool operator==(const PromptPart&) const = default;
};

struct Prompt {
  std::string instruction;
  std::vector<PromptPart> parts;
  std::string answer_format;
};

ModalBundle assemble_author_bundle(const AuthorRecord& author);

/// Preference-extraction prompt: one part per tipped author, in tip order.
/// Unresolved ids throw DataError("unknown author <id>").
Prompt build_preference_prompt(const TippingSession& session, const Catalog& catalog);

Prompt build_author_prompt(const AuthorRecord& author);

// Lowers a prompt to chat messages. Image references are forwarded only when
// `images` is set; captions always travel as "[image] caption" text items.
ChatRequest to_request(const Prompt& prompt, bool images);

std::string prompt_hash(const ChatRequest& req);

PreferenceProfile compose_preference(const TippingSession& session, const Catalog& catalog,
                                     const CompletionBackend& backend,
                                     const TextEncoder& encoder);

std::string describe_author(const AuthorRecord& author, const CompletionBackend& backend);

// Runs fn(i) for i in [0, n) on up to `max_inflight` threads and returns the
// results in index order. The first exception (lowest index) is rethrown.
template <typename Fn>
auto parallel_map(std::size_t n, std::size_t max_inflight, Fn&& fn)
    -> std::vector<decltype(fn(std::size_t{}))> {
  using R = decltype(fn(std::size_t{}));
  std::vector<std::optional<R>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(max_inflight, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<R> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace mspa
