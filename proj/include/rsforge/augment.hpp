// Copyright 2026 The rsforge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Synthetic caption support: tag lexicon expansion, fusion prompt
// rendering and the batched generation client loop.
//
// Wire contract shared by every client:
//   request  {"id": str, "prompt": str}
//   response {"id": str, "text": str}

#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "rsforge/common.hpp"
#include "rsforge/jsonl.hpp"

namespace rsforge {

// ---------------------------------------------------------------------------
// Tag lexicon

enum class TagSource { base, corpus_derived };

struct TagLexicon {
  std::vector<std::string> tags;
  std::vector<TagSource> sources;  // parallel to tags

  std::size_t size() const { return tags.size(); }
  bool contains(const std::string& tag) const { return lookup_.contains(tag); }
  void push(std::string tag, TagSource source);

 private:
  std::unordered_set<std::string> lookup_;
};

inline constexpr std::size_t kDefaultLexiconTarget = 8000;

/// Base tags (lowercased, must be unique) first, then corpus candidates by
/// sentence frequency descending, ties lexicographic, until `target` tags.
/// A candidate is an alphabetic word token of length >= 3 that is not a
/// stop word. Empty `stopwords` means the list in data/stopwords.txt.
TagLexicon expand_tag_lexicon(std::span<const std::string> base_tags,
                              std::span<const std::string> sentences,
                              std::size_t target = kDefaultLexiconTarget,
                              std::vector<std::string> stopwords = {});

void write_lexicon(const std::filesystem::path& path, const TagLexicon& lexicon);

// ---------------------------------------------------------------------------
// Prompts

/// The fixed instruction text that precedes the payload slots.
std::string_view fusion_instruction();

struct GenerationRequest {
  std::string image_id;
  std::uint32_t slot = 0;
  std::string raw_caption;
  std::string synthetic_caption;
  std::vector<std::string> tags;
  std::string prompt;

  /// Wire id: "<image_id>#<slot>".
  std::string request_id() const;
};

/// Renders the fusion prompt; tags are joined with ", ". Throws
/// DomainError when raw or synthetic is empty.
GenerationRequest assemble_prompt(std::string raw, std::string synthetic,
                                  std::vector<std::string> tags, std::string image_id = {},
                                  std::uint32_t slot = 0);

std::string request_id_for(std::string_view image_id, std::uint32_t slot);

// ---------------------------------------------------------------------------
// Generation

struct WireRequest {
  std::string id;
  std::string prompt;
};

Json to_json(const WireRequest& r);

struct ItemOutcome {
  enum class Kind { ok, transient, permanent };
  Kind kind = Kind::ok;
  std::string text;    // when ok
  std::string reason;  // when not ok

  static ItemOutcome success(std::string text) { return {Kind::ok, std::move(text), {}}; }
  static ItemOutcome retry(std::string why) { return {Kind::transient, {}, std::move(why)}; }
  static ItemOutcome fail(std::string why) { return {Kind::permanent, {}, std::move(why)}; }
};

/// Thrown by a client when the whole batch failed in a retryable way
/// (connection refused, timeout, 5xx). Any other exception from generate()
/// fails the batch permanently.
class TransientError : public Error {
 public:
  using Error::Error;
};

/// One generation endpoint. generate() returns one outcome per request, in
/// request order. Implementations must tolerate concurrent calls.
class GenerationClient {
 public:
  virtual ~GenerationClient() = default;
  virtual std::vector<ItemOutcome> generate(std::span<const WireRequest> batch) = 0;
};

struct GenerationOptions {
  std::size_t max_retries = 3;  // retries after the first attempt
  std::size_t batch = 16;
  std::size_t window = 4;       // batches in flight
  std::chrono::milliseconds initial_backoff{50};
  double backoff_factor = 2.0;
};

enum class GenerationStatus { ok, failed };

struct GenerationResult {
  std::string image_id;
  std::uint32_t slot = 0;
  std::string text;
  GenerationStatus status = GenerationStatus::ok;
  std::string reason;
  std::size_t attempts = 0;
};

/// One result per request, in request order. Transient failures are retried
/// with exponential backoff; permanent ones and exhausted retries surface
/// as failed results.
std::vector<GenerationResult> generate_synthetic(std::span<const GenerationRequest> requests,
                                                 GenerationClient& client,
                                                 const GenerationOptions& options = {});

class GenerationParseError : public Error {
 public:
  using Error::Error;
};

struct ParsedGeneration {
  std::string id;
  std::string text;
};

/// Parses one {"id","text"} response object. "id" is optional here; the
/// text is cleaned with clean_generation_text(). Throws GenerationParseError.
ParsedGeneration parse_generation_response(std::string_view raw_response);
std::string parse_generation(std::string_view raw_response);

/// Strips surrounding whitespace and matching double quotes, repeatedly.
std::string clean_generation_text(std::string_view text);

Json to_json(const GenerationResult& r);
GenerationResult generation_result_from_json(const Json& j);

}  // namespace rsforge
