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

#include "rsforge/augment.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <future>
#include <map>
#include <thread>
#include <unordered_map>

#include "rsforge/default_lexicons.hpp"

namespace rsforge {

void TagLexicon::push(std::string tag, TagSource source) {
  if (!lookup_.insert(tag).second) throw DomainError("duplicate tag '" + tag + "'");
  tags.push_back(std::move(tag));
  sources.push_back(source);
}

namespace {

bool is_alpha_lower(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return c >= 'a' && c <= 'z'; });
}

}  // namespace

TagLexicon expand_tag_lexicon(std::span<const std::string> base_tags,
                              std::span<const std::string> sentences, std::size_t target,
                              std::vector<std::string> stopwords) {
  if (stopwords.empty()) stopwords = parse_word_list(detail::kDefaultStopwords);
  const std::unordered_set<std::string> stop(stopwords.begin(), stopwords.end());

  TagLexicon lex;
  for (const auto& t : base_tags) {
    std::string tag = to_lower_ascii(trim(t));
    if (tag.empty()) continue;
    if (lex.contains(tag)) throw DomainError("base tags are not unique: '" + tag + "'");
    lex.push(std::move(tag), TagSource::base);
  }
  if (lex.size() > target) {
    throw DomainError("base tag list has " + std::to_string(lex.size()) + " tags, above the cap of " +
                      std::to_string(target));
  }

  std::unordered_map<std::string, std::size_t> df;
  for (const auto& s : sentences) {
    std::unordered_set<std::string> seen;
    for (auto& w : word_tokens(s)) {
      if (w.size() < 3 || !is_alpha_lower(w) || stop.contains(w) || lex.contains(w)) continue;
      if (seen.insert(w).second) ++df[w];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(df.begin(), df.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
    return x.second != y.second ? x.second > y.second : x.first < y.first;
  });
  for (auto& [word, _] : ranked) {
    if (lex.size() >= target) break;
    lex.push(std::move(word), TagSource::corpus_derived);
  }
  return lex;
}

void write_lexicon(const std::filesystem::path& path, const TagLexicon& lexicon) {
  std::string out;
  for (const auto& t : lexicon.tags) {
    out += t;
    out += '\n';
  }
  write_file(path, out);
}

// ---------------------------------------------------------------------------

std::string_view fusion_instruction() {
  static constexpr std::string_view kInstruction =
      "Please merge the information from the given raw text and the synthetic caption with the "
      "help of the highly relevant detection tags. The raw caption offers detailed real-world "
      "information, yet it suffers from flaws in sentence structure and grammar. The synthetic "
      "caption exhibits impeccable sentence structure but often lacks in-depth real-world details "
      "and may contain false information. The highly relevant detection tags are provided to "
      "enrich the semantic information of the raw caption, while some are redundant and noisy. "
      "You are a great information integration and summary expert, you are also good at enriching "
      "semantic information. Ensure a well-structured sentence while retaining the detailed "
      "real-world information provided in the raw caption. Avoid simply concatenating the "
      "sentences and avoid adding external information to describe. Correct and simplify "
      "sentences finally.";
  return kInstruction;
}

std::string request_id_for(std::string_view image_id, std::uint32_t slot) {
  return std::string(image_id) + "#" + std::to_string(slot);
}

std::string GenerationRequest::request_id() const { return request_id_for(image_id, slot); }

GenerationRequest assemble_prompt(std::string raw, std::string synthetic, std::vector<std::string> tags,
                                  std::string image_id, std::uint32_t slot) {
  if (trim(raw).empty()) throw DomainError("assemble_prompt: empty raw caption");
  if (trim(synthetic).empty()) throw DomainError("assemble_prompt: empty synthetic caption");
  std::string joined;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (i) joined += ", ";
    joined += tags[i];
  }
  GenerationRequest req;
  req.prompt.reserve(fusion_instruction().size() + raw.size() + synthetic.size() + joined.size() + 96);
  req.prompt.append(fusion_instruction());
  req.prompt.append(" Raw caption:").append(raw);
  req.prompt.append(", synthetic caption:").append(synthetic);
  req.prompt.append(", and highly relevant detection tags:").append(joined);
  req.image_id = std::move(image_id);
  req.slot = slot;
  req.raw_caption = std::move(raw);
  req.synthetic_caption = std::move(synthetic);
  req.tags = std::move(tags);
  return req;
}

Json to_json(const WireRequest& r) { return {{"id", r.id}, {"prompt", r.prompt}}; }

// ---------------------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

// Runs one batch to completion, retrying the transient failures.
void run_batch(std::span<const GenerationRequest> requests, std::span<GenerationResult> results,
               GenerationClient& client, const GenerationOptions& options) {
  std::vector<std::size_t> pending(requests.size());
  for (std::size_t i = 0; i < pending.size(); ++i) pending[i] = i;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    results[i].image_id = requests[i].image_id;
    results[i].slot = requests[i].slot;
  }

  const std::size_t max_attempts = options.max_retries + 1;
  auto backoff = options.initial_backoff;
  for (std::size_t attempt = 1; !pending.empty(); ++attempt) {
    std::vector<WireRequest> wire;
    wire.reserve(pending.size());
    for (std::size_t i : pending) wire.push_back({requests[i].request_id(), requests[i].prompt});

    std::vector<ItemOutcome> outcomes;
    try {
      outcomes = client.generate(wire);
      if (outcomes.size() != wire.size()) {
        throw TransientError("client returned " + std::to_string(outcomes.size()) + " outcomes for " +
                             std::to_string(wire.size()) + " requests");
      }
    } catch (const TransientError& e) {
      outcomes.assign(wire.size(), ItemOutcome::retry(e.what()));
    } catch (const std::exception& e) {
      outcomes.assign(wire.size(), ItemOutcome::fail(e.what()));
    }

    std::vector<std::size_t> again;
    for (std::size_t p = 0; p < pending.size(); ++p) {
      GenerationResult& r = results[pending[p]];
      const ItemOutcome& o = outcomes[p];
      r.attempts = attempt;
      if (o.kind == ItemOutcome::Kind::ok) {
        std::string text = clean_generation_text(o.text);
        if (text.empty()) {
          r.status = GenerationStatus::failed;
          r.reason = "empty_text";
        } else {
          r.status = GenerationStatus::ok;
          r.text = std::move(text);
          r.reason.clear();
        }
      } else if (o.kind == ItemOutcome::Kind::transient && attempt < max_attempts) {
        again.push_back(pending[p]);
      } else {
        r.status = GenerationStatus::failed;
        r.reason = o.reason.empty() ? "failed" : o.reason;
      }
    }
    pending = std::move(again);
    if (!pending.empty() && backoff.count() > 0) {
      std::this_thread::sleep_for(backoff);
      backoff = std::chrono::milliseconds(
          static_cast<std::int64_t>(std::llround(static_cast<double>(backoff.count()) * options.backoff_factor)));
    }
  }
}

}  // namespace

std::vector<GenerationResult> generate_synthetic(std::span<const GenerationRequest> requests,
                                                 GenerationClient& client,
                                                 const GenerationOptions& options) {
  std::vector<GenerationResult> results(requests.size());
  const std::size_t batch = std::max<std::size_t>(1, options.batch);
  const std::size_t window = std::max<std::size_t>(1, options.window);

  // Results land in their request slot, so completion order never affects
  // output order.
  std::deque<std::future<void>> in_flight;
  for (std::size_t begin = 0; begin < requests.size(); begin += batch) {
    std::size_t n = std::min(batch, requests.size() - begin);
    auto req = requests.subspan(begin, n);
    auto res = std::span<GenerationResult>(results).subspan(begin, n);
    if (window == 1) {
      run_batch(req, res, client, options);
      continue;
    }
    if (in_flight.size() >= window) {
      in_flight.front().get();
      in_flight.pop_front();
    }
    in_flight.push_back(std::async(std::launch::async, [req, res, &client, &options] {
      run_batch(req, res, client, options);
    }));
  }
  while (!in_flight.empty()) {
    in_flight.front().get();
    in_flight.pop_front();
  }
  return results;
}

// ---------------------------------------------------------------------------

std::string clean_generation_text(std::string_view text) {
  std::string_view s = trim(text);
  while (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    s = trim(s.substr(1, s.size() - 2));
  }
  return std::string(s);
}

ParsedGeneration parse_generation_response(std::string_view raw_response) {
  Json j;
  try {
    j = Json::parse(raw_response);
  } catch (const Json::exception& e) {
    throw GenerationParseError(std::string("parse_error: ") + e.what());
  }
  if (!j.is_object()) throw GenerationParseError("parse_error: response is not an object");
  auto text = j.find("text");
  if (text == j.end() || !text->is_string()) {
    throw GenerationParseError("parse_error: response has no string \"text\" field");
  }
  ParsedGeneration out;
  if (auto id = j.find("id"); id != j.end()) {
    if (!id->is_string()) throw GenerationParseError("parse_error: \"id\" is not a string");
    out.id = id->get<std::string>();
  }
  out.text = clean_generation_text(text->get<std::string>());
  return out;
}

std::string parse_generation(std::string_view raw_response) {
  return parse_generation_response(raw_response).text;
}

Json to_json(const GenerationResult& r) {
  Json j = {{"image_id", r.image_id},
            {"slot", r.slot},
            {"text", r.text},
            {"status", r.status == GenerationStatus::ok ? "ok" : "failed"},
            {"attempts", r.attempts}};
  if (r.status != GenerationStatus::ok) j["reason"] = r.reason;
  return j;
}

GenerationResult generation_result_from_json(const Json& j) {
  GenerationResult r;
  r.image_id = j.at("image_id").get<std::string>();
  r.slot = j.value("slot", 0u);
  r.text = j.at("text").get<std::string>();
  std::string status = j.at("status").get<std::string>();
  if (status == "ok") {
    r.status = GenerationStatus::ok;
  } else if (status == "failed") {
    r.status = GenerationStatus::failed;
  } else {
    throw FormatError("unknown generation status '" + status + "'");
  }
  r.reason = j.value("reason", std::string());
  r.attempts = j.value("attempts", std::size_t{0});
  return r;
}

}  // namespace rsforge
