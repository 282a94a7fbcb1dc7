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

#include "rsforge/filters.hpp"

#include <omp.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>

#include "rsforge/default_lexicons.hpp"

namespace rsforge {

namespace {

constexpr std::array<std::pair<RejectReason, std::string_view>, 10> kReasonNames = {{
    {RejectReason::too_few_words, "too_few_words"},
    {RejectReason::too_many_words, "too_many_words"},
    {RejectReason::emoji, "emoji"},
    {RejectReason::url, "url"},
    {RejectReason::complexity, "complexity"},
    {RejectReason::low_entropy, "low_entropy"},
    {RejectReason::perplexity_out_of_range, "perplexity_out_of_range"},
    {RejectReason::size, "size"},
    {RejectReason::aspect_ratio, "aspect_ratio"},
    {RejectReason::band, "band"},
}};

}  // namespace

std::string_view to_string(RejectReason reason) {
  for (const auto& [r, name] : kReasonNames) {
    if (r == reason) return name;
  }
  return "unknown";
}

RejectReason reject_reason_from_string(std::string_view s) {
  for (const auto& [r, name] : kReasonNames) {
    if (name == s) return r;
  }
  throw FormatError("unknown reject reason '" + std::string(s) + "'");
}

Json to_json(const FilterVerdict& v) {
  Json j = {{"id", v.id}, {"kept", v.kept}};
  if (v.reason) j["reason"] = std::string(to_string(*v.reason));
  if (v.score) j["score"] = *v.score;
  return j;
}

FilterVerdict verdict_from_json(const Json& j) {
  FilterVerdict v;
  v.id = j.at("id").get<std::string>();
  v.kept = j.at("kept").get<bool>();
  if (auto it = j.find("reason"); it != j.end() && !it->is_null()) {
    v.reason = reject_reason_from_string(it->get<std::string>());
  }
  if (auto it = j.find("score"); it != j.end() && !it->is_null()) v.score = it->get<double>();
  if (v.kept && v.reason) throw FormatError("verdict for '" + v.id + "' is kept but has a reason");
  return v;
}

void VerdictTally::add(const FilterVerdict& v) {
  ++input;
  if (v.kept) {
    ++kept;
  } else {
    ++rejected;
    ++reasons[v.reason ? std::string(to_string(*v.reason)) : "unspecified"];
  }
}

bool VerdictTally::conserved() const {
  std::size_t sum = 0;
  for (const auto& [_, n] : reasons) sum += n;
  return input == kept + rejected && sum == rejected;
}

// ---------------------------------------------------------------------------

namespace {

// Exact test of long_side > max_aspect * short_side.
bool exceeds_aspect(std::uint32_t long_side, std::uint32_t short_side, double max_aspect) {
  int exp2 = 0;
  double frac = std::frexp(max_aspect, &exp2);  // max_aspect = frac * 2^exp2
  auto mantissa = static_cast<std::uint64_t>(std::ldexp(frac, 53));
  int e = exp2 - 53;  // max_aspect = mantissa * 2^e exactly
  using u128 = unsigned __int128;
  u128 rhs = static_cast<u128>(mantissa) * short_side;  // < 2^85
  if (e >= 0) {
    if (e > 40) return false;
    return static_cast<u128>(long_side) > (rhs << e);
  }
  if (-e > 95) return true;
  return (static_cast<u128>(long_side) << (-e)) > rhs;
}

}  // namespace

FilterVerdict image_rule_filter(const ImageRecord& img, const ImageRuleParams& params) {
  if (!(params.max_aspect >= 1.0) || !std::isfinite(params.max_aspect)) {
    throw DomainError("max_aspect must be a finite value >= 1");
  }
  std::uint32_t short_side = std::min(img.width, img.height);
  std::uint32_t long_side = std::max(img.width, img.height);
  if (short_side < params.min_short_side) {
    return FilterVerdict::reject(img.image_id, RejectReason::size);
  }
  if (exceeds_aspect(long_side, short_side, params.max_aspect)) {
    return FilterVerdict::reject(img.image_id, RejectReason::aspect_ratio,
                                 static_cast<double>(long_side) / short_side);
  }
  return FilterVerdict::keep(img.image_id);
}

// ---------------------------------------------------------------------------

bool contains_url(std::string_view text) {
  for (std::string_view tok : split_whitespace(text)) {
    if (tok.find("://") != std::string_view::npos) return true;
    std::string lower = to_lower_ascii(tok.substr(0, 4));
    if (lower == "www.") return true;
  }
  return false;
}

bool contains_emoji(std::string_view text) {
  for (char32_t cp : decode_utf8(text)) {
    if ((cp >= 0x1F300 && cp <= 0x1FAFF) || (cp >= 0x2600 && cp <= 0x27BF) || cp == 0xFE0F) {
      return true;
    }
  }
  return false;
}

ComplexityAssessor action_lexicon_assessor(std::vector<std::string> lexicon, std::size_t min_tokens) {
  if (lexicon.empty()) lexicon = parse_word_list(detail::kDefaultActionVerbs);
  auto verbs = std::make_shared<const std::unordered_set<std::string>>(lexicon.begin(), lexicon.end());
  return [verbs, min_tokens](std::string_view sentence) {
    auto tokens = word_tokens(sentence);
    if (tokens.size() < min_tokens) return false;
    return std::any_of(tokens.begin(), tokens.end(),
                       [&](const std::string& t) { return verbs->contains(t); });
  };
}

ComplexityAssessor accept_all_assessor() {
  return [](std::string_view) { return true; };
}

FilterVerdict sentence_rule_filter(const SentenceRecord& s, const SentenceRuleParams& params,
                                   const ComplexityAssessor& complexity) {
  if (contains_url(s.text)) return FilterVerdict::reject(s.sentence_id, RejectReason::url);
  if (contains_emoji(s.text)) return FilterVerdict::reject(s.sentence_id, RejectReason::emoji);
  std::size_t words = split_whitespace(s.text).size();
  if (words < params.min_words) {
    return FilterVerdict::reject(s.sentence_id, RejectReason::too_few_words, static_cast<double>(words));
  }
  if (words > params.max_words) {
    return FilterVerdict::reject(s.sentence_id, RejectReason::too_many_words, static_cast<double>(words));
  }
  if (complexity && !complexity(s.text)) {
    return FilterVerdict::reject(s.sentence_id, RejectReason::complexity);
  }
  return FilterVerdict::keep(s.sentence_id);
}

// ---------------------------------------------------------------------------

void CorpusStats::add_sentence(std::string_view text) {
  for (auto& w : word_tokens(text)) {
    ++unigram_counts[w];
    ++total_tokens;
  }
}

void CorpusStats::merge(const CorpusStats& other) {
  for (const auto& [w, n] : other.unigram_counts) unigram_counts[w] += n;
  total_tokens += other.total_tokens;
}

double CorpusStats::probability(const std::string& word) const {
  if (auto it = unigram_counts.find(word); it != unigram_counts.end()) {
    return static_cast<double>(it->second) / static_cast<double>(total_tokens);
  }
  return 1.0 / static_cast<double>(total_tokens + unigram_counts.size() + 1);
}

namespace {

template <typename GetText>
CorpusStats build_stats(std::size_t n, GetText text_of) {
  std::vector<CorpusStats> partial(static_cast<std::size_t>(std::max(1, omp_get_max_threads())));
#pragma omp parallel
  {
    auto& local = partial[static_cast<std::size_t>(omp_get_thread_num()) % partial.size()];
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
      local.add_sentence(text_of(static_cast<std::size_t>(i)));
    }
  }
  CorpusStats out;
  for (const auto& p : partial) out.merge(p);
  return out;
}

}  // namespace

CorpusStats build_corpus_stats(std::span<const std::string> sentences) {
  return build_stats(sentences.size(), [&](std::size_t i) -> std::string_view { return sentences[i]; });
}

CorpusStats build_corpus_stats(std::span<const SentenceRecord> sentences) {
  return build_stats(sentences.size(),
                     [&](std::size_t i) -> std::string_view { return sentences[i].text; });
}

double entropy_score(std::string_view sentence, const CorpusStats& stats) {
  double theta = 0.0;
  for (const auto& w : word_tokens(sentence)) {
    double p = stats.probability(w);
    if (p > 0.0 && p < 1.0) theta -= p * std::log(p);
  }
  return theta;
}

// ---------------------------------------------------------------------------

UniformScorer::UniformScorer(std::size_t vocabulary_size) {
  if (vocabulary_size == 0) throw DomainError("uniform scorer needs a non-empty vocabulary");
  log_p_ = -std::log(static_cast<double>(vocabulary_size));
}

std::vector<double> UniformScorer::log_likelihoods(std::span<const std::string> tokens) const {
  return std::vector<double>(tokens.size(), log_p_);
}

double perplexity_from_log_likelihoods(std::span<const double> log_likelihoods) {
  if (log_likelihoods.empty()) throw DomainError("perplexity of a zero-token sentence is undefined");
  double sum = 0.0;
  for (double lp : log_likelihoods) sum += lp;
  return std::exp(-sum / static_cast<double>(log_likelihoods.size()));
}

double perplexity_score(std::string_view sentence, const LmScorer& lm) {
  auto tokens = word_tokens(sentence);
  if (tokens.empty()) throw DomainError("perplexity of a zero-token sentence is undefined");
  auto lls = lm.log_likelihoods(tokens);
  if (lls.size() != tokens.size()) throw Error("scorer returned wrong number of log-likelihoods");
  return perplexity_from_log_likelihoods(lls);
}

FilterVerdict entropy_filter(const SentenceRecord& s, const CorpusStats& stats, double threshold) {
  double theta = entropy_score(s.text, stats);
  if (theta < threshold) return FilterVerdict::reject(s.sentence_id, RejectReason::low_entropy, theta);
  return FilterVerdict::keep(s.sentence_id, theta);
}

FilterVerdict perplexity_filter(const SentenceRecord& s, const LmScorer& lm,
                                const PerplexityInterval& interval) {
  auto tokens = word_tokens(s.text);
  if (tokens.empty()) return FilterVerdict::reject(s.sentence_id, RejectReason::perplexity_out_of_range);
  return perplexity_filter(s.sentence_id, lm.log_likelihoods(tokens), interval);
}

FilterVerdict perplexity_filter(const std::string& id, std::span<const double> log_likelihoods,
                                const PerplexityInterval& interval) {
  if (log_likelihoods.empty()) return FilterVerdict::reject(id, RejectReason::perplexity_out_of_range);
  double ppl = perplexity_from_log_likelihoods(log_likelihoods);
  if (!interval.contains(ppl)) return FilterVerdict::reject(id, RejectReason::perplexity_out_of_range, ppl);
  return FilterVerdict::keep(id, ppl);
}

}  // namespace rsforge
