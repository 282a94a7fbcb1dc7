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

// Image and sentence quality rules, the corpus-entropy score, perplexity
// and the cosine band gate.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "rsforge/corpus.hpp"
#include "rsforge/jsonl.hpp"

namespace rsforge {

enum class RejectReason {
  too_few_words,
  too_many_words,
  emoji,
  url,
  complexity,
  low_entropy,
  perplexity_out_of_range,
  size,
  aspect_ratio,
  band,
};

std::string_view to_string(RejectReason reason);
RejectReason reject_reason_from_string(std::string_view s);

struct FilterVerdict {
  std::string id;
  bool kept = true;
  std::optional<RejectReason> reason;
  std::optional<double> score;

  static FilterVerdict keep(std::string id, std::optional<double> score = std::nullopt) {
    return {std::move(id), true, std::nullopt, score};
  }
  static FilterVerdict reject(std::string id, RejectReason why,
                              std::optional<double> score = std::nullopt) {
    return {std::move(id), false, why, score};
  }
  bool operator==(const FilterVerdict&) const = default;
};

Json to_json(const FilterVerdict& v);
FilterVerdict verdict_from_json(const Json& j);

/// Order-insensitive verdict totals.
struct VerdictTally {
  std::size_t input = 0;
  std::size_t kept = 0;
  std::size_t rejected = 0;
  std::map<std::string, std::size_t> reasons;

  void add(const FilterVerdict& v);
  bool conserved() const;
};

// ---------------------------------------------------------------------------
// Images

struct ImageRuleParams {
  std::uint32_t min_short_side = 100;
  double max_aspect = 3.0;
};

/// Rejects when the short side is below min_short_side (size), else when
/// long/short exceeds max_aspect (aspect_ratio). The aspect comparison is
/// exact: max_aspect is decomposed into an integer mantissa and a binary
/// exponent and compared in 128-bit integer arithmetic.
FilterVerdict image_rule_filter(const ImageRecord& img, const ImageRuleParams& params = {});

// ---------------------------------------------------------------------------
// Sentences

/// Returns true when the sentence meets the caption-complexity bar.
using ComplexityAssessor = std::function<bool(std::string_view sentence)>;

/// Default assessor: at least `min_tokens` word tokens and at least one
/// token from the action-verb lexicon (data/action_verbs.txt when
/// `lexicon` is empty).
ComplexityAssessor action_lexicon_assessor(std::vector<std::string> lexicon = {},
                                           std::size_t min_tokens = 5);

/// Accepts every sentence.
ComplexityAssessor accept_all_assessor();

struct SentenceRuleParams {
  std::size_t min_words = 3;
  std::size_t max_words = 81;
};

bool contains_url(std::string_view text);
bool contains_emoji(std::string_view text);

/// First failing rule in the order url, emoji, word count, complexity.
/// Word count uses whitespace-delimited tokens, bounds inclusive.
FilterVerdict sentence_rule_filter(const SentenceRecord& s, const SentenceRuleParams& params,
                                   const ComplexityAssessor& complexity);

// ---------------------------------------------------------------------------
// Corpus entropy

struct CorpusStats {
  std::unordered_map<std::string, std::uint64_t> unigram_counts;
  std::uint64_t total_tokens = 0;

  void add_sentence(std::string_view text);
  void merge(const CorpusStats& other);
  std::size_t vocabulary() const { return unigram_counts.size(); }

  /// count / total for seen words; 1 / (total + vocab + 1) otherwise.
  double probability(const std::string& word) const;
  bool operator==(const CorpusStats&) const = default;
};

/// Counts over word_tokens(); parallel, independent of partitioning.
CorpusStats build_corpus_stats(std::span<const std::string> sentences);
CorpusStats build_corpus_stats(std::span<const SentenceRecord> sentences);

/// theta = sum over the sentence's word tokens of -p ln p.
double entropy_score(std::string_view sentence, const CorpusStats& stats);

inline constexpr double kDefaultEntropyMin = 0.3;

// ---------------------------------------------------------------------------
// Perplexity

/// Per-token log-likelihoods log p(x_i | x_<i), natural log, each <= 0.
class LmScorer {
 public:
  virtual ~LmScorer() = default;
  virtual std::vector<double> log_likelihoods(std::span<const std::string> tokens) const = 0;
};

/// Assigns 1/|V| to every token.
class UniformScorer final : public LmScorer {
 public:
  explicit UniformScorer(std::size_t vocabulary_size);
  std::vector<double> log_likelihoods(std::span<const std::string> tokens) const override;

 private:
  double log_p_;
};

/// exp(-(1/t) sum log p). Throws DomainError when empty.
double perplexity_from_log_likelihoods(std::span<const double> log_likelihoods);

/// Tokenizes with word_tokens(). Throws DomainError for zero tokens.
double perplexity_score(std::string_view sentence, const LmScorer& lm);

struct PerplexityInterval {
  double min = 30.0;
  double max = 200.0;
  bool contains(double ppl) const { return ppl >= min && ppl <= max; }
};

FilterVerdict entropy_filter(const SentenceRecord& s, const CorpusStats& stats,
                             double threshold = kDefaultEntropyMin);
FilterVerdict perplexity_filter(const SentenceRecord& s, const LmScorer& lm,
                                const PerplexityInterval& interval = {});
/// Same verdict from externally computed per-token log-likelihoods.
FilterVerdict perplexity_filter(const std::string& id, std::span<const double> log_likelihoods,
                                const PerplexityInterval& interval = {});

// ---------------------------------------------------------------------------
// Band gate

struct Band {
  double lo = 0.51;
  double hi = 0.61;
};

/// Closed interval: keeps lo <= score <= hi.
inline bool band_gate(double score, const Band& band = {}) {
  return score >= band.lo && score <= band.hi;
}

}  // namespace rsforge
