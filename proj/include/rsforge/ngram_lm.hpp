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

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rsforge/filters.hpp"

namespace rsforge {

/// Add-k smoothed n-gram model over word_tokens().
///
///   p(w | ctx) = (c(ctx, w) + k) / (c(ctx) + k * (V + 1))
///
/// V is the training vocabulary; the +1 slot is the unknown token. Contexts
/// are the previous order-1 tokens, padded with a sentence-start marker.
/// No end-of-sentence event is modelled, so a sentence of t tokens yields
/// exactly t log-likelihoods.
class NgramLm final : public LmScorer {
 public:
  NgramLm(std::size_t order, double k);

  void add_sentence(std::string_view text);
  std::vector<double> log_likelihoods(std::span<const std::string> tokens) const override;

  double probability(std::span<const std::string> context, const std::string& word) const;

  std::size_t order() const { return order_; }
  std::size_t vocabulary() const { return vocab_.size(); }
  const std::vector<std::string>& vocabulary_words() const { return words_; }

 private:
  static constexpr std::uint32_t kStart = 0;
  static constexpr std::uint32_t kUnknown = 1;

  std::uint32_t lookup(const std::string& word) const;
  std::string context_key(std::span<const std::uint32_t> ids, std::size_t pos) const;

  struct ContextCounts {
    std::uint64_t total = 0;
    std::unordered_map<std::uint32_t, std::uint64_t> next;
  };

  std::size_t order_;
  double k_;
  std::unordered_map<std::string, std::uint32_t> vocab_;
  std::vector<std::string> words_;
  std::unordered_map<std::string, ContextCounts> contexts_;
};

/// Trains an NgramLm over `sentences`. Throws DomainError for an empty corpus.
NgramLm train_ngram_lm(std::span<const std::string> sentences, std::size_t order = 2, double k = 1.0);
NgramLm train_ngram_lm(std::span<const SentenceRecord> sentences, std::size_t order = 2,
                       double k = 1.0);

}  // namespace rsforge
