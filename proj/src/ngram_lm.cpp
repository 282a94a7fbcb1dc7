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

#include "rsforge/ngram_lm.hpp"

#include <cmath>

namespace rsforge {

NgramLm::NgramLm(std::size_t order, double k) : order_(order), k_(k) {
  if (order_ == 0) throw DomainError("n-gram order must be >= 1");
  if (!(k_ > 0.0)) throw DomainError("add-k smoothing constant must be positive");
}

std::uint32_t NgramLm::lookup(const std::string& word) const {
  auto it = vocab_.find(word);
  return it == vocab_.end() ? kUnknown : it->second;
}

std::string NgramLm::context_key(std::span<const std::uint32_t> ids, std::size_t pos) const {
  // ids[pos] is the predicted token; context is the order-1 ids before it.
  std::string key;
  key.reserve(4 * (order_ - 1));
  for (std::size_t back = order_ - 1; back >= 1; --back) {
    std::uint32_t id = pos >= back ? ids[pos - back] : kStart;
    key.append(reinterpret_cast<const char*>(&id), sizeof(id));
  }
  return key;
}

void NgramLm::add_sentence(std::string_view text) {
  auto tokens = word_tokens(text);
  std::vector<std::uint32_t> ids;
  ids.reserve(tokens.size());
  for (auto& t : tokens) {
    auto [it, inserted] = vocab_.emplace(t, static_cast<std::uint32_t>(words_.size() + 2));
    if (inserted) words_.push_back(t);
    ids.push_back(it->second);
  }
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto& ctx = contexts_[context_key(ids, i)];
    ++ctx.total;
    ++ctx.next[ids[i]];
  }
}

double NgramLm::probability(std::span<const std::string> context, const std::string& word) const {
  std::vector<std::uint32_t> ids;
  for (const auto& c : context) ids.push_back(lookup(c));
  ids.push_back(lookup(word));
  const double slots = static_cast<double>(vocab_.size() + 1);
  auto it = contexts_.find(context_key(ids, ids.size() - 1));
  if (it == contexts_.end()) return 1.0 / slots;
  std::uint64_t c = 0;
  if (auto n = it->second.next.find(ids.back()); n != it->second.next.end()) c = n->second;
  return (static_cast<double>(c) + k_) / (static_cast<double>(it->second.total) + k_ * slots);
}

std::vector<double> NgramLm::log_likelihoods(std::span<const std::string> tokens) const {
  std::vector<std::uint32_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(lookup(t));
  const double slots = static_cast<double>(vocab_.size() + 1);
  std::vector<double> out;
  out.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto it = contexts_.find(context_key(ids, i));
    double p = 1.0 / slots;
    if (it != contexts_.end()) {
      std::uint64_t c = 0;
      if (auto n = it->second.next.find(ids[i]); n != it->second.next.end()) c = n->second;
      p = (static_cast<double>(c) + k_) / (static_cast<double>(it->second.total) + k_ * slots);
    }
    out.push_back(std::log(p));
  }
  return out;
}

NgramLm train_ngram_lm(std::span<const std::string> sentences, std::size_t order, double k) {
  if (sentences.empty()) throw DomainError("cannot train an n-gram model on an empty corpus");
  NgramLm lm(order, k);
  for (const auto& s : sentences) lm.add_sentence(s);
  return lm;
}

NgramLm train_ngram_lm(std::span<const SentenceRecord> sentences, std::size_t order, double k) {
  if (sentences.empty()) throw DomainError("cannot train an n-gram model on an empty corpus");
  NgramLm lm(order, k);
  for (const auto& s : sentences) lm.add_sentence(s.text);
  return lm;
}

}  // namespace rsforge
