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

#include "rsforge/sampler.hpp"

#include <algorithm>
#include <unordered_map>

namespace rsforge {

std::optional<std::size_t> sampler_preset_cap(std::string_view preset) {
  if (preset == "15m") return 20;
  if (preset == "30m") return 35;
  if (preset == "100m") return 180;
  return std::nullopt;
}

std::uint64_t sample_rank(std::uint64_t seed, std::string_view image_id) {
  return splitmix64(fnv1a64(image_id) ^ splitmix64(seed));
}

namespace {

double head_ratio(const std::map<std::int64_t, ClusterSizes>& clusters, bool after) {
  std::vector<std::size_t> sizes;
  for (const auto& [_, s] : clusters) sizes.push_back(after ? s.after : s.before);
  if (sizes.empty()) return 0.0;
  std::sort(sizes.begin(), sizes.end());
  double median = sizes.size() % 2 == 1
                      ? static_cast<double>(sizes[sizes.size() / 2])
                      : 0.5 * static_cast<double>(sizes[sizes.size() / 2 - 1] + sizes[sizes.size() / 2]);
  return median == 0.0 ? 0.0 : static_cast<double>(sizes.back()) / median;
}

}  // namespace

double DistributionReport::head_ratio_before() const { return head_ratio(clusters, false); }
double DistributionReport::head_ratio_after() const { return head_ratio(clusters, true); }

Json DistributionReport::to_json() const {
  Json per = Json::array();
  for (const auto& [c, s] : clusters) per.push_back({{"cluster", c}, {"before", s.before}, {"after", s.after}});
  return {{"cap", cap},
          {"seed", seed},
          {"input", input},
          {"output", output},
          {"missing_cluster", missing_cluster},
          {"clusters", static_cast<std::uint64_t>(clusters.size())},
          {"head_ratio_before", head_ratio_before()},
          {"head_ratio_after", head_ratio_after()},
          {"per_cluster", std::move(per)}};
}

SelectionResult select_balanced(std::span<const SampleKey> keys, std::size_t cap, std::uint64_t seed) {
  if (cap == 0) throw DomainError("sampling cap must be >= 1");
  SelectionResult out;
  out.selected.assign(keys.size(), false);
  out.report.cap = cap;
  out.report.seed = seed;
  out.report.input = keys.size();

  std::unordered_map<std::int64_t, std::size_t> slot_of;
  std::vector<std::vector<std::uint32_t>> groups;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (keys[i].cluster < 0) {
      ++out.report.missing_cluster;
      continue;
    }
    auto [it, inserted] = slot_of.emplace(keys[i].cluster, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(static_cast<std::uint32_t>(i));
  }

  // Clusters are independent; each writes only its own members' flags.
  std::vector<char> flags(keys.size(), 0);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t g = 0; g < static_cast<std::ptrdiff_t>(groups.size()); ++g) {
    auto& members = groups[static_cast<std::size_t>(g)];
    if (members.size() > cap) {
      std::vector<std::pair<std::uint64_t, std::uint32_t>> ranked;
      ranked.reserve(members.size());
      for (std::uint32_t i : members) ranked.emplace_back(sample_rank(seed, keys[i].image_id), i);
      std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(cap), ranked.end(),
                        [&](const auto& x, const auto& y) {
                          if (x.first != y.first) return x.first < y.first;
                          return keys[x.second].image_id < keys[y.second].image_id;
                        });
      for (std::size_t r = 0; r < cap; ++r) flags[ranked[r].second] = 1;
    } else {
      for (std::uint32_t i : members) flags[i] = 1;
    }
  }

  for (const auto& [cluster, slot] : slot_of) {
    auto& sizes = out.report.clusters[cluster];
    sizes.before = groups[slot].size();
    sizes.after = std::min(sizes.before, cap);
    out.report.output += sizes.after;
  }
  for (std::size_t i = 0; i < keys.size(); ++i) out.selected[i] = flags[i] != 0;
  return out;
}

SampleOutput balance_sample(std::span<const PairRecord> records, std::size_t cap, std::uint64_t seed) {
  std::vector<SampleKey> keys;
  keys.reserve(records.size());
  for (const auto& r : records) keys.push_back({r.image_id, r.cluster});
  SelectionResult sel = select_balanced(keys, cap, seed);
  SampleOutput out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].cluster < 0) {
      out.errors.push_back({records[i].image_id, "missing_cluster"});
    } else if (sel.selected[i]) {
      out.sampled.push_back(records[i]);
    }
  }
  out.report = std::move(sel.report);
  return out;
}

}  // namespace rsforge
