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

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "rsforge/sampler.hpp"
#include "support.hpp"

using namespace rsforge;

namespace {

std::vector<PairRecord> layout(const std::map<std::int64_t, std::size_t>& sizes) {
  std::vector<PairRecord> out;
  for (const auto& [c, n] : sizes) {
    for (std::size_t i = 0; i < n; ++i) {
      PairRecord r;
      r.image_id = "c" + std::to_string(c) + "-" + std::to_string(i);
      r.cluster = c;
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::set<std::string> ids_of(const std::vector<PairRecord>& recs) {
  std::set<std::string> s;
  for (const auto& r : recs) s.insert(r.image_id);
  return s;
}

std::map<std::int64_t, std::size_t> per_cluster(const std::vector<PairRecord>& recs) {
  std::map<std::int64_t, std::size_t> m;
  for (const auto& r : recs) ++m[r.cluster];
  return m;
}

}  // namespace

TEST_SUITE("sampler") {

TEST_CASE("cap arithmetic") {
  auto recs = layout({{0, 100}, {1, 5}});
  auto out = balance_sample(recs, 20, 1);
  CHECK(out.sampled.size() == 25);
  CHECK(per_cluster(out.sampled) == std::map<std::int64_t, std::size_t>{{0, 20}, {1, 5}});
  CHECK(out.report.clusters.at(0).before == 100);
  CHECK(out.report.clusters.at(0).after == 20);
  CHECK(out.report.input == 105);
  CHECK(out.report.output == 25);
}

TEST_CASE("large cap is the identity") {
  auto recs = layout({{0, 7}, {3, 19}, {9, 1}});
  auto out = balance_sample(recs, 19, 5);
  CHECK(out.sampled == recs);
}

TEST_CASE("presets") {
  CHECK(sampler_preset_cap("15m") == 20u);
  CHECK(sampler_preset_cap("30m") == 35u);
  CHECK(sampler_preset_cap("100m") == 180u);
  CHECK(!sampler_preset_cap("1b"));
}

TEST_CASE("selection picks the lowest ranks") {
  auto recs = layout({{0, 60}});
  auto out = balance_sample(recs, 10, 42);
  std::vector<std::pair<std::uint64_t, std::string>> ranked;
  for (const auto& r : recs) ranked.push_back({sample_rank(42, r.image_id), r.image_id});
  std::sort(ranked.begin(), ranked.end());
  std::set<std::string> want;
  for (std::size_t i = 0; i < 10; ++i) want.insert(ranked[i].second);
  CHECK(ids_of(out.sampled) == want);
}

TEST_CASE("order and worker invariance") {
  std::mt19937_64 rng(3);
  auto recs = layout({{0, 300}, {1, 40}, {2, 21}, {5, 3}, {8, 90}});
  auto ref = ids_of(balance_sample(recs, 20, 9).sampled);
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(recs.begin(), recs.end(), rng);
    for (int w : {1, 4, 8}) {
      ScopedWorkers sw(w);
      auto out = balance_sample(recs, 20, 9);
      CHECK(ids_of(out.sampled) == ref);
      // Output keeps input order.
      std::vector<std::string> order;
      for (const auto& r : recs) {
        if (ref.contains(r.image_id)) order.push_back(r.image_id);
      }
      std::vector<std::string> got;
      for (const auto& r : out.sampled) got.push_back(r.image_id);
      CHECK(got == order);
    }
  }
  CHECK(ids_of(balance_sample(recs, 20, 10).sampled) != ref);
}

TEST_CASE("selection is close to uniform") {
  auto recs = layout({{0, 50}});
  std::map<std::string, int> hits;
  const int seeds = 4000;
  for (int s = 0; s < seeds; ++s) {
    for (const auto& r : balance_sample(recs, 10, static_cast<std::uint64_t>(s)).sampled) ++hits[r.image_id];
  }
  REQUIRE(hits.size() == 50);
  for (const auto& [id, n] : hits) CHECK(std::abs(n / double(seeds) - 0.2) < 0.035);
}

TEST_CASE("flattening") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    std::map<std::int64_t, std::size_t> sizes;
    std::size_t clusters = 1 + rng() % 30;
    for (std::size_t c = 0; c < clusters; ++c) sizes[static_cast<std::int64_t>(c)] = 1 + rng() % 200;
    auto out = balance_sample(layout(sizes), 20, trial);
    CHECK(out.report.head_ratio_after() <= out.report.head_ratio_before() + 1e-12);
    for (const auto& [c, n] : per_cluster(out.sampled)) CHECK(n == std::min<std::size_t>(sizes[c], 20));
  }
}

TEST_CASE("missing cluster ids") {
  auto recs = layout({{0, 5}});
  recs[2].cluster = -1;
  auto out = balance_sample(recs, 3, 1);
  CHECK(out.sampled.size() == 3);
  REQUIRE(out.errors.size() == 1);
  CHECK(out.errors[0].id == recs[2].image_id);
  CHECK(out.errors[0].reason == "missing_cluster");
  CHECK(out.report.missing_cluster == 1);
  CHECK_THROWS_AS(balance_sample(recs, 0, 1), DomainError);
}

TEST_CASE("report json") {
  auto out = balance_sample(layout({{0, 30}, {1, 2}}), 20, 4);
  auto j = out.report.to_json();
  CHECK(j.at("cap") == 20);
  CHECK(j.at("output") == 22);
  CHECK(j.at("per_cluster").size() == 2);
  CHECK(j.at("per_cluster")[0] == Json({{"cluster", 0}, {"before", 30}, {"after", 20}}));
}

}  // TEST_SUITE
