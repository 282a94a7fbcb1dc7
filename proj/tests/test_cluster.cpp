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

#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "rsforge/cluster.hpp"
#include "rsforge/jsonl.hpp"
#include "support.hpp"

using namespace rsforge;

namespace {

KMeansOptions opts(std::size_t k, std::uint64_t seed, bool spherical = true) {
  KMeansOptions o;
  o.k = k;
  o.seed = seed;
  o.spherical = spherical;
  return o;
}

std::vector<std::vector<double>> points_of(const EmbeddingStore& s) {
  std::vector<std::vector<double>> pts;
  for (std::size_t r = 0; r < s.size(); ++r) pts.emplace_back(s.row(r).begin(), s.row(r).end());
  return pts;
}

}  // namespace

TEST_SUITE("cluster") {

TEST_CASE("single cluster is the mean") {
  std::vector<std::vector<double>> pts{{0, 0, 1}, {0, 2, 1}};
  auto s = testing::store_from_points(pts, false);
  auto m = kmeans_fit(s, opts(1, 1, false));
  CHECK(m.centroids().row(0)[0] == doctest::Approx(0.0));
  CHECK(m.centroids().row(0)[1] == doctest::Approx(1.0));
  CHECK(m.centroids().row(0)[2] == doctest::Approx(1.0));
  CHECK(m.inertia() == doctest::Approx(2.0));
}

TEST_CASE("four separated points reach the exhaustive optimum") {
  std::vector<std::vector<double>> pts{{1, 0.05, 0}, {1, -0.05, 0}, {0, 1, 0.1}, {0.05, 1, -0.1}};
  for (auto& p : pts) p = testing::unit(p);
  auto s = testing::store_from_points(pts, true);
  for (bool spherical : {true, false}) {
    double best = testing::oracle_kmeans_optimum(points_of(s), 2, spherical);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      auto m = kmeans_fit(s, opts(2, seed, spherical));
      CHECK(std::abs(m.inertia() - best) <= 1e-6);
    }
  }
}

TEST_CASE("errors") {
  auto s = testing::random_store(5, 3, 1);
  CHECK_THROWS_AS(kmeans_fit(s, opts(0, 1)), DomainError);
  CHECK_THROWS_AS(kmeans_fit(s, opts(6, 1)), DomainError);
  auto raw = EmbeddingStore({"a", "b"}, 2, {2, 0, 0, 3}, false);
  CHECK_THROWS_AS(kmeans_fit(raw, opts(1, 1, true)), DomainError);
  auto m = kmeans_fit(s, opts(2, 1));
  CHECK_THROWS_AS(nearest_centroids(s.row(0), m, 3), DomainError);
}

TEST_CASE("determinism across runs and workers") {
  auto s = testing::clustered_store(600, 16, 8, 0.8, 3);
  auto ref = kmeans_fit(s, opts(8, 42));
  for (int w : {1, 2, 4, 8}) {
    ScopedWorkers sw(w);
    auto m = kmeans_fit(s, opts(8, 42));
    CHECK(m.centroids().values == ref.centroids().values);
    CHECK(m.labels() == ref.labels());
    CHECK(m.inertia_history() == ref.inertia_history());
  }
}

TEST_CASE("inertia never increases") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto s = testing::clustered_store(300, 8, 6, 1.2, seed);
    for (bool spherical : {true, false}) {
      auto m = kmeans_fit(s, opts(7, seed, spherical));
      const auto& h = m.inertia_history();
      REQUIRE(!h.empty());
      for (std::size_t i = 1; i < h.size(); ++i) CHECK(h[i] <= h[i - 1] + 1e-9);
    }
  }
}

TEST_CASE("model invariants") {
  auto s = testing::clustered_store(250, 8, 5, 0.7, 6);
  auto m = kmeans_fit(s, opts(9, 3));
  std::size_t total = 0;
  for (std::size_t c = 0; c < m.k(); ++c) {
    total += m.members(c).size();
    CHECK(!m.members(c).empty());
    for (auto pos : m.members(c)) CHECK(m.labels()[pos] == c);
    double n = 0.0;
    for (double v : m.centroids().row(c)) n += v * v;
    CHECK(std::abs(std::sqrt(n) - 1.0) <= 1e-5);
  }
  CHECK(total == s.size());
  // Reassigning against the final centroids changes nothing.
  CHECK(assign(s, m) == m.labels());
}

TEST_CASE("assignment rules") {
  kernels::Centroids c(3, 2);
  c.row(0)[0] = 1;
  c.row(1)[1] = 1;
  c.row(2)[0] = -1;
  ClusterModel m(c, true, {}, {});
  auto pts = normalize(EmbeddingStore({"on1", "tie", "on2"}, 2, {0, 1, 1, 1, -1, 0}, false));
  CHECK(assign(pts, m) == std::vector<std::uint32_t>{1, 0, 2});
}

TEST_CASE("nearest centroids") {
  auto s = testing::clustered_store(200, 8, 6, 0.6, 7);
  auto m = kmeans_fit(s, opts(6, 2));
  std::vector<float> cen(m.centroids().row(3).begin(), m.centroids().row(3).end());
  auto top = nearest_centroids(cen, m, 6);
  REQUIRE(top.size() == 6);
  CHECK(top[0].cluster == 3);
  CHECK(top[0].score == doctest::Approx(1.0).epsilon(1e-6));
  for (std::size_t r = 0; r < 20; ++r) {
    std::vector<std::pair<double, std::uint32_t>> all;
    for (std::uint32_t c = 0; c < 6; ++c) {
      double d = 0.0;
      for (std::size_t t = 0; t < 8; ++t) d += s.row(r)[t] * m.centroids().row(c)[t];
      all.push_back({-d, c});
    }
    std::sort(all.begin(), all.end());
    auto got = nearest_centroids(s.row(r), m, 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(got[i].cluster == all[i].second);
  }
}

TEST_CASE("model files round trip") {
  auto s = testing::clustered_store(80, 4, 3, 0.5, 8);
  auto m = kmeans_fit(s, opts(3, 1));
  auto dir = testing::temp_dir("cluster-files");
  write_cluster_model(m, dir / "c.rseb", dir / "a.jsonl");
  auto back = read_cluster_model(dir / "c.rseb", dir / "a.jsonl");
  CHECK(back.k() == 3);
  CHECK(back.ids() == m.ids());
  CHECK(back.labels() == m.labels());
  for (std::size_t i = 0; i < m.centroids().values.size(); ++i) {
    CHECK(back.centroids().values[i] == static_cast<double>(static_cast<float>(m.centroids().values[i])));
  }
  auto rseb = read_store(dir / "c.rseb");
  CHECK(rseb.id(0) == "c0");
  CHECK(read_jsonl(dir / "a.jsonl")[0].contains("cluster"));
}

}  // TEST_SUITE
