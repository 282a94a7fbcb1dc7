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
#include <limits>
#include <random>
#include <vector>

#include "doctest.h"
#include "rsforge/scaling.hpp"
#include "support.hpp"

using namespace rsforge;

namespace {

std::vector<ScalingPoint> law_points(double a, double b, double c, std::vector<double> xs) {
  std::vector<ScalingPoint> pts;
  for (double x : xs) pts.push_back({x, a / std::log(x - b) + c});
  return pts;
}

}  // namespace

TEST_SUITE("scaling") {

TEST_CASE("noiseless recovery") {
  auto pts = law_points(-0.21, 4.23, 0.80, {12, 20, 30, 45, 60});
  auto f = fit_scaling_law(pts);
  CHECK(std::abs(f.a + 0.21) <= 1e-2);
  CHECK(std::abs(f.b - 4.23) <= 1e-2);
  CHECK(std::abs(f.c - 0.80) <= 1e-2);
  CHECK(f.rss <= 1e-8);
  CHECK(f.rss >= 0.0);
  CHECK(f.n_points == 5);
  CHECK(f.b < 12.0);
}

TEST_CASE("second law recovery") {
  auto pts = law_points(-0.60, 3.17, 0.56, {8, 15, 30, 50, 100, 150});
  auto f = fit_scaling_law(pts);
  CHECK(std::abs(f.a + 0.60) <= 1e-2);
  CHECK(std::abs(f.b - 3.17) <= 1e-2);
  CHECK(std::abs(f.c - 0.56) <= 1e-2);
}

TEST_CASE("constant data") {
  std::vector<ScalingPoint> pts{{5, 0.4}, {10, 0.4}, {20, 0.4}, {40, 0.4}};
  auto f = fit_scaling_law(pts);
  CHECK(std::abs(f.a) <= 1e-6);
  CHECK(f.rss <= 1e-12);
  CHECK(predict(f, 100) == doctest::Approx(0.4).epsilon(1e-6));
}

TEST_CASE("restart stability") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 0.003);
  auto pts = law_points(-0.3, 2.0, 0.7, {10, 15, 25, 40, 70, 100});
  for (auto& p : pts) p.y += noise(rng);
  ScalingFitOptions o;
  o.restarts = 50;
  o.seed = 11;
  auto ref = fit_scaling_law(pts, o);
  for (int w : {1, 3, 8}) {
    ScopedWorkers sw(w);
    auto again = fit_scaling_law(pts, o);
    CHECK(std::abs(again.rss - ref.rss) <= 1e-10);
    CHECK(again.a == ref.a);
    CHECK(again.b == ref.b);
  }
}

TEST_CASE("idempotence on its own predictions") {
  auto noisy = law_points(-0.4, 1.5, 0.9, {6, 10, 18, 33, 64});
  noisy[2].y += 0.01;
  auto f = fit_scaling_law(noisy);
  std::vector<ScalingPoint> own;
  for (const auto& p : noisy) own.push_back({p.x, predict(f, p.x)});
  auto g = fit_scaling_law(own);
  CHECK(std::abs(g.a - f.a) <= 1e-6);
  CHECK(std::abs(g.b - f.b) <= 1e-6);
  CHECK(std::abs(g.c - f.c) <= 1e-6);
}

TEST_CASE("predict") {
  CHECK(std::abs(predict(-0.21, 4.23, 0.80, 100) - 0.754) <= 0.002);
  CHECK(std::abs(predict(-0.60, 3.17, 0.56, 100) - 0.429) <= 0.002);
  CHECK(predict(0.0, 2.0, 0.33, 3.5) == 0.33);
  CHECK(predict(0.0, 2.0, 0.33, 1e6) == 0.33);
  CHECK_THROWS_AS(predict(-0.21, 4.23, 0.80, 5.23), DomainError);
  CHECK_THROWS_AS(predict(-0.21, 4.23, 0.80, 1.0), DomainError);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(5.3, 1e4);
  for (int i = 0; i < 1000; ++i) {
    double x = u(rng), y = u(rng);
    if (x > y) std::swap(x, y);
    if (x == y) continue;
    CHECK(predict(-0.21, 4.23, 0.80, x) < predict(-0.21, 4.23, 0.80, y));
  }
}

TEST_CASE("fit errors") {
  std::vector<ScalingPoint> three{{1, 0.1}, {2, 0.2}, {3, 0.3}};
  CHECK_THROWS_AS(fit_scaling_law(three), DomainError);
  std::vector<ScalingPoint> repeated{{1, 0.1}, {2, 0.2}, {2, 0.3}, {4, 0.4}};
  CHECK_THROWS_AS(fit_scaling_law(repeated), DomainError);
  std::vector<ScalingPoint> negative{{-1, 0.1}, {2, 0.2}, {3, 0.3}, {4, 0.4}};
  CHECK_THROWS_AS(fit_scaling_law(negative), DomainError);
  std::vector<ScalingPoint> nan{{1, 0.1}, {2, std::numeric_limits<double>::quiet_NaN()}, {3, 0.3}, {4, 0.4}};
  CHECK_THROWS_AS(fit_scaling_law(nan), DomainError);
}

TEST_CASE("points csv") {
  auto dir = testing::temp_dir("scaling-csv");
  write_file(dir / "p.csv", "y,x\n0.5,10\n0.6, 20\n\n0.65,40\n");
  auto pts = read_scaling_points(dir / "p.csv");
  REQUIRE(pts.size() == 3);
  CHECK(pts[1].x == 20);
  CHECK(pts[1].y == 0.6);
  write_file(dir / "bad.csv", "a,b\n1,2\n");
  CHECK_THROWS_AS(read_scaling_points(dir / "bad.csv"), FormatError);
  write_file(dir / "bad2.csv", "x,y\n1,zz\n");
  CHECK_THROWS_AS(read_scaling_points(dir / "bad2.csv"), FormatError);
  auto j = to_json(fit_scaling_law(law_points(-0.21, 4.23, 0.80, {12, 20, 30, 45, 60})));
  for (const char* key : {"a", "b", "c", "rss"}) CHECK(j.contains(key));
}

}  // TEST_SUITE
