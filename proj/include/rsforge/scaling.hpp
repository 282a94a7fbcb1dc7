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

// Data scaling law L(x) = a / ln(x - b) + c, with x in millions of
// samples. Natural log throughout.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "rsforge/jsonl.hpp"

namespace rsforge {

struct ScalingPoint {
  double x = 0.0;
  double y = 0.0;
};

struct ScalingLawFit {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double rss = 0.0;
  std::size_t n_points = 0;
};

Json to_json(const ScalingLawFit& fit);

struct ScalingFitOptions {
  std::size_t restarts = 50;
  std::uint64_t seed = 0;
  std::size_t max_iters = 400;
};

/// Least squares fit. For a fixed b the model is linear in (a, c), so those
/// are solved in closed form and a simplex search runs over b alone,
/// parameterised as b = min(x) - 1 - exp(s) to keep every fitted point
/// predictable. Restarts run in parallel; the best rss wins, ties going to
/// the lowest restart index.
///
/// Throws DomainError for fewer than 4 points, repeated x, or x <= 0.
ScalingLawFit fit_scaling_law(std::span<const ScalingPoint> points, const ScalingFitOptions& options = {});

/// a / ln(x - b) + c. Throws DomainError when x <= b + 1.
double predict(const ScalingLawFit& fit, double x);
double predict(double a, double b, double c, double x);

/// CSV with a header row naming columns x and y (any order, extra columns
/// ignored).
std::vector<ScalingPoint> read_scaling_points(const std::filesystem::path& path);

}  // namespace rsforge
