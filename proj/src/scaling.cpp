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

#include "rsforge/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace rsforge {

Json to_json(const ScalingLawFit& fit) {
  return {{"a", fit.a}, {"b", fit.b}, {"c", fit.c}, {"rss", fit.rss}, {"n_points", fit.n_points}};
}

double predict(double a, double b, double c, double x) {
  if (!(x > b + 1.0)) {
    std::ostringstream msg;
    msg << "predict: x = " << x << " must exceed b + 1 = " << b + 1.0;
    throw DomainError(msg.str());
  }
  return a / std::log(x - b) + c;
}

double predict(const ScalingLawFit& fit, double x) { return predict(fit.a, fit.b, fit.c, x); }

namespace {

struct Profile {
  double a = 0.0;
  double c = 0.0;
  double rss = std::numeric_limits<double>::infinity();
};

// Closed-form (a, c) for fixed b.
Profile solve_linear(std::span<const ScalingPoint> pts, double b) {
  const double n = static_cast<double>(pts.size());
  double su = 0.0, sy = 0.0;
  for (const auto& p : pts) {
    su += 1.0 / std::log(p.x - b);
    sy += p.y;
  }
  const double mu = su / n;
  const double my = sy / n;
  double suu = 0.0, suy = 0.0;
  for (const auto& p : pts) {
    double du = 1.0 / std::log(p.x - b) - mu;
    suu += du * du;
    suy += du * (p.y - my);
  }
  Profile out;
  out.a = suu > 0.0 ? suy / suu : 0.0;
  out.c = my - out.a * mu;
  double rss = 0.0;
  for (const auto& p : pts) {
    double r = p.y - (out.a / std::log(p.x - b) + out.c);
    rss += r * r;
  }
  out.rss = std::isfinite(rss) ? rss : std::numeric_limits<double>::infinity();
  return out;
}

struct Restart {
  double s = 0.0;
  Profile profile;
};

// One-dimensional Nelder-Mead over s.
Restart simplex_1d(std::span<const ScalingPoint> pts, double anchor, double s0, double step,
                   std::size_t max_iters) {
  auto f = [&](double s) { return solve_linear(pts, anchor - std::exp(s)).rss; };
  double v[2] = {s0, s0 + step};
  double fv[2] = {f(v[0]), f(v[1])};
  for (std::size_t it = 0; it < max_iters; ++it) {
    if (fv[1] < fv[0]) {
      std::swap(v[0], v[1]);
      std::swap(fv[0], fv[1]);
    }
    if (std::abs(v[1] - v[0]) < 1e-12 || std::abs(fv[1] - fv[0]) <= 1e-300) break;
    const double xr = 2.0 * v[0] - v[1];
    const double fr = f(xr);
    if (fr < fv[0]) {
      const double xe = 3.0 * v[0] - 2.0 * v[1];
      const double fe = f(xe);
      if (fe < fr) {
        v[1] = xe;
        fv[1] = fe;
      } else {
        v[1] = xr;
        fv[1] = fr;
      }
    } else if (fr < fv[1]) {
      v[1] = xr;
      fv[1] = fr;
    } else {
      const double xc = 0.5 * (v[0] + v[1]);
      const double fc = f(xc);
      if (fc < fv[1]) {
        v[1] = xc;
        fv[1] = fc;
      } else {
        v[1] = v[0] + 0.5 * (v[1] - v[0]);
        fv[1] = f(v[1]);
      }
    }
  }
  const std::size_t best = fv[1] < fv[0] ? 1 : 0;
  return {v[best], solve_linear(pts, anchor - std::exp(v[best]))};
}

}  // namespace

ScalingLawFit fit_scaling_law(std::span<const ScalingPoint> points, const ScalingFitOptions& options) {
  if (points.size() < 4) {
    throw DomainError("fit_scaling_law: need at least 4 points, got " + std::to_string(points.size()));
  }
  std::vector<double> xs;
  for (const auto& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw DomainError("fit_scaling_law: non-finite point");
    if (p.x <= 0.0) throw DomainError("fit_scaling_law: x must be > 0");
    xs.push_back(p.x);
  }
  std::sort(xs.begin(), xs.end());
  if (std::adjacent_find(xs.begin(), xs.end()) != xs.end()) {
    throw DomainError("fit_scaling_law: x values must be distinct");
  }
  const double anchor = xs.front() - 1.0;
  const double span = std::max(1.0, xs.back() - xs.front());

  // Starts: a log-spaced grid of offsets below the anchor, then seeded jitter.
  const std::size_t restarts = std::max<std::size_t>(options.restarts, 1);
  const double lo = std::log(1e-3);
  const double hi = std::log(1e3 * span);
  std::vector<double> starts(restarts);
  std::mt19937_64 rng(options.seed);
  const std::size_t grid = std::min<std::size_t>(restarts, 16);
  for (std::size_t r = 0; r < restarts; ++r) {
    if (r < grid) {
      starts[r] = grid == 1 ? 0.0 : lo + (hi - lo) * static_cast<double>(r) / static_cast<double>(grid - 1);
    } else {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      starts[r] = lo + (hi - lo) * u;
    }
  }

  std::vector<Restart> results(restarts);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(restarts); ++r) {
    const auto i = static_cast<std::size_t>(r);
    results[i] = simplex_1d(points, anchor, starts[i], 0.25, options.max_iters);
  }

  std::size_t best = 0;
  for (std::size_t r = 1; r < restarts; ++r) {
    if (results[r].profile.rss < results[best].profile.rss) best = r;
  }
  const Restart& w = results[best];
  if (!std::isfinite(w.profile.rss)) throw DomainError("fit_scaling_law: no finite fit found");
  ScalingLawFit fit;
  fit.a = w.profile.a;
  fit.b = anchor - std::exp(w.s);
  fit.c = w.profile.c;
  fit.rss = std::max(0.0, w.profile.rss);
  fit.n_points = points.size();
  return fit;
}

std::vector<ScalingPoint> read_scaling_points(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(s);
    while (std::getline(ss, cell, ',')) cells.emplace_back(trim(cell));
    return cells;
  };
  std::size_t lineno = 0;
  int xi = -1, yi = -1;
  std::vector<ScalingPoint> out;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cells = split(line);
    if (xi < 0) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (cells[i] == "x") xi = static_cast<int>(i);
        if (cells[i] == "y") yi = static_cast<int>(i);
      }
      if (xi < 0 || yi < 0) throw FormatError(path.string() + ": header must name columns x and y");
      continue;
    }
    const auto need = static_cast<std::size_t>(std::max(xi, yi));
    if (cells.size() <= need) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": missing column");
    }
    try {
      std::size_t used = 0;
      ScalingPoint p;
      p.x = std::stod(cells[static_cast<std::size_t>(xi)], &used);
      if (used != cells[static_cast<std::size_t>(xi)].size()) throw std::invalid_argument("x");
      p.y = std::stod(cells[static_cast<std::size_t>(yi)], &used);
      if (used != cells[static_cast<std::size_t>(yi)].size()) throw std::invalid_argument("y");
      out.push_back(p);
    } catch (const std::logic_error&) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": not a number");
    }
  }
  if (xi < 0) throw FormatError(path.string() + ": empty file");
  return out;
}

}  // namespace rsforge
