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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rsforge/cluster.hpp"
#include "rsforge/dedup.hpp"
#include "rsforge/filters.hpp"
#include "rsforge/pipeline.hpp"
#include "rsforge/retrieval.hpp"
#include "rsforge/sampler.hpp"
#include "rsforge/scaling.hpp"
#include "support.hpp"

using namespace rsforge;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

// Collects the first few failure messages of a criterion.
class Check {
 public:
  void expect(bool cond, const std::string& what) {
    if (cond) return;
    ++failures_;
    if (failures_ <= 3) msg_ << (failures_ > 1 ? "; " : "") << what;
  }
  Outcome done(std::string detail) const {
    if (failures_ == 0) return {true, std::move(detail)};
    return {false, std::to_string(failures_) + " failure(s): " + msg_.str()};
  }

 private:
  std::size_t failures_ = 0;
  std::ostringstream msg_;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome filter_thresholds() {
  Check c;
  auto img = [](std::uint32_t w, std::uint32_t h) { return image_rule_filter(ImageRecord{"i", w, h, "d", ""}); };
  c.expect(!img(99, 300).kept && img(99, 300).reason == RejectReason::size, "(99,300) not rejected by size");
  c.expect(img(100, 300).kept, "(100,300) not kept");
  auto words = [](std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += (i ? " w" : "w") + std::to_string(i);
    return SentenceRecord{"s", s, "d", 0};
  };
  auto any = accept_all_assessor();
  c.expect(sentence_rule_filter(words(2), {}, any).reason == RejectReason::too_few_words, "2 words not rejected");
  c.expect(sentence_rule_filter(words(81), {}, any).kept, "81 words not kept");
  c.expect(sentence_rule_filter(words(82), {}, any).reason == RejectReason::too_many_words, "82 words not rejected");
  return c.done("(99,300) size, (100,300) kept, 2/81/82 words");
}

Outcome entropy() {
  Check c;
  std::vector<std::string> ab(50, "a b");
  auto st = build_corpus_stats(ab);
  double theta = entropy_score("a b a", st);
  c.expect(std::abs(theta - 1.03972) <= 1e-5, "theta = " + fmt("%.8f", theta));

  std::mt19937_64 rng(20260101);
  std::vector<std::string> corpus;
  for (int i = 0; i < 500; ++i) {
    std::string s;
    for (int j = 0; j < 8; ++j) s += "w" + std::to_string(rng() % 120) + " ";
    corpus.push_back(s);
  }
  auto big = build_corpus_stats(corpus);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    auto random_sentence = [&] {
      std::string s;
      for (std::size_t j = 1 + rng() % 15; j > 0; --j) s += "w" + std::to_string(rng() % 130) + " ";
      return s;
    };
    std::string x = random_sentence(), y = random_sentence();
    double err = std::abs(entropy_score(x + y, big) - entropy_score(x, big) - entropy_score(y, big));
    worst = std::max(worst, err);
  }
  c.expect(worst <= 1e-9, "additivity error " + fmt("%.3g", worst));
  return c.done("theta=" + fmt("%.6f", theta) + ", max additivity error " + fmt("%.2g", worst));
}

Outcome perplexity() {
  Check c;
  UniformScorer uniform(100);
  double worst = 0.0;
  for (std::size_t n = 1; n <= 50; ++n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += "t" + std::to_string(i % 7) + " ";
    worst = std::max(worst, std::abs(perplexity_score(s, uniform) - 100.0));
  }
  c.expect(worst <= 1e-9, "uniform error " + fmt("%.3g", worst));

  // Interval membership on exact values, including the closed ends.
  PerplexityInterval iv;
  for (int h = 2; h <= 800; ++h) {
    double p = h / 2.0;
    c.expect(iv.contains(p) == (p >= 30.0 && p <= 200.0), "interval at " + fmt("%g", p));
  }
  c.expect(!iv.contains(std::nextafter(30.0, 0.0)) && !iv.contains(std::nextafter(200.0, 1e9)),
           "interval leaks past an end");
  // The filter keeps exactly the scores inside the interval.
  for (int h = 2; h <= 800; ++h) {
    double p = h / 2.0;
    std::vector<double> ll{-std::log(p), -std::log(p)};
    auto v = perplexity_filter("x", ll);
    c.expect(v.score && v.kept == (*v.score >= 30.0 && *v.score <= 200.0), "filter at " + fmt("%g", p));
    if (p != 30.0 && p != 200.0) c.expect(v.kept == (p >= 30.0 && p <= 200.0), "filter verdict at " + fmt("%g", p));
  }
  return c.done("max |PPL-100| " + fmt("%.2g", worst) + " over lengths 1..50; interval closed");
}

Outcome dedup() {
  Check c;
  std::size_t total_components = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    auto s = testing::random_store(200, 4, seed);
    auto want = testing::oracle_components(s, 0.9);
    auto got = dedup_components(build_similarity_edges(s, 0.9, DedupMode::exact), s.ids(), 1 + seed % 4);
    c.expect(got.components == want, "seed " + std::to_string(seed) + " components differ");
    total_components += got.components.size();
    std::map<std::string, std::string> rep;
    for (std::size_t i = 0; i < got.ids.size(); ++i) rep[got.ids[i]] = got.representative[i];
    for (const auto& [id, r] : rep) c.expect(rep.at(r) == r, "representative of " + id + " not idempotent");
  }
  return c.done("100 seeds, mean " + fmt("%.1f", total_components / 100.0) + " components of 200");
}

Outcome clustering() {
  Check c;
  std::vector<std::vector<double>> pts{{1, 0.05, 0}, {1, -0.05, 0}, {0, 1, 0.1}, {0.05, 1, -0.1}};
  for (auto& p : pts) p = testing::unit(p);
  auto four = testing::store_from_points(pts, true);
  std::vector<std::vector<double>> as_float;
  for (std::size_t r = 0; r < 4; ++r) as_float.emplace_back(four.row(r).begin(), four.row(r).end());
  double optimum = 0.0;
  for (bool spherical : {true, false}) {
    optimum = testing::oracle_kmeans_optimum(as_float, 2, spherical);
    KMeansOptions o;
    o.k = 2;
    o.spherical = spherical;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      o.seed = seed;
      double got = kmeans_fit(four, o).inertia();
      c.expect(std::abs(got - optimum) <= 1e-9, "inertia " + fmt("%.12g", got) + " vs " + fmt("%.12g", optimum));
    }
  }
  std::size_t steps = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto s = testing::clustered_store(500, 16, 10, 1.5, seed);
    KMeansOptions o;
    o.k = 12;
    o.seed = seed;
    o.tol = 0.0;
    auto m = kmeans_fit(s, o);
    const auto& h = m.inertia_history();
    steps += h.size();
    for (std::size_t i = 1; i < h.size(); ++i) {
      c.expect(h[i] <= h[i - 1] + 1e-9, "dataset " + std::to_string(seed) + " inertia rose at iteration " + std::to_string(i));
    }
  }
  return c.done("optimum " + fmt("%.6g", optimum) + " reached; " + std::to_string(steps) + " monotone steps over 20 datasets");
}

Outcome retrieval() {
  Check c;
  auto texts = testing::clustered_store(1000, 64, 50, 1.0, 31, "s");
  auto queries = testing::random_store(60, 64, 32, "q");
  KMeansOptions o;
  o.seed = 33;
  o.k = 1;
  auto single = kmeans_fit(texts, o);
  o.k = 50;
  auto model = kmeans_fit(texts, o);
  ClusterIndex index(model, texts);
  double mean_recall1 = 0.0;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    auto oracle = testing::oracle_top_k(queries.row(q), texts, 3);
    auto same = [&](const std::vector<RetrievalHit>& hits) {
      if (hits.size() != oracle.size()) return false;
      for (std::size_t i = 0; i < hits.size(); ++i) {
        if (hits[i].sentence_id != oracle[i].first || std::abs(hits[i].score - oracle[i].second) > 1e-12) return false;
      }
      return true;
    };
    c.expect(same(hierarchical_retrieve(queries.row(q), texts, single, 3, 1)), "k=1 differs for query " + std::to_string(q));
    c.expect(same(hierarchical_retrieve(queries.row(q), texts, model, 3, 50)), "probes=k differs for query " + std::to_string(q));

    std::vector<RetrievalHit> oracle_hits;
    for (std::size_t i = 0; i < oracle.size(); ++i) {
      oracle_hits.push_back({oracle[i].first, oracle[i].second, 0, static_cast<std::uint32_t>(i + 1)});
    }
    double prev = -1.0;
    for (std::size_t p = 1; p <= model.k(); ++p) {
      double r = recall_at_k(index.retrieve(queries.row(q), 3, p), oracle_hits);
      if (p == 1) mean_recall1 += r / static_cast<double>(queries.size());
      c.expect(r >= prev, "recall fell at probes " + std::to_string(p));
      prev = r;
    }
    c.expect(prev == 1.0, "recall at probes=k is " + fmt("%g", prev));
  }
  return c.done("60 queries on 1000x64; recall@3 " + fmt("%.3f", mean_recall1) + " at probes=1, 1.0 at probes=50");
}

Outcome band_gate_grid() {
  Check c;
  std::size_t kept = 0;
  for (int i = -1000; i <= 1000; ++i) {
    double s = i / 1000.0;
    bool want = i >= 510 && i <= 610;
    bool got = band_gate(s, Band{0.51, 0.61});
    c.expect(got == want, "score " + fmt("%.3f", s));
    kept += got;
  }
  return c.done(std::to_string(kept) + " of 2001 grid scores kept, [0.510, 0.610]");
}

Outcome balance_sampling() {
  Check c;
  std::mt19937_64 rng(4242);
  const std::size_t caps[] = {20, 35, 180};
  std::size_t records_seen = 0;
  for (int layout = 0; layout < 1000; ++layout) {
    std::vector<PairRecord> recs;
    std::map<std::int64_t, std::size_t> sizes;
    std::size_t clusters = 1 + rng() % 40;
    for (std::size_t k = 0; k < clusters; ++k) {
      std::size_t n = 1 + static_cast<std::size_t>(std::exp(std::uniform_real_distribution<double>(0.0, 6.0)(rng)));
      std::int64_t id = static_cast<std::int64_t>(rng() % 100000);
      for (std::size_t i = 0; i < n; ++i) {
        PairRecord r;
        r.image_id = "L" + std::to_string(layout) + "-" + std::to_string(id) + "-" + std::to_string(i);
        r.cluster = id;
        recs.push_back(std::move(r));
        ++sizes[id];
      }
    }
    records_seen += recs.size();
    const std::uint64_t seed = rng();
    for (std::size_t cap : caps) {
      auto out = balance_sample(recs, cap, seed);
      std::map<std::int64_t, std::size_t> got;
      for (const auto& r : out.sampled) ++got[r.cluster];
      for (const auto& [id, n] : sizes) {
        c.expect(got[id] == std::min(n, cap), "layout " + std::to_string(layout) + " cluster " + std::to_string(id));
      }
    }
    const std::size_t cap = caps[layout % 3];
    auto ids = [](const std::vector<PairRecord>& v) {
      std::set<std::string> s;
      for (const auto& r : v) s.insert(r.image_id);
      return s;
    };
    std::set<std::string> ref;
    {
      ScopedWorkers sw(1);
      ref = ids(balance_sample(recs, cap, seed).sampled);
    }
    std::shuffle(recs.begin(), recs.end(), rng);
    for (int w : {1, 4, 8}) {
      ScopedWorkers sw(w);
      c.expect(ids(balance_sample(recs, cap, seed).sampled) == ref,
               "layout " + std::to_string(layout) + " selection changed with order/workers " + std::to_string(w));
    }
  }
  return c.done("1000 layouts (" + std::to_string(records_seen) + " records), caps 20/35/180, workers 1/4/8");
}

Outcome scaling_law() {
  Check c;
  std::vector<ScalingPoint> pts;
  for (double x : {12.0, 20.0, 30.0, 45.0, 60.0}) pts.push_back({x, -0.21 / std::log(x - 4.23) + 0.80});
  auto f = fit_scaling_law(pts);
  c.expect(std::abs(f.a + 0.21) <= 1e-2 && std::abs(f.b - 4.23) <= 1e-2 && std::abs(f.c - 0.80) <= 1e-2,
           "fit (" + fmt("%.4f", f.a) + ", " + fmt("%.4f", f.b) + ", " + fmt("%.4f", f.c) + ")");
  double lp = predict(-0.21, 4.23, 0.80, 100.0);
  double rb = predict(-0.60, 3.17, 0.56, 100.0);
  c.expect(std::abs(lp - 0.754) <= 0.002, "linear probe L(100) = " + fmt("%.5f", lp));
  c.expect(std::abs(100.0 * lp - 75.8) <= 1.0, "linear probe vs 75.8: " + fmt("%.2f", 100.0 * lp));
  c.expect(std::abs(rb - 0.429) <= 0.002, "robustness L(100) = " + fmt("%.5f", rb));
  return c.done("fit (" + fmt("%.4f", f.a) + ", " + fmt("%.4f", f.b) + ", " + fmt("%.4f", f.c) + "), L(100)=" +
                fmt("%.4f", lp) + " vs 75.8, " + fmt("%.4f", rb) + " vs 42.7");
}

Outcome end_to_end() {
  Check c;
  auto dir = testing::temp_dir("acceptance-e2e");
  for (const auto& e : fs::directory_iterator(testing::source_dir() / "data" / "toy")) {
    if (e.is_regular_file()) fs::copy_file(e.path(), dir / e.path().filename());
  }
  std::vector<std::string> manifests;
  std::size_t final_pairs = 0;
  for (int run = 0; run < 2; ++run) {
    auto cfg = PipelineConfig::load(dir / "config.json");
    cfg.run_dir = dir / ("run" + std::to_string(run));
    cfg.workers = run == 0 ? 1 : 4;
    for (const auto& r : Pipeline(cfg).run_all()) {
      c.expect(r.status == "ok", r.stage + " status " + r.status);
      c.expect(r.counts.conserved(), r.stage + " does not conserve counts");
      if (r.stage == "sample") final_pairs = r.counts.kept;
    }
    manifests.push_back(read_file(cfg.run_dir / "manifest.json"));
  }
  c.expect(manifests[0] == manifests[1], "manifests differ");
  c.expect(final_pairs > 0, "no pairs survived");
  return c.done(std::to_string(stage_names().size()) + " stages conserved, " + std::to_string(final_pairs) +
                " final pairs, manifests identical");
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
    double budget_s;  // 0 = no runtime bound
  };
  const std::vector<Criterion> criteria{
      {"filter_thresholds", filter_thresholds, 1.0},
      {"entropy", entropy, 0.0},
      {"perplexity", perplexity, 0.0},
      {"dedup", dedup, 10.0},
      {"clustering", clustering, 0.0},
      {"hierarchical_retrieval", retrieval, 30.0},
      {"band_gate", band_gate_grid, 0.0},
      {"balance_sampling", balance_sampling, 0.0},
      {"scaling_law", scaling_law, 5.0},
      {"end_to_end", end_to_end, 120.0},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = cr.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (o.ok && cr.budget_s > 0.0 && secs >= cr.budget_s) {
      o = {false, "took " + fmt("%.2f", secs) + " s, budget " + fmt("%.0f", cr.budget_s) + " s"};
    }
    if (!o.ok) ++failed;
    std::printf("%s %-24s %s [%.2f s]\n", o.ok ? "PASS" : "FAIL", cr.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
