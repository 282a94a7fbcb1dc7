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

// rsforge command line: one subcommand per pipeline stage plus `run`,
// `report`, the scaling-law tools and the toy corpus generator.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "rsforge/config.hpp"
#include "rsforge/pipeline.hpp"
#include "rsforge/sampler.hpp"
#include "rsforge/scaling.hpp"
#include "rsforge/toy.hpp"

namespace {

using rsforge::PipelineConfig;

struct Common {
  std::string config;
  std::string run_dir;
  bool force = false;
};

struct Overrides {
  std::optional<double> tau;
  std::optional<std::string> mode;
  std::optional<std::size_t> k;
  std::optional<std::size_t> max_iters;
  std::optional<double> tol;
  std::optional<std::uint64_t> seed;
  std::optional<bool> spherical;
  std::optional<std::size_t> cap;
  std::optional<std::string> preset;
  std::optional<std::size_t> top_k;
  std::optional<std::size_t> probes;
  std::optional<std::string> generator;
};

PipelineConfig load_config(const Common& c) {
  PipelineConfig cfg = c.config.empty() ? PipelineConfig{} : PipelineConfig::load(c.config);
  if (!c.run_dir.empty()) cfg.run_dir = c.run_dir;
  return cfg;
}

void apply(const std::string& stage, const Overrides& o, PipelineConfig& cfg) {
  if (o.seed) cfg.seed = *o.seed;
  if (o.mode) cfg.dedup.mode = *o.mode;
  if (o.tau) (stage == "dedup-images" ? cfg.dedup.image_tau : cfg.dedup.sentence_tau) = *o.tau;
  if (o.k) (stage == "cluster-images" ? cfg.cluster.image_k : cfg.cluster.text_k) = *o.k;
  if (o.max_iters) cfg.cluster.max_iters = *o.max_iters;
  if (o.tol) cfg.cluster.tol = *o.tol;
  if (o.spherical) cfg.cluster.spherical = *o.spherical;
  if (o.top_k) cfg.retrieval.k = *o.top_k;
  if (o.probes) cfg.retrieval.probes = *o.probes;
  if (o.generator) cfg.augment.generator = *o.generator;
  if (o.preset) {
    auto cap = rsforge::sampler_preset_cap(*o.preset);
    if (!cap) throw rsforge::ConfigError("unknown preset '" + *o.preset + "' (expected 15m, 30m or 100m)");
    cfg.sampler.preset = *o.preset;
    cfg.sampler.cap = *cap;
  }
  if (o.cap) {
    cfg.sampler.cap = *o.cap;
    cfg.sampler.preset.clear();
  }
  cfg.validate();
}

void print_record(const rsforge::StageRecord& r) {
  std::cout << r.stage << ": " << (r.cached ? "cached" : r.status) << "  input=" << r.counts.input
            << " kept=" << r.counts.kept << " rejected=" << r.counts.rejected();
  for (const auto& [k, v] : r.counts.reasons) {
    if (v) std::cout << " " << k << "=" << v;
  }
  std::cout << "\n";
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "pipeline config JSON");
  sub->add_option("--run-dir", c.run_dir, "run directory (overrides run_dir in the config)");
  sub->add_flag("--force", c.force, "recompute even when the cached outputs are current");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rsforge: curate image-text pairs from interleaved documents"};
  app.require_subcommand(1);

  Common common;
  Overrides ov;

  const std::vector<std::string> stages = rsforge::stage_names();
  for (const auto& name : stages) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " stage");
    add_common(sub, common);
    if (name == "dedup-images" || name == "dedup-sentences") {
      sub->add_option("--tau", ov.tau, "similarity threshold");
      sub->add_option("--mode", ov.mode, "exact or cluster_pruned");
    }
    if (name == "cluster-texts" || name == "cluster-images") {
      sub->add_option("--k", ov.k, "number of clusters");
      sub->add_option("--max-iters", ov.max_iters, "Lloyd iteration cap");
      sub->add_option("--tol", ov.tol, "relative inertia tolerance");
      sub->add_option("--seed", ov.seed, "pipeline seed");
      sub->add_option("--spherical", ov.spherical, "spherical k-means (true/false)");
    }
    if (name == "retrieve") {
      sub->add_option("--k", ov.top_k, "hits per image");
      sub->add_option("--probes", ov.probes, "clusters searched per image");
    }
    if (name == "augment") sub->add_option("--generator", ov.generator, "echo, http://host:port/path or cmd:<command>");
    if (name == "sample") {
      auto* cap = sub->add_option("--cap", ov.cap, "per-cluster cap");
      sub->add_option("--preset", ov.preset, "15m, 30m or 100m")->excludes(cap);
      sub->add_option("--seed", ov.seed, "pipeline seed");
    }
    sub->callback([&, name] {
      PipelineConfig cfg = load_config(common);
      apply(name, ov, cfg);
      rsforge::Pipeline p(cfg);
      rsforge::RunOptions opt;
      opt.force = common.force;
      print_record(p.run_stage(name, opt));
    });
  }

  CLI::App* run = app.add_subcommand("run", "run the full pipeline");
  add_common(run, common);
  run->callback([&] {
    rsforge::Pipeline p(load_config(common));
    rsforge::RunOptions opt;
    opt.force = common.force;
    for (const auto& r : p.run_all(opt)) print_record(r);
    std::cout << "\n" << rsforge::load_report(p.run_dir()).to_text();
  });

  CLI::App* report = app.add_subcommand("report", "summarize a run directory");
  add_common(report, common);
  bool as_json = false;
  report->add_flag("--json", as_json, "print the JSON summary");
  report->callback([&] {
    rsforge::RunReport rep = rsforge::write_report(load_config(common).run_dir);
    std::cout << (as_json ? rep.to_json().dump(2) + "\n" : rep.to_text());
  });

  std::string points;
  std::size_t restarts = 50;
  std::uint64_t fit_seed = 0;
  CLI::App* fit = app.add_subcommand("fit-scaling", "fit L(x) = a / ln(x - b) + c to points.csv");
  fit->add_option("--points", points, "CSV with columns x,y")->required();
  fit->add_option("--restarts", restarts, "multi-start count");
  fit->add_option("--seed", fit_seed, "restart seed");
  fit->callback([&] {
    auto pts = rsforge::read_scaling_points(points);
    rsforge::ScalingFitOptions opt;
    opt.restarts = restarts;
    opt.seed = fit_seed;
    std::cout << rsforge::to_json(rsforge::fit_scaling_law(pts, opt)).dump(2) << "\n";
  });

  double at = 0.0;
  double a = 0.0, b = 0.0, c = 0.0;
  std::string fit_file;
  CLI::App* pred = app.add_subcommand("predict", "evaluate a fitted scaling law");
  pred->add_option("--at", at, "training-set size in millions")->required();
  auto* fit_opt = pred->add_option("--fit", fit_file, "JSON from fit-scaling");
  pred->add_option("--points", points, "fit these points first")->excludes(fit_opt);
  pred->add_option("-a", a, "coefficient a");
  pred->add_option("-b", b, "coefficient b");
  pred->add_option("-c", c, "coefficient c");
  pred->callback([&] {
    rsforge::ScalingLawFit f{a, b, c, 0.0, 0};
    if (!fit_file.empty()) {
      auto j = rsforge::Json::parse(rsforge::read_file(fit_file));
      f.a = j.at("a").get<double>();
      f.b = j.at("b").get<double>();
      f.c = j.at("c").get<double>();
    } else if (!points.empty()) {
      f = rsforge::fit_scaling_law(rsforge::read_scaling_points(points));
    }
    std::cout << rsforge::Json({{"x", at}, {"L", rsforge::predict(f, at)}}).dump() << "\n";
  });

  std::string toy_dir = "data/toy";
  rsforge::ToyOptions toy;
  CLI::App* make_toy = app.add_subcommand("make-toy", "write the deterministic toy corpus");
  make_toy->add_option("--out", toy_dir, "output directory");
  make_toy->add_option("--documents", toy.documents, "document count");
  make_toy->add_option("--seed", toy.seed, "generator seed");
  make_toy->callback([&] {
    auto s = rsforge::write_toy_corpus(toy_dir, toy);
    std::cout << "wrote " << s.documents << " documents (" << s.malformed_lines << " malformed lines), "
              << s.images << " images, " << s.sentences << " sentences to " << toy_dir << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "rsforge: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
