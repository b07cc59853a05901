/**
 * Copyright 2026 The boxald Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "boxald/cli.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "httplib.h"

#include "boxald/errors.hpp"
#include "boxald/io.hpp"
#include "boxald/rundir.hpp"
#include "boxald/service.hpp"

namespace fs = std::filesystem;

namespace boxald {

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

struct Overrides {
  std::string config;
  std::string strategy, protocol, budget_unit, supervision;
  std::string dataset, test;
  std::vector<std::uint64_t> seeds;
  std::optional<std::size_t> cycles, init_budget, per_cycle_budget, images;
  std::optional<bool> pseudo;

  void add_to(CLI::App* app) {
    app->add_option("-c,--config", config, "RunConfig JSON file")->check(CLI::ExistingFile);
    app->add_option("--strategy", strategy, "compas | random | mean-entropy | boxcnt | coreset");
    app->add_option("--protocol", protocol, "auto | box | image");
    app->add_option("--budget-unit", budget_unit, "boxes | images");
    app->add_option("--supervision", supervision, "labeled | mixed");
    app->add_option("--dataset", dataset, "COCO annotation file (default: synthetic)");
    app->add_option("--test", test, "COCO annotation file used for evaluation");
    app->add_option("--seeds", seeds, "experiment seeds");
    app->add_option("--cycles", cycles, "number of acquisition cycles");
    app->add_option("--init-budget", init_budget, "boxes in the initial labeled pool");
    app->add_option("--per-cycle-budget", per_cycle_budget, "budget per cycle, in the budget unit");
    app->add_option("--images", images, "synthetic training images");
    app->add_option("--pseudo-labels", pseudo, "enable pseudo-labels (default: compas only)");
  }

  RunConfig build() const {
    RunConfig c = config.empty() ? RunConfig{} : load_config(config);
    if (!strategy.empty()) c.strategy = parse_strategy(strategy);
    if (!protocol.empty()) c.protocol = parse_protocol(protocol);
    if (!budget_unit.empty()) c.budget_unit = parse_budget_unit(budget_unit);
    if (!supervision.empty()) c.supervision = parse_supervision(supervision);
    if (!dataset.empty()) c.dataset_path = fs::absolute(dataset).string();
    if (!test.empty()) c.test_path = fs::absolute(test).string();
    if (!seeds.empty()) c.seeds = seeds;
    if (cycles) c.n_cycles = *cycles;
    if (init_budget) c.init_budget = *init_budget;
    if (per_cycle_budget) c.per_cycle_budget = *per_cycle_budget;
    if (images) c.synth.n_images = *images;
    if (pseudo) c.pseudo_labels = *pseudo;
    validate(c);
    return c;
  }
};

fs::path default_root(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("BOXALD_RUN_ROOT"); env != nullptr && *env != '\0') return env;
  return "runs";
}

void print_summary(std::ostream& out, const RunDirectory& run) {
  const ResultsTable t = read_results(run.results_path().string());
  out << "run " << run.path().string() << " (config " << run.digest() << ")\n";
  out << "cycle\tboxes\tmap50\tmap5095\n";
  for (const auto& r : t.rows) {
    if (r.kind != "aggregate") continue;
    out << r.cycle << '\t' << std::fixed << std::setprecision(1) << r.value("cumulative_boxes") << '\t'
        << std::setprecision(4) << r.value("map50") << '\t' << r.value("map5095") << '\n';
  }
  out.unsetf(std::ios::floatfield);
}

int cmd_run(const Overrides& ov, const std::string& out_dir, const std::string& root, std::ostream& out) {
  const RunConfig config = ov.build();
  const std::string digest = config_digest(config);
  const fs::path dir = !out_dir.empty() ? fs::path(out_dir)
                                        : default_root(root) / (std::string(to_string(config.strategy)) + "-" +
                                                                digest.substr(0, 8));
  RunDirectory run = RunDirectory::create(dir, config);
  try {
    DirectoryLock lock(run.path());
    advance_run(run);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(dir, ec);
    throw;
  }
  print_summary(out, run);
  return 0;
}

int cmd_resume(const std::string& dir, std::optional<std::size_t> until, std::ostream& out) {
  RunDirectory run = RunDirectory::open(dir);
  DirectoryLock lock(run.path());
  advance_run(run, until);
  print_summary(out, run);
  return 0;
}

std::string cell(double v, int precision) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

int cmd_compare(const std::vector<std::string>& dirs, std::ostream& out) {
  struct Run {
    std::string label;
    std::string digest;
    std::map<std::string, const ResultRow*> by_boxes;
    ResultsTable table;
  };
  std::vector<Run> runs(dirs.size());
  std::map<std::string, int> seen;
  for (std::size_t k = 0; k < dirs.size(); ++k) {
    runs[k].table = read_results((fs::path(dirs[k]) / "results.tsv").string());
    runs[k].digest = runs[k].table.config_digest;
  }
  // Keys are each run's own mean cumulative box count; numeric sort below.
  std::map<double, std::string> keys;
  for (auto& r : runs) {
    for (const auto& row : r.table.rows) {
      if (row.kind != "aggregate") continue;
      if (r.label.empty()) r.label = row.strategy;
      const double boxes = std::round(row.value("cumulative_boxes") * 10.0) / 10.0;
      const std::string key = cell(boxes, 1);
      keys.emplace(boxes, key);
      r.by_boxes[key] = &row;
    }
    if (r.label.empty()) r.label = "run";
    const int n = seen[r.label]++;
    if (n > 0) r.label += "#" + std::to_string(n + 1);
  }
  for (const auto& r : runs) out << "# " << r.label << " config_digest=" << r.digest << "\n";
  out << "cumulative_boxes";
  for (const auto& r : runs) out << '\t' << r.label << ":cycle\t" << r.label << ":map50\t" << r.label << ":map5095";
  out << '\n';
  for (const auto& [boxes, key] : keys) {
    out << key;
    for (const auto& r : runs) {
      const auto it = r.by_boxes.find(key);
      if (it == r.by_boxes.end()) {
        out << "\t-\t-\t-";
      } else {
        out << '\t' << it->second->cycle << '\t' << cell(it->second->value("map50"), 6) << '\t'
            << cell(it->second->value("map5095"), 6);
      }
    }
    out << '\n';
  }
  return 0;
}

int cmd_synth(const SynthOptions& opts, std::uint64_t seed, const std::string& path, std::ostream& out) {
  RunConfig c;
  c.synth = opts;
  c.seeds = {seed};
  validate(c);
  const SyntheticDataset ds = synthesize(opts, seed);
  export_coco(ds.index, path, config_digest(c));
  out << "wrote " << ds.index.size() << " images, " << ds.index.total_boxes() << " boxes (" << ds.hard_boxes()
      << " hard) to " << path << "\n";
  return 0;
}

int cmd_eval(const std::string& gt_path, const std::string& pred_path, std::ostream& out) {
  const IngestResult gt = ingest_coco(gt_path);
  const auto preds = ingest_coco_results(pred_path, gt.index);
  const auto gts = ground_truth_detections(gt.index);
  const EvalResult r = map_scores(preds, gts, gt.index.num_classes());
  out << "class\tname\tn_gt\tap50\tap5095\n";
  for (const auto& c : r.classes) {
    double mean = 0.0;
    for (double a : c.ap101) mean += a;
    mean /= static_cast<double>(c.ap101.size());
    out << c.class_id << '\t' << gt.index.categories()[static_cast<std::size_t>(c.class_id)].name << '\t'
        << c.n_ground_truth << '\t' << cell(c.ap50, 6) << '\t' << cell(mean, 6) << '\n';
  }
  out << "map50\t" << cell(r.map50, 6) << "\nmap5095\t" << cell(r.map5095, 6) << '\n';
  return 0;
}

std::vector<ScoreSample> read_scores(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open " + path.string());
  std::vector<ScoreSample> out;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    std::istringstream ss(line);
    ScoreSample s;
    std::string cyc, score;
    std::getline(ss, cyc, '\t');
    std::getline(ss, s.split, '\t');
    std::getline(ss, score, '\t');
    s.cycle = std::stoi(cyc);
    s.score = std::stod(score);
    out.push_back(std::move(s));
  }
  return out;
}

int cmd_export_scores(const std::string& dir, std::optional<std::uint64_t> seed, bool summary,
                      const std::string& out_path, std::ostream& out) {
  const RunDirectory run = RunDirectory::open(dir);
  const std::uint64_t s = seed ? *seed : run.config().seeds.at(0);
  std::vector<ScoreSample> samples;
  for (std::size_t c = 1; c <= run.config().n_cycles; ++c) {
    const fs::path p = run.scores_path(s, static_cast<int>(c));
    if (!fs::exists(p)) break;
    const auto part = read_scores(p);
    samples.insert(samples.end(), part.begin(), part.end());
  }
  std::ostringstream body;
  body << "# config_digest=" << run.digest() << "\n";
  if (summary) {
    export_score_summary(body, summarize_scores(samples));
  } else {
    export_score_distribution(body, samples);
  }
  if (out_path.empty()) {
    out << body.str();
  } else {
    std::ofstream f(out_path);
    if (!f) throw Error("cannot write " + out_path);
    f << body.str();
  }
  return 0;
}

int cmd_serve(const std::string& dir, const Overrides& ov, const std::string& host, int port,
              const ServiceOptions& opts, std::ostream& out) {
  const bool fresh = !fs::exists(fs::path(dir) / "config.json");
  RunDirectory run = fresh ? RunDirectory::create(dir, ov.build()) : RunDirectory::open(dir);
  AnnotationSession session(run, opts);
  httplib::Server server;
  mount_routes(server, session);
  // The library default adds SO_REUSEPORT, which would let a second server
  // share a busy port silently.
  server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  if (!server.bind_to_port(host, port)) {
    throw Error("cannot bind " + host + ":" + std::to_string(port) + " (address in use or not permitted)");
  }
  g_interrupted = false;
  auto prev_int = std::signal(SIGINT, on_signal);
  auto prev_term = std::signal(SIGTERM, on_signal);
  std::thread watcher([&server] {
    while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
  });
  out << "serving " << run.path().string() << " on http://" << host << ":" << port << " (session "
      << session.id() << ")" << std::endl;
  server.listen_after_bind();
  g_interrupted = true;
  watcher.join();
  std::signal(SIGINT, prev_int);
  std::signal(SIGTERM, prev_term);
  session.save();
  out << "saved snapshot of cycle " << session.state().pool.cycle << "\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"boxald: box-level active learning for object detection"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  Overrides run_ov;
  std::string out_dir, root;
  auto* run = app.add_subcommand("run", "Run an experiment into a new run directory");
  run_ov.add_to(run);
  run->add_option("-o,--out", out_dir, "run directory (default: <root>/<strategy>-<digest>)");
  run->add_option("--root", root, "run root (default: $BOXALD_RUN_ROOT or ./runs)");

  std::string resume_dir;
  std::optional<std::size_t> until;
  auto* resume = app.add_subcommand("resume", "Continue a run from its latest snapshots");
  resume->add_option("dir", resume_dir, "run directory")->required()->check(CLI::ExistingDirectory);
  resume->add_option("--until", until, "stop after this many cycles");

  std::vector<std::string> compare_dirs;
  auto* compare = app.add_subcommand("compare", "Side-by-side metrics keyed by cumulative boxes");
  compare->add_option("dirs", compare_dirs, "run directories")->required()->check(CLI::ExistingDirectory);

  SynthOptions synth_opts;
  std::uint64_t synth_seed = 1;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset as COCO annotations");
  synth->add_option("-o,--out", synth_out, "output file")->required();
  synth->add_option("--images", synth_opts.n_images, "number of images");
  synth->add_option("--classes", synth_opts.num_classes, "number of classes");
  synth->add_option("--mean-boxes", synth_opts.mean_boxes, "mean boxes per image");
  synth->add_option("--hard-fraction", synth_opts.hard_fraction, "fraction of hard boxes");
  synth->add_option("--width", synth_opts.width, "image width");
  synth->add_option("--height", synth_opts.height, "image height");
  synth->add_option("--seed", synth_seed, "rng seed");

  std::string gt_path, pred_path;
  auto* eval = app.add_subcommand("eval", "Score COCO detection results against annotations");
  eval->add_option("--gt", gt_path, "COCO annotation file")->required()->check(CLI::ExistingFile);
  eval->add_option("--pred", pred_path, "COCO results file")->required()->check(CLI::ExistingFile);

  std::string scores_dir, scores_out;
  std::optional<std::uint64_t> scores_seed;
  bool scores_summary = false;
  auto* scores = app.add_subcommand("export-scores", "Acquisition score distributions of a run");
  scores->add_option("dir", scores_dir, "run directory")->required()->check(CLI::ExistingDirectory);
  scores->add_option("--seed", scores_seed, "seed (default: first)");
  scores->add_flag("--summary", scores_summary, "five-number summary per cycle and split");
  scores->add_option("-o,--out", scores_out, "output file (default: stdout)");

  Overrides serve_ov;
  std::string serve_dir, host = "127.0.0.1", token;
  int port = 8080;
  ServiceOptions serve_opts;
  std::optional<std::uint64_t> serve_seed;
  auto* serve = app.add_subcommand("serve", "Serve the annotation API for one seed of a run");
  serve->add_option("dir", serve_dir, "run directory (created from the config flags when missing)")->required();
  serve_ov.add_to(serve);
  serve->add_option("--host", host, "bind address");
  serve->add_option("--port", port, "bind port");
  serve->add_option("--seed", serve_seed, "seed to annotate (default: first)");
  serve->add_option("--lease-seconds", serve_opts.lease_seconds, "lease duration");
  serve->add_option("--token", token, "static session token required in X-Session-Token");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    if (*run) return cmd_run(run_ov, out_dir, root, out);
    if (*resume) return cmd_resume(resume_dir, until, out);
    if (*compare) return cmd_compare(compare_dirs, out);
    if (*synth) return cmd_synth(synth_opts, synth_seed, synth_out, out);
    if (*eval) return cmd_eval(gt_path, pred_path, out);
    if (*scores) return cmd_export_scores(scores_dir, scores_seed, scores_summary, scores_out, out);
    if (*serve) {
      serve_opts.seed = serve_seed;
      serve_opts.session_token = token;
      return cmd_serve(serve_dir, serve_ov, host, port, serve_opts, out);
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace boxald
