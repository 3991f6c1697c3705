// Copyright 2026 The evomt Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: every subcommand loads or creates a checkpoint
// directory, does one thing and writes the result back.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "evomt/checkpoint.hpp"
#include "evomt/error.hpp"
#include "evomt/reports.hpp"
#include "evomt/synthetic.hpp"

namespace fs = std::filesystem;
using namespace evomt;

namespace {

struct InitArgs {
  std::string space;
  std::string tasks;
  std::uint64_t seed = 0;
  std::string out;
  BackboneGeometry geometry;
  double s = 0.99;
  double calibrate = 1.0;
  std::string mode = "munet_plus";
  std::string pretrain;
  int pretrain_cycles = 10;
};

void cmd_init(const InitArgs& a) {
  if (fs::exists(fs::path(a.out) / "manifest.json"))
    throw Error(Errc::kState, "checkpoint already exists at " + a.out);
  RunState run;
  BackboneGeometry geometry = a.geometry;
  std::optional<TaskDataset> bank;
  if (!a.pretrain.empty()) {
    bank = load_task(a.pretrain);
    geometry.root_classes = bank->info.num_classes;
  }
  run.system = SystemState(SearchSpace::load(a.space), geometry, a.seed);
  if (!a.tasks.empty())
    for (const auto& info : scan_tasks(a.tasks)) run.system.register_task(info);
  run.config.mode = mode_from_string(a.mode);
  seed_root_model(run.system);
  if (bank) {
    TrainBudget budget;
    budget.samples_cap = static_cast<std::int64_t>(bank->train.size());
    const auto reports = pretrain_root(run.system, *bank, a.pretrain_cycles, budget);
    std::cout << "pretrained root on " << bank->info.name << ", final loss " << reports.back().mean_loss << "\n";
  }
  ScoreParams sp = run.system.score_params();
  sp.s = a.s;
  sp.compute_factor_enabled = run.config.mode == Mode::kMuNetPlus;
  run.system.set_score_params(sp);
  run.system.set_score_params(calibrate(run.system, a.calibrate));
  save_checkpoint(run, a.out);
  std::cout << "initialized " << a.out << " with " << run.system.tasks().size() << " tasks\n";
}

void cmd_run(const std::string& ckpt, const std::string& segments_file) {
  RunState run = load_checkpoint(ckpt);
  const auto segments = load_segments(segments_file);
  DatasetCache data;
  run_segments(run, data, segments, file_digest(segments_file),
               [&](const RunState& r) { save_checkpoint(r, ckpt); });
  save_checkpoint(run, ckpt);
  if (!run.history.empty()) {
    const auto& last = run.history.back();
    std::cout << "models=" << run.system.models().size() << " mean_val_accuracy=" << last.mean_val_accuracy
              << " mean_accounted_params=" << last.mean_accounted_params << " mean_flops=" << last.mean_flops
              << "\n";
  }
}

void cmd_add_tasks(const std::string& ckpt, const std::string& dir) {
  RunState run = load_checkpoint(ckpt);
  const auto infos = scan_tasks(dir);
  if (infos.empty()) throw Error(Errc::kNotFound, "no task directories under " + dir);
  for (const auto& info : infos) {
    if (run.system.has_task(info.name)) throw Error(Errc::kState, "task " + info.name + " already registered");
    run.system.register_task(info);
  }
  save_checkpoint(run, ckpt);
  std::cout << "registered " << infos.size() << " tasks\n";
}

void cmd_set_scoring(const std::string& ckpt, double s, double recalibrate) {
  RunState run = load_checkpoint(ckpt);
  ScoreParams sp = run.system.score_params();
  sp.s = s;
  run.system.set_score_params(sp);
  if (recalibrate > 0.0) run.system.set_score_params(calibrate(run.system, recalibrate));
  save_checkpoint(run, ckpt);
  const auto& now = run.system.score_params();
  std::cout << "s=" << now.s << " P=" << now.P << " F=" << now.F << "\n";
}

void cmd_report(const std::string& ckpt, const std::string& out) {
  const RunState run = load_checkpoint(ckpt);
  for (const auto& p : emit_reports(run, out)) std::cout << p.string() << "\n";
}

void cmd_export_dot(const std::string& ckpt, const std::string& out) {
  const RunState run = load_checkpoint(ckpt);
  std::ofstream os(out, std::ios::trunc);
  os << export_dot(run.system);
  if (!os) throw Error(Errc::kIo, "cannot write " + out);
}

void cmd_gen_tasks(const std::string& spec, std::uint64_t seed, const std::string& out) {
  for (const auto& d : write_synthetic_tasks(load_synthetic_spec(spec), seed, out)) std::cout << d.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evolutionary growth of a multitask model system"};
  app.require_subcommand(1);

  InitArgs init;
  auto* init_cmd = app.add_subcommand("init", "Create a checkpoint holding the root model");
  init_cmd->add_option("--space", init.space, "Search-space axis table")->required()->check(CLI::ExistingFile);
  init_cmd->add_option("--tasks", init.tasks, "Directory of task datasets")->required()->check(CLI::ExistingDirectory);
  init_cmd->add_option("--seed", init.seed, "Root seed")->required();
  init_cmd->add_option("out", init.out, "Checkpoint directory")->required();
  init_cmd->add_option("--width", init.geometry.width, "Hidden width")->check(CLI::PositiveNumber);
  init_cmd->add_option("--root-depth", init.geometry.root_depth, "Hidden blocks in the root")->check(CLI::PositiveNumber);
  init_cmd->add_option("--root-classes", init.geometry.root_classes, "Root head size")->check(CLI::PositiveNumber);
  init_cmd->add_option("--patch", init.geometry.patch, "Patch size")->check(CLI::PositiveNumber);
  init_cmd->add_option("--channels", init.geometry.channels, "Image channels")->check(CLI::PositiveNumber);
  init_cmd->add_option("--s", init.s, "Score scale factor");
  init_cmd->add_option("--calibrate", init.calibrate, "Multiplier on the root cost for P and F")
      ->check(CLI::PositiveNumber);
  init_cmd->add_option("--pretrain", init.pretrain, "Task dataset to pretrain the root model on")
      ->check(CLI::ExistingDirectory);
  init_cmd->add_option("--pretrain-cycles", init.pretrain_cycles, "Pretraining passes over that dataset")
      ->check(CLI::PositiveNumber);
  init_cmd->add_option("--mode", init.mode, "munet or munet_plus")->check(CLI::IsMember({"munet", "munet_plus"}));

  std::string ckpt, segments, dir, out, spec;
  std::uint64_t seed = 0;
  double s = 0.99, recalibrate = 0.0;

  auto* run_cmd = app.add_subcommand("run", "Execute a segment file, checkpointing after every task iteration");
  run_cmd->add_option("--checkpoint", ckpt)->required();
  run_cmd->add_option("--segments", segments)->required()->check(CLI::ExistingFile);

  auto* add_cmd = app.add_subcommand("add-tasks", "Register more task datasets");
  add_cmd->add_option("--checkpoint", ckpt)->required();
  add_cmd->add_option("--tasks", dir)->required()->check(CLI::ExistingDirectory);

  auto* scoring_cmd = app.add_subcommand("set-scoring", "Change the score scale factor");
  scoring_cmd->add_option("--checkpoint", ckpt)->required();
  scoring_cmd->add_option("--s", s)->required();
  scoring_cmd->add_option("--recalibrate", recalibrate, "Reset P and F to this multiple of the mean costs")
      ->check(CLI::PositiveNumber);

  auto* report_cmd = app.add_subcommand("report", "Write CSV reports and a DOT graph");
  report_cmd->add_option("--checkpoint", ckpt)->required();
  report_cmd->add_option("--out", out)->required();

  auto* dot_cmd = app.add_subcommand("export-dot", "Write the system graph in DOT format");
  dot_cmd->add_option("--checkpoint", ckpt)->required();
  dot_cmd->add_option("--out", out)->required();

  auto* gen_cmd = app.add_subcommand("gen-tasks", "Generate synthetic task datasets");
  gen_cmd->add_option("--spec", spec)->required()->check(CLI::ExistingFile);
  gen_cmd->add_option("--seed", seed)->required();
  gen_cmd->add_option("--out", out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "evomt: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*init_cmd) cmd_init(init);
    else if (*run_cmd) cmd_run(ckpt, segments);
    else if (*add_cmd) cmd_add_tasks(ckpt, dir);
    else if (*scoring_cmd) cmd_set_scoring(ckpt, s, recalibrate);
    else if (*report_cmd) cmd_report(ckpt, out);
    else if (*dot_cmd) cmd_export_dot(ckpt, out);
    else if (*gen_cmd) cmd_gen_tasks(spec, seed, out);
  } catch (const std::exception& e) {
    std::cerr << "evomt: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
