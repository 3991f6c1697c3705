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

#include "evomt/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "evomt/error.hpp"
#include "evomt/scoring.hpp"

namespace evomt {

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  return std::string(s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1));
}

template <typename T>
T parse_number(const std::string& text, std::size_t line_no) {
  std::istringstream is(text);
  T v{};
  if (!(is >> v) || !is.eof())
    throw Error(Errc::kParse, "segment file line " + std::to_string(line_no) + ": bad number '" + text + "'");
  return v;
}

// Trainable block contents of a child at its best cycle so far.
struct Snapshot {
  std::vector<std::pair<BlockId, LayerBlock>> blocks;
  double quality = 0.0;
  double score = 0.0;
  std::uint64_t train_steps = 0;
};

Snapshot take_snapshot(const SystemState& system, const ModelSpec& model, double score) {
  Snapshot s;
  for (const auto& ref : model.layers)
    if (ref.trainable) s.blocks.emplace_back(ref.block, system.block(ref.block));
  s.quality = model.quality;
  s.score = score;
  s.train_steps = model.train_steps;
  return s;
}

std::vector<MutationAction> baseline_mutations(const ModelSpec& parent, int top_k) {
  std::vector<MutationAction> out{MutationAction::make_trainable_head()};
  const int body = static_cast<int>(parent.layers.size()) - 1;
  for (int d = std::max(0, body - top_k); d < body; ++d) out.push_back(MutationAction::clone_layer(d));
  return out;
}

}  // namespace

void EvolutionConfig::validate() const {
  if (generations <= 0 || children_per_generation <= 0 || train_cycles <= 0)
    throw Error(Errc::kInvalidValue, "generations, children and cycles must be positive");
  budget.validate();
  if (finetune_top_k && *finetune_top_k < 0) throw Error(Errc::kInvalidValue, "finetune_top_k must be >= 0");
}

std::vector<SegmentSpec> parse_segments(std::string_view text) {
  std::vector<SegmentSpec> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto sp = line.find_first_of(" \t");
    std::string key = line.substr(0, sp);
    std::string value = sp == std::string::npos ? std::string() : trim(line.substr(sp));
    if (key == "segment") {
      out.emplace_back();
      out.back().label = value;
      continue;
    }
    if (out.empty())
      throw Error(Errc::kParse, "segment file line " + std::to_string(line_no) + ": record before 'segment'");
    SegmentSpec& seg = out.back();
    if (value.empty())
      throw Error(Errc::kParse, "segment file line " + std::to_string(line_no) + ": missing value for " + key);
    if (key == "mode") {
      seg.mode = mode_from_string(value);
    } else if (key == "s") {
      seg.s = parse_number<double>(value, line_no);
    } else if (key == "recalibrate") {
      seg.recalibrate = parse_number<double>(value, line_no);
    } else if (key == "tasks") {
      seg.tasks.clear();
      std::istringstream ts(value);
      std::string t;
      while (std::getline(ts, t, ','))
        if (!trim(t).empty()) seg.tasks.push_back(trim(t));
    } else if (key == "iterations") {
      seg.iterations = parse_number<int>(value, line_no);
    } else if (key == "generations") {
      seg.generations = parse_number<int>(value, line_no);
    } else if (key == "children") {
      seg.children = parse_number<int>(value, line_no);
    } else if (key == "cycles") {
      seg.cycles = parse_number<int>(value, line_no);
    } else if (key == "samples_cap") {
      seg.samples_cap = parse_number<std::int64_t>(value, line_no);
    } else if (key == "add_tasks") {
      seg.add_task_dirs.push_back(value);
    } else {
      throw Error(Errc::kParse, "segment file line " + std::to_string(line_no) + ": unknown record '" + key + "'");
    }
  }
  for (const auto& seg : out) {
    if (seg.iterations < 0) throw Error(Errc::kParse, "segment " + seg.label + ": negative iterations");
    if (seg.iterations > 0 && seg.tasks.empty())
      throw Error(Errc::kParse, "segment " + seg.label + " iterates but lists no tasks");
  }
  return out;
}

std::vector<SegmentSpec> load_segments(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIo, "cannot open segment file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_segments(ss.str());
}

double acceptance_probability(int selections) { return std::ldexp(1.0, -selections); }

std::vector<ModelId> ranked_population(const SystemState& system, const TaskId& task) {
  std::vector<std::pair<double, ModelId>> scored;
  for (ModelId id : system.models_for_task(task)) scored.emplace_back(model_score(system, system.model(id)), id);
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<ModelId> out;
  for (const auto& [s, id] : scored) out.push_back(id);
  return out;
}

ModelId sample_parent(SystemState& system, const TaskId& task, Rng& rng) {
  if (system.models().empty()) throw Error(Errc::kState, "cannot sample a parent from an empty system");
  std::vector<ModelId> candidates = ranked_population(system, task);
  std::vector<ModelId> others;
  for (const auto& [id, m] : system.models())
    if (m.task != task) others.push_back(id);
  rng.shuffle(std::span<ModelId>(others));
  candidates.insert(candidates.end(), others.begin(), others.end());

  for (ModelId c : candidates) {
    if (acceptance_probability(system.selection_count(c, task)) > rng.uniform()) {
      system.increment_selection(c, task);
      return c;
    }
  }
  auto it = system.models().begin();
  std::advance(it, static_cast<std::ptrdiff_t>(rng.index(system.models().size())));
  system.increment_selection(it->first, task);
  return it->first;
}

void run_generation(RunState& run, DatasetCache& data, const TaskId& task) {
  SystemState& system = run.system;
  const EvolutionConfig& cfg = run.config;
  cfg.validate();
  const TaskDataset& dataset = data.get(system.task(task));
  const MutationFlags flags = cfg.flags();
  Rng& rng = system.rng();
  const int generation = system.advance_generation();

  for (int child_index = 0; child_index < cfg.children_per_generation; ++child_index) {
    const ModelId parent_id = sample_parent(system, task, rng);
    const ModelSpec parent = system.model(parent_id);
    std::vector<MutationAction> actions =
        cfg.finetune_top_k ? baseline_mutations(parent, *cfg.finetune_top_k)
                           : sample_mutations(parent, possible_mutations(system.space(), parent, flags), rng);
    ChildDraft draft = apply_mutations(system, parent, task, actions, flags, rng);
    const ModelId child_id = draft.model.id;
    LineageEvent event;
    event.child = child_id;
    event.parent = parent_id;
    event.task = task;
    event.generation = generation;
    event.mutations = draft.model.mutations;
    system.commit_model(std::move(draft.model), std::move(draft.fresh_blocks));

    std::optional<Snapshot> retained;
    try {
      Rng train_rng = rng.derive("train/" + std::to_string(child_id));
      for (int cycle = 0; cycle < cfg.train_cycles; ++cycle) {
        train_cycle(system, child_id, dataset, cfg.budget, cycle, cfg.train_cycles, train_rng);
        ModelSpec& child = system.mutable_model(child_id);
        child.quality = evaluate(system, child, dataset.val);
        const double child_score = model_score(system, child);
        double threshold = -std::numeric_limits<double>::infinity();
        if (retained) threshold = std::max(threshold, retained->score);
        if (system.has_model(parent_id) && system.model(parent_id).task == task)
          threshold = std::max(threshold, model_score(system, system.model(parent_id)));
        if (child_score >= threshold) retained = take_snapshot(system, child, child_score);
      }
    } catch (const Error& e) {
      event.error = e.what();
      retained.reset();
    }

    if (retained) {
      for (auto& [id, block] : retained->blocks) system.mutable_block(id) = std::move(block);
      ModelSpec& child = system.mutable_model(child_id);
      child.quality = retained->quality;
      child.train_steps = retained->train_steps;
      child.score_snapshot = retained->score;
      event.quality = retained->quality;
      event.score = retained->score;
      event.retained = true;
    } else {
      const ModelSpec& child = system.model(child_id);
      event.quality = child.quality;
      event.score = event.error.empty() ? model_score(system, child) : 0.0;
      system.discard_model(child_id);
    }
    run.lineage.push_back(std::move(event));
  }
}

void run_task_iteration(RunState& run, DatasetCache& data, const TaskId& task) {
  SystemState& system = run.system;
  if (!system.has_task(task)) throw Error(Errc::kNotFound, "unknown task " + task);
  for (int g = 0; g < run.config.generations; ++g) run_generation(run, data, task);

  const auto ranked = ranked_population(system, task);
  for (std::size_t i = 1; i < ranked.size(); ++i) system.discard_model(ranked[i]);
  if (!ranked.empty()) {
    ModelSpec& best = system.mutable_model(ranked.front());
    best.score_snapshot = model_score(system, best);
  }
}

MetricsSnapshot metrics_snapshot(const SystemState& system, DatasetCache& data,
                                 const std::vector<TaskId>& task_subset) {
  MetricsSnapshot snap;
  snap.num_models = system.models().size();
  double acc_sum = 0.0, val_sum = 0.0;
  std::size_t acc_n = 0;
  for (const auto& [id, m] : system.models()) {
    const double accounted = accounted_params(system, m);
    const std::int64_t flops = inference_flops(system, m);
    snap.mean_accounted_params += accounted;
    snap.mean_flops += static_cast<double>(flops);
    if (!system.has_task(m.task)) continue;
    TaskRow row;
    row.task = m.task;
    row.model = id;
    row.val_accuracy = m.quality;
    row.test_accuracy = evaluate(system, m, data.get(system.task(m.task)).test);
    row.accounted_params = accounted;
    row.flops = flops;
    row.hidden_depth = m.hidden_depth();
    row.resolution = model_resolution(system, m);
    if (std::find(task_subset.begin(), task_subset.end(), m.task) != task_subset.end()) {
      acc_sum += row.test_accuracy;
      val_sum += row.val_accuracy;
      ++acc_n;
    }
    snap.rows.push_back(std::move(row));
  }
  if (snap.num_models) {
    snap.mean_accounted_params /= static_cast<double>(snap.num_models);
    snap.mean_flops /= static_cast<double>(snap.num_models);
  }
  snap.mean_test_accuracy = acc_n ? acc_sum / static_cast<double>(acc_n) : std::nan("");
  snap.mean_val_accuracy = acc_n ? val_sum / static_cast<double>(acc_n) : std::nan("");
  return snap;
}

void apply_segment_overrides(RunState& run, const SegmentSpec& segment) {
  SystemState& system = run.system;
  for (const auto& dir : segment.add_task_dirs)
    for (const auto& info : scan_tasks(dir)) system.register_task(info);
  for (const auto& t : segment.tasks)
    if (!system.has_task(t)) throw Error(Errc::kNotFound, "segment " + segment.label + " names unknown task " + t);

  EvolutionConfig cfg = run.config;
  if (segment.mode) cfg.mode = *segment.mode;
  if (segment.generations) cfg.generations = *segment.generations;
  if (segment.children) cfg.children_per_generation = *segment.children;
  if (segment.cycles) cfg.train_cycles = *segment.cycles;
  if (segment.samples_cap) cfg.budget.samples_cap = *segment.samples_cap;
  cfg.validate();
  run.config = cfg;

  ScoreParams sp = system.score_params();
  sp.compute_factor_enabled = cfg.mode == Mode::kMuNetPlus;
  if (segment.s) sp.s = *segment.s;
  system.set_score_params(sp);
  if (segment.recalibrate) system.set_score_params(calibrate(system, *segment.recalibrate));
}

namespace {

void run_steps(RunState& run, DatasetCache& data, const SegmentSpec& segment, std::size_t start,
               std::vector<MetricsSnapshot>* produced, const std::function<void(const RunState&)>& on_step) {
  const std::size_t total = static_cast<std::size_t>(segment.iterations) * segment.tasks.size();
  for (std::size_t step = start; step < total; ++step) {
    const TaskId& task = segment.tasks[step % segment.tasks.size()];
    run_task_iteration(run, data, task);
    MetricsSnapshot snap = metrics_snapshot(run.system, data, segment.tasks);
    snap.index = run.history.size();
    snap.segment = segment.label;
    snap.task = task;
    run.history.push_back(snap);
    if (produced) produced->push_back(std::move(snap));
    run.progress.step = step + 1;
    if (on_step) on_step(run);
  }
}

}  // namespace

std::vector<MetricsSnapshot> run_segment(RunState& run, DatasetCache& data, const SegmentSpec& segment) {
  apply_segment_overrides(run, segment);
  std::vector<MetricsSnapshot> produced;
  run_steps(run, data, segment, 0, &produced, {});
  return produced;
}

void run_segments(RunState& run, DatasetCache& data, const std::vector<SegmentSpec>& segments,
                  const std::string& segments_digest, const std::function<void(const RunState&)>& on_step) {
  if (run.progress.segments_digest != segments_digest) run.progress = Progress{segments_digest, 0, 0, false};
  while (run.progress.segment < segments.size()) {
    const SegmentSpec& segment = segments[run.progress.segment];
    if (!run.progress.overrides_applied) {
      apply_segment_overrides(run, segment);
      run.progress.overrides_applied = true;
      run.progress.step = 0;
      if (on_step) on_step(run);
    }
    run_steps(run, data, segment, run.progress.step, nullptr, on_step);
    ++run.progress.segment;
    run.progress.step = 0;
    run.progress.overrides_applied = false;
  }
}

}  // namespace evomt
