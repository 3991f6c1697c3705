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

#include "evomt/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "evomt/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace evomt {

namespace {

void fnv(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
}

json nan_safe(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double from_nan_safe(const json& j) { return j.is_null() ? std::nan("") : j.get<double>(); }

json to_json(const ScoreParams& sp) {
  return {{"s", sp.s},
          {"P", sp.P},
          {"F", sp.F},
          {"size_factor", sp.size_factor_enabled},
          {"compute_factor", sp.compute_factor_enabled}};
}

ScoreParams score_from_json(const json& j) {
  ScoreParams sp;
  sp.s = j.at("s").get<double>();
  sp.P = j.at("P").get<double>();
  sp.F = j.at("F").get<double>();
  sp.size_factor_enabled = j.at("size_factor").get<bool>();
  sp.compute_factor_enabled = j.at("compute_factor").get<bool>();
  return sp;
}

json to_json(const EvolutionConfig& c) {
  json j = {{"generations", c.generations},
            {"children", c.children_per_generation},
            {"cycles", c.train_cycles},
            {"samples_cap", c.budget.samples_cap},
            {"batch_size", c.budget.batch_size},
            {"mode", std::string(to_string(c.mode))}};
  j["finetune_top_k"] = c.finetune_top_k ? json(*c.finetune_top_k) : json(nullptr);
  return j;
}

EvolutionConfig config_from_json(const json& j) {
  EvolutionConfig c;
  c.generations = j.at("generations").get<int>();
  c.children_per_generation = j.at("children").get<int>();
  c.train_cycles = j.at("cycles").get<int>();
  c.budget.samples_cap = j.at("samples_cap").get<std::int64_t>();
  c.budget.batch_size = j.at("batch_size").get<int>();
  c.mode = mode_from_string(j.at("mode").get<std::string>());
  if (!j.at("finetune_top_k").is_null()) c.finetune_top_k = j.at("finetune_top_k").get<int>();
  return c;
}

json to_json(const MetricsSnapshot& s) {
  json rows = json::array();
  for (const auto& r : s.rows)
    rows.push_back({{"task", r.task},
                    {"model", r.model},
                    {"val_accuracy", r.val_accuracy},
                    {"test_accuracy", r.test_accuracy},
                    {"accounted_params", r.accounted_params},
                    {"flops", r.flops},
                    {"hidden_depth", r.hidden_depth},
                    {"resolution", r.resolution}});
  return {{"index", s.index},
          {"segment", s.segment},
          {"task", s.task},
          {"mean_test_accuracy", nan_safe(s.mean_test_accuracy)},
          {"mean_val_accuracy", nan_safe(s.mean_val_accuracy)},
          {"mean_accounted_params", s.mean_accounted_params},
          {"mean_flops", s.mean_flops},
          {"num_models", s.num_models},
          {"rows", rows}};
}

MetricsSnapshot snapshot_from_json(const json& j) {
  MetricsSnapshot s;
  s.index = j.at("index").get<std::uint64_t>();
  s.segment = j.at("segment").get<std::string>();
  s.task = j.at("task").get<std::string>();
  s.mean_test_accuracy = from_nan_safe(j.at("mean_test_accuracy"));
  s.mean_val_accuracy = from_nan_safe(j.at("mean_val_accuracy"));
  s.mean_accounted_params = j.at("mean_accounted_params").get<double>();
  s.mean_flops = j.at("mean_flops").get<double>();
  s.num_models = j.at("num_models").get<std::size_t>();
  for (const auto& r : j.at("rows")) {
    TaskRow row;
    row.task = r.at("task").get<std::string>();
    row.model = r.at("model").get<ModelId>();
    row.val_accuracy = r.at("val_accuracy").get<double>();
    row.test_accuracy = r.at("test_accuracy").get<double>();
    row.accounted_params = r.at("accounted_params").get<double>();
    row.flops = r.at("flops").get<std::int64_t>();
    row.hidden_depth = r.at("hidden_depth").get<int>();
    row.resolution = r.at("resolution").get<int>();
    s.rows.push_back(std::move(row));
  }
  return s;
}

json build_manifest(const RunState& run) {
  const SystemState& sys = run.system;
  json m;
  m["version"] = kCheckpointVersion;
  m["format"] = "evomt-checkpoint";
  m["space"] = sys.space().serialize();
  const auto& g = sys.geometry();
  m["geometry"] = {{"channels", g.channels},
                   {"patch", g.patch},
                   {"width", g.width},
                   {"root_depth", g.root_depth},
                   {"root_classes", g.root_classes}};
  m["score_params"] = to_json(sys.score_params());
  m["rng"] = {{"seed", sys.rng().seed()}, {"stream", sys.rng().stream()}, {"counter", sys.rng().counter()}};
  m["counters"] = {
      {"next_block", sys.next_block_id()}, {"next_model", sys.next_model_id()}, {"generation", sys.generation()}};

  json tasks = json::array();
  for (const auto& [name, t] : sys.tasks())
    tasks.push_back({{"name", t.name},
                     {"dir", t.dir},
                     {"classes", t.num_classes},
                     {"h", t.height},
                     {"w", t.width},
                     {"c", t.channels}});
  m["tasks"] = tasks;

  json blocks = json::array();
  for (const auto& [id, b] : sys.blocks())
    blocks.push_back({{"id", id},
                      {"kind", std::string(to_string(b.kind))},
                      {"d_in", b.d_in},
                      {"d_out", b.d_out},
                      {"created_by_task", b.created_by_task},
                      {"generation_tag", b.generation_tag}});
  m["blocks"] = blocks;

  json models = json::array();
  for (const auto& [id, md] : sys.models()) {
    json layers = json::array();
    for (const auto& ref : md.layers) layers.push_back({ref.block, ref.trainable});
    json hp = json::object();
    for (const auto& axis : sys.space().axes()) hp[axis.name] = sys.space().label(md.hparams, axis.name);
    json mu = json::object();
    for (const auto& [key, step] : md.mu) mu[key] = MuGrid::value(step);
    models.push_back({{"id", id},
                      {"task", md.task},
                      {"layers", layers},
                      {"hparams", hp},
                      {"mu", mu},
                      {"parent", md.parent ? json(*md.parent) : json(nullptr)},
                      {"mutations", md.mutations},
                      {"quality", md.quality},
                      {"score_snapshot", md.score_snapshot ? json(*md.score_snapshot) : json(nullptr)},
                      {"train_steps", md.train_steps}});
  }
  m["models"] = models;

  json counts = json::array();
  for (const auto& [key, n] : sys.selection_counts()) counts.push_back({key.first, key.second, n});
  m["selection_counts"] = counts;

  m["config"] = to_json(run.config);
  m["progress"] = {{"segments_digest", run.progress.segments_digest},
                   {"segment", run.progress.segment},
                   {"step", run.progress.step},
                   {"overrides_applied", run.progress.overrides_applied}};
  json history = json::array();
  for (const auto& s : run.history) history.push_back(to_json(s));
  m["history"] = history;
  json lineage = json::array();
  for (const auto& e : run.lineage)
    lineage.push_back({{"child", e.child},
                       {"parent", e.parent},
                       {"task", e.task},
                       {"generation", e.generation},
                       {"mutations", e.mutations},
                       {"quality", e.quality},
                       {"score", e.score},
                       {"retained", e.retained},
                       {"error", e.error}});
  m["lineage"] = lineage;
  return m;
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float f) {
  const auto v = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

float get_f32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return std::bit_cast<float>(v);
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

fs::path block_path(const fs::path& dir, BlockId id) { return dir / "blocks" / (std::to_string(id) + ".bin"); }

}  // namespace

std::string manifest_text(const RunState& run) { return build_manifest(run).dump(1) + "\n"; }

std::vector<std::uint8_t> encode_block(const LayerBlock& block) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + 8 * block.size());
  put_u64(out, block.size());
  for (float f : block.params) put_f32(out, f);
  for (float f : block.opt_state) put_f32(out, f);
  return out;
}

void save_checkpoint(const RunState& run, const fs::path& dir) {
  fs::create_directories(dir / "blocks");
  std::set<fs::path> keep;
  for (const auto& [id, b] : run.system.blocks()) {
    const fs::path p = block_path(dir, id);
    const auto bytes = encode_block(b);
    std::ofstream os(p, std::ios::binary | std::ios::trunc);
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw Error(Errc::kIo, "failed writing " + p.string());
    keep.insert(p.filename());
  }
  for (const auto& entry : fs::directory_iterator(dir / "blocks"))
    if (!keep.count(entry.path().filename())) fs::remove(entry.path());
  const fs::path tmp = dir / "manifest.json.tmp";
  {
    std::ofstream os(tmp, std::ios::trunc);
    os << manifest_text(run);
    if (!os) throw Error(Errc::kIo, "failed writing " + tmp.string());
  }
  fs::rename(tmp, dir / "manifest.json");
}

RunState load_checkpoint(const fs::path& dir) {
  json m;
  {
    std::ifstream is(dir / "manifest.json");
    if (!is) throw Error(Errc::kCheckpoint, "no manifest in " + dir.string());
    m = json::parse(is, nullptr, false);
    if (m.is_discarded() || !m.is_object()) throw Error(Errc::kCheckpoint, "corrupt manifest in " + dir.string());
  }
  if (!m.contains("version") || !m["version"].is_number_integer())
    throw Error(Errc::kCheckpoint, "manifest has no version field");
  if (m["version"].get<int>() != kCheckpointVersion)
    throw Error(Errc::kCheckpoint, "checkpoint version " + std::to_string(m["version"].get<int>()) +
                                       " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  try {
    BackboneGeometry g;
    const auto& jg = m.at("geometry");
    g.channels = jg.at("channels").get<int>();
    g.patch = jg.at("patch").get<int>();
    g.width = jg.at("width").get<int>();
    g.root_depth = jg.at("root_depth").get<int>();
    g.root_classes = jg.at("root_classes").get<int>();
    RunState run;
    run.system = SystemState(SearchSpace::parse(m.at("space").get<std::string>()), g, 0);
    SystemState& sys = run.system;
    sys.set_score_params(score_from_json(m.at("score_params")));
    const auto& jr = m.at("rng");
    sys.set_rng(Rng(jr.at("seed").get<std::uint64_t>(), jr.at("stream").get<std::string>(),
                    jr.at("counter").get<std::uint64_t>()));
    for (const auto& t : m.at("tasks")) {
      TaskInfo info;
      info.name = t.at("name").get<std::string>();
      info.dir = t.at("dir").get<std::string>();
      info.num_classes = t.at("classes").get<int>();
      info.height = t.at("h").get<int>();
      info.width = t.at("w").get<int>();
      info.channels = t.at("c").get<int>();
      sys.register_task(info);
    }

    std::map<BlockId, LayerBlock> blocks;
    for (const auto& jb : m.at("blocks")) {
      LayerBlock b;
      b.id = jb.at("id").get<BlockId>();
      b.kind = layer_kind_from_string(jb.at("kind").get<std::string>());
      b.d_in = jb.at("d_in").get<int>();
      b.d_out = jb.at("d_out").get<int>();
      b.created_by_task = jb.at("created_by_task").get<std::string>();
      b.generation_tag = jb.at("generation_tag").get<int>();
      const fs::path p = block_path(dir, b.id);
      if (!fs::exists(p)) throw Error(Errc::kCheckpoint, "missing block file for block " + std::to_string(b.id));
      const auto bytes = read_file(p);
      const std::size_t n = LayerBlock::dense_size(b.d_in, b.d_out);
      std::uint64_t header = 0;
      if (bytes.size() >= 8)
        for (int i = 0; i < 8; ++i) header |= static_cast<std::uint64_t>(bytes[static_cast<std::size_t>(i)]) << (8 * i);
      if (bytes.size() != 8 + 8 * n || header != n)
        throw Error(Errc::kCheckpoint, "missing or truncated data for block " + std::to_string(b.id));
      b.params.resize(n);
      b.opt_state.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        b.params[i] = get_f32(&bytes[8 + 4 * i]);
        b.opt_state[i] = get_f32(&bytes[8 + 4 * (n + i)]);
      }
      blocks.emplace(b.id, std::move(b));
    }

    for (const auto& jm : m.at("models")) {
      ModelSpec md;
      md.id = jm.at("id").get<ModelId>();
      md.task = jm.at("task").get<std::string>();
      for (const auto& l : jm.at("layers")) md.layers.push_back({l.at(0).get<BlockId>(), l.at(1).get<bool>()});
      md.hparams = sys.space().default_config();
      for (std::size_t ai = 0; ai < sys.space().axes().size(); ++ai) {
        const auto& axis = sys.space().axes()[ai];
        const std::string label = jm.at("hparams").at(axis.name).get<std::string>();
        auto it = std::find(axis.labels.begin(), axis.labels.end(), label);
        if (it == axis.labels.end())
          throw Error(Errc::kCheckpoint, "model " + std::to_string(md.id) + " has invalid " + axis.name);
        md.hparams.index[ai] = static_cast<std::size_t>(it - axis.labels.begin());
      }
      for (const auto& [key, p] : jm.at("mu").items()) md.mu[key] = MuGrid::to_step(p.get<double>());
      if (!jm.at("parent").is_null()) md.parent = jm.at("parent").get<ModelId>();
      md.mutations = jm.at("mutations").get<std::vector<std::string>>();
      md.quality = jm.at("quality").get<double>();
      if (!jm.at("score_snapshot").is_null()) md.score_snapshot = jm.at("score_snapshot").get<double>();
      md.train_steps = jm.at("train_steps").get<std::uint64_t>();
      // Blocks enter the store with the first model that references them.
      std::vector<LayerBlock> fresh;
      for (const auto& ref : md.layers) {
        auto it = blocks.find(ref.block);
        if (it != blocks.end()) {
          fresh.push_back(std::move(it->second));
          blocks.erase(it);
        } else if (!sys.has_block(ref.block)) {
          throw Error(Errc::kCheckpoint, "model " + std::to_string(md.id) + " references unknown block " +
                                             std::to_string(ref.block));
        }
      }
      sys.commit_model(std::move(md), std::move(fresh));
    }
    if (!blocks.empty())
      throw Error(Errc::kCheckpoint, "block " + std::to_string(blocks.begin()->first) + " is not referenced");

    for (const auto& c : m.at("selection_counts"))
      sys.set_selection_count(c.at(0).get<ModelId>(), c.at(1).get<std::string>(), c.at(2).get<int>());
    const auto& jc = m.at("counters");
    sys.set_id_counters(jc.at("next_block").get<BlockId>(), jc.at("next_model").get<ModelId>());
    sys.set_generation(jc.at("generation").get<int>());

    run.config = config_from_json(m.at("config"));
    const auto& jp = m.at("progress");
    run.progress.segments_digest = jp.at("segments_digest").get<std::string>();
    run.progress.segment = jp.at("segment").get<std::size_t>();
    run.progress.step = jp.at("step").get<std::size_t>();
    run.progress.overrides_applied = jp.at("overrides_applied").get<bool>();
    for (const auto& s : m.at("history")) run.history.push_back(snapshot_from_json(s));
    for (const auto& e : m.at("lineage")) {
      LineageEvent ev;
      ev.child = e.at("child").get<ModelId>();
      ev.parent = e.at("parent").get<ModelId>();
      ev.task = e.at("task").get<std::string>();
      ev.generation = e.at("generation").get<int>();
      ev.mutations = e.at("mutations").get<std::vector<std::string>>();
      ev.quality = e.at("quality").get<double>();
      ev.score = e.at("score").get<double>();
      ev.retained = e.at("retained").get<bool>();
      ev.error = e.at("error").get<std::string>();
      run.lineage.push_back(std::move(ev));
    }
    return run;
  } catch (const json::exception& e) {
    throw Error(Errc::kCheckpoint, std::string("corrupt manifest: ") + e.what());
  }
}

std::uint64_t run_digest(const RunState& run) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const std::string text = manifest_text(run);
  fnv(h, text.data(), text.size());
  for (const auto& [id, b] : run.system.blocks()) {
    const auto bytes = encode_block(b);
    fnv(h, bytes.data(), bytes.size());
  }
  return h;
}

std::string digest_hex(std::uint64_t digest) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(digest));
  return buf;
}

std::string file_digest(const fs::path& path) {
  const auto bytes = read_file(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  fnv(h, bytes.data(), bytes.size());
  return digest_hex(h);
}

}  // namespace evomt
