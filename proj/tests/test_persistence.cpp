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

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "evomt/checkpoint.hpp"
#include "evomt/error.hpp"
#include "evomt/reports.hpp"
#include "evomt/synthetic.hpp"
#include "test_util.hpp"

namespace evomt {
namespace {

namespace fs = std::filesystem;
using testing::make_run;
using testing::scratch_dir;

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::map<std::string, std::string> dir_contents(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_file(e.path());
  return out;
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

class PersistenceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    run_ = make_run(testing::four_task_spec(96, 32, 32), 17, data_);
    run_.config = testing::small_config();
    for (auto t : {"a1", "b1", "a2"}) run_task_iteration(run_, data_, t);
    run_.history.push_back(metrics_snapshot(run_.system, data_, {"a1", "b1", "a2"}));
    run_.system.rng().next_u64();  // state mid-stream
  }

  DatasetCache data_;
  RunState run_;
};

TEST_F(PersistenceTest, SaveLoadSaveIsByteIdentical) {
  const auto d1 = scratch_dir("ckpt1"), d2 = scratch_dir("ckpt2");
  save_checkpoint(run_, d1);
  const RunState back = load_checkpoint(d1);
  save_checkpoint(back, d2);
  EXPECT_EQ(dir_contents(d1), dir_contents(d2));
  EXPECT_EQ(run_digest(back), run_digest(run_));
  EXPECT_EQ(manifest_text(back), manifest_text(run_));
}

TEST_F(PersistenceTest, RoundTripRestoresRngStreamAndState) {
  const auto d = scratch_dir("ckpt_rng");
  save_checkpoint(run_, d);
  RunState back = load_checkpoint(d);
  EXPECT_EQ(back.system.rng(), run_.system.rng());
  EXPECT_EQ(back.system.rng().next_u64(), run_.system.rng().next_u64());
  EXPECT_EQ(back.config, run_.config);
  EXPECT_EQ(back.system.score_params(), run_.system.score_params());
  EXPECT_EQ(back.system.selection_counts(), run_.system.selection_counts());
  EXPECT_EQ(back.lineage.size(), run_.lineage.size());
  EXPECT_EQ(back.history.size(), 1u);
  EXPECT_EQ(back.system.next_block_id(), run_.system.next_block_id());
  for (const auto& [id, b] : run_.system.blocks()) {
    EXPECT_EQ(back.system.block(id).params, b.params);
    EXPECT_EQ(back.system.block(id).opt_state, b.opt_state);
  }
  for (const auto& [id, m] : run_.system.models()) {
    EXPECT_EQ(back.system.model(id).mu, m.mu);
    EXPECT_EQ(back.system.model(id).layers, m.layers);
    EXPECT_EQ(back.system.model(id).hparams, m.hparams);
  }
}

TEST_F(PersistenceTest, BlockFileLayout) {
  const auto d = scratch_dir("ckpt_layout");
  save_checkpoint(run_, d);
  const LayerBlock& b = run_.system.blocks().begin()->second;
  const std::string bytes = read_file(d / "blocks" / (std::to_string(b.id) + ".bin"));
  ASSERT_EQ(bytes.size(), 8 + 8 * b.size());
  std::uint64_t n = 0;
  for (int i = 7; i >= 0; --i) n = (n << 8) | static_cast<unsigned char>(bytes[static_cast<std::size_t>(i)]);
  EXPECT_EQ(n, b.size());
  float first;
  std::memcpy(&first, bytes.data() + 8, 4);
  EXPECT_EQ(first, b.params[0]);
  const auto encoded = encode_block(b);
  EXPECT_EQ(bytes, std::string(encoded.begin(), encoded.end()));
  EXPECT_NE(read_file(d / "manifest.json").find("\"version\": 1"), std::string::npos);
}

TEST_F(PersistenceTest, TruncatedBlockNamesTheBlock) {
  const auto d = scratch_dir("ckpt_trunc");
  save_checkpoint(run_, d);
  const BlockId id = run_.system.blocks().rbegin()->first;
  const fs::path p = d / "blocks" / (std::to_string(id) + ".bin");
  fs::resize_file(p, fs::file_size(p) - 3);
  try {
    load_checkpoint(d);
    FAIL() << "expected a checkpoint error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kCheckpoint);
    EXPECT_NE(std::string(e.what()).find("block " + std::to_string(id)), std::string::npos) << e.what();
  }
}

TEST_F(PersistenceTest, MissingBlockFileIsReported) {
  const auto d = scratch_dir("ckpt_missing");
  save_checkpoint(run_, d);
  const BlockId id = run_.system.blocks().begin()->first;
  fs::remove(d / "blocks" / (std::to_string(id) + ".bin"));
  try {
    load_checkpoint(d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find(std::to_string(id)), std::string::npos);
  }
}

TEST_F(PersistenceTest, VersionAndCorruptionAreChecked) {
  const auto d = scratch_dir("ckpt_bad");
  save_checkpoint(run_, d);
  std::string manifest = read_file(d / "manifest.json");
  const auto pos = manifest.find("\"version\": 1");
  ASSERT_NE(pos, std::string::npos);
  std::string bumped = manifest;
  bumped.replace(pos, 12, "\"version\": 2");
  std::ofstream(d / "manifest.json", std::ios::trunc) << bumped;
  EXPECT_THROW(load_checkpoint(d), Error);
  std::ofstream(d / "manifest.json", std::ios::trunc) << manifest.substr(0, manifest.size() / 2);
  EXPECT_THROW(load_checkpoint(d), Error);
  std::ofstream(d / "manifest.json", std::ios::trunc) << "{\"models\": []}";
  EXPECT_THROW(load_checkpoint(d), Error);
  EXPECT_THROW(load_checkpoint(scratch_dir("ckpt_empty")), Error);
}

TEST_F(PersistenceTest, ResaveDropsStaleBlockFiles) {
  const auto d = scratch_dir("ckpt_stale");
  save_checkpoint(run_, d);
  const auto before = dir_contents(d).size();
  run_task_iteration(run_, data_, "a1");
  save_checkpoint(run_, d);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(d / "blocks")) files += e.is_regular_file();
  EXPECT_EQ(files, run_.system.blocks().size());
  EXPECT_GT(before, 0u);
  EXPECT_NO_THROW(load_checkpoint(d));
}

TEST_F(PersistenceTest, ReportsHaveStableHeaders) {
  const auto d = scratch_dir("reports");
  const auto files = emit_reports(run_, d);
  EXPECT_EQ(files.size(), 8u);
  EXPECT_EQ(first_line(d / "timeline.csv"),
            "index,segment,task,mean_test_accuracy,mean_val_accuracy,mean_accounted_params,mean_flops,num_models");
  EXPECT_EQ(first_line(d / "task_rows.csv"),
            "index,task,model,val_accuracy,test_accuracy,accounted_params,flops,hidden_depth,resolution");
  EXPECT_EQ(first_line(d / "hparam_histogram.csv"), "axis,value,count");
  EXPECT_EQ(first_line(d / "mu_histogram.csv"), "family,value,count");
  EXPECT_EQ(first_line(d / "clone_mu_by_depth.csv"), "depth,mean_mu,count");
  EXPECT_EQ(first_line(d / "clone_mu_fit.csv"), "slope,intercept,points");
  EXPECT_EQ(first_line(d / "lineage.csv"), "child,parent,task,generation,retained,quality,score,mutations,error");
  EXPECT_EQ(read_file(d / "system.dot"), export_dot(run_.system));
}

TEST(Reports, SingleModelLearningRateHistogram) {
  SystemState sys = testing::make_system({"a"});
  Rng rng(1, "t");
  testing::add_child(sys, 1, "a", {}, rng);
  std::size_t total = 0;
  for (const auto& b : hparam_histogram(sys)) {
    if (b.key != "learning_rate") continue;
    total += b.count;
    EXPECT_EQ(b.count, b.value == "0.01" ? 1u : 0u) << b.value;
  }
  EXPECT_EQ(total, 1u);
}

TEST(Reports, MuHistogramCoversTheGridPerFamily) {
  SystemState sys = testing::make_system({"a"});
  Rng rng(2, "t");
  const ModelId a = testing::add_child(sys, 1, "a", {}, rng);
  const auto bins = mu_histogram(sys);
  std::map<std::string, std::size_t> per_family, totals;
  for (const auto& b : bins) {
    ++per_family[b.key];
    totals[b.key] += b.count;
  }
  for (const auto& [family, n] : per_family) EXPECT_EQ(n, 15u) << family;
  EXPECT_EQ(totals["clone"], static_cast<std::size_t>(sys.model(a).hidden_depth() + 1));
  EXPECT_EQ(totals["remove_top"], 1u);
}

TEST(Reports, ConstantCloneMuFitsAFlatLine) {
  std::vector<DepthMean> pts{{0, 0.2, 3}, {1, 0.2, 1}, {2, 0.2, 2}, {5, 0.2, 1}};
  const LineFit f = fit_line(pts);
  EXPECT_EQ(f.slope, 0.0);
  EXPECT_NEAR(f.intercept, 0.2, 1e-15);
  EXPECT_EQ(fit_line({{3, 0.1, 1}}).slope, 0.0);
  EXPECT_EQ(fit_line({}).points, 0u);
}

TEST(Reports, LineFitMatchesNormalEquations) {
  Rng rng(3, "fit");
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<DepthMean> pts;
    const int n = 2 + static_cast<int>(rng.index(20));
    for (int i = 0; i < n; ++i) pts.push_back({i * 2 + static_cast<int>(rng.index(2)), rng.uniform(0.02, 0.3), 1});
    // [n, Sx; Sx, Sxx] [b; a] = [Sy; Sxy] solved by Cramer's rule.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& p : pts) {
      sx += p.depth;
      sy += p.mean_mu;
      sxx += double(p.depth) * p.depth;
      sxy += p.depth * p.mean_mu;
    }
    const double det = n * sxx - sx * sx;
    const double a = (n * sxy - sx * sy) / det;
    const double b = (sxx * sy - sx * sxy) / det;
    const LineFit f = fit_line(pts);
    EXPECT_NEAR(f.slope, a, 1e-9);
    EXPECT_NEAR(f.intercept, b, 1e-9);
  }
}

TEST(Reports, CloneMuByDepthAveragesTaskModels) {
  SystemState sys = testing::make_system({"a", "b"});
  Rng rng(4, "t");
  const ModelId a = testing::add_child(sys, 1, "a", {}, rng);
  const ModelId b = testing::add_child(sys, 1, "b", {}, rng);
  sys.mutable_model(a).mu["clone:1"] = 2;
  sys.mutable_model(b).mu["clone:1"] = 6;
  for (const auto& d : clone_mu_by_depth(sys))
    if (d.depth == 1) {
      EXPECT_NEAR(d.mean_mu, 0.08, 1e-15);
      EXPECT_EQ(d.count, 2u);
    }
}

TEST(Synthetic, SameSeedGivesIdenticalFiles) {
  const auto spec = testing::four_task_spec(40, 10, 10);
  const auto d1 = scratch_dir("syn1"), d2 = scratch_dir("syn2"), d3 = scratch_dir("syn3");
  write_synthetic_tasks(spec, 5, d1);
  write_synthetic_tasks(spec, 5, d2);
  write_synthetic_tasks(spec, 6, d3);
  const auto c1 = dir_contents(d1);
  EXPECT_EQ(c1.size(), 16u);
  EXPECT_EQ(c1, dir_contents(d2));
  EXPECT_NE(c1.at("a1/train.bin"), dir_contents(d3).at("a1/train.bin"));
}

TEST(Synthetic, LabelsAreUniform) {
  SyntheticSpec spec = testing::four_task_spec(6000, 10, 10);
  spec.tasks.resize(1);
  spec.tasks[0].classes = 6;
  spec.relations.clear();
  const auto tasks = generate_synthetic_tasks(spec, 8);
  std::vector<int> counts(6, 0);
  for (int l : tasks[0].train.labels) ++counts[static_cast<std::size_t>(l)];
  const double n = 6000, p = 1.0 / 6;
  const double sigma = std::sqrt(n * p * (1 - p));
  for (int c : counts) EXPECT_NEAR(c, n * p, 3 * sigma);
}

TEST(Synthetic, RelatedPairsSharePrototypes) {
  SyntheticSpec spec = testing::four_task_spec(10, 10, 10);
  spec.tasks[1].classes = 7;
  spec.relations = {{"a1", "a2", 0.4}};
  const auto protos = synthetic_prototypes(spec, 9);
  std::size_t shared = 0;
  for (const auto& p : protos[1])
    for (const auto& q : protos[0]) shared += p == q;
  EXPECT_GE(static_cast<double>(shared) / 7.0, 0.4);
  EXPECT_EQ(shared, 3u);  // ceil(0.4 * 7)
  std::size_t b_shared = 0;
  for (const auto& p : protos[3])
    for (const auto& q : protos[2]) b_shared += p == q;
  EXPECT_EQ(b_shared, 0u);
}

TEST(Synthetic, InvalidSpecsAreRejected) {
  EXPECT_THROW(parse_synthetic_spec("dims 8 8 3\n"), Error);  // no tasks
  EXPECT_THROW(parse_synthetic_spec("task a 2 10 10 10\ntask a 2 10 10 10\n"), Error);
  EXPECT_THROW(parse_synthetic_spec("task a 0 10 10 10\n"), Error);
  EXPECT_THROW(parse_synthetic_spec("task a 2 10 10 10\nrelate a b 0.5\n"), Error);
  EXPECT_THROW(parse_synthetic_spec("task a 2 10 10 10\ntask b 2 1 1 1\nrelate a b 1.5\n"), Error);
  EXPECT_THROW(parse_synthetic_spec("task a 2 10 10\n"), Error);
  EXPECT_THROW(parse_synthetic_spec("colour red\n"), Error);
  const auto ok = parse_synthetic_spec("dims 8 8 3\ntile 2\nnoise 0.1\ntask a 2 10 5 5\ntask b 3 10 5 5\nrelate a b 1\n");
  EXPECT_EQ(ok.tasks.size(), 2u);
  EXPECT_EQ(ok.tile, 2);
}

// ---------------------------------------------------------------- CLI

int run_cli(const std::string& args, std::string* err = nullptr) {
  const auto log = fs::temp_directory_path() / "evomt_cli_stderr.txt";
  const std::string cmd = std::string(EVOMT_CLI_PATH) + " " + args + " >/dev/null 2>" + log.string();
  const int rc = std::system(cmd.c_str());
  if (err) *err = read_file(log);
  return rc;
}

TEST(Cli, FullWorkflow) {
  const auto root = scratch_dir("cli");
  std::ofstream(root / "tasks.spec") << "dims 8 8 3\ntile 4\nnoise 0.1\ntask p 3 64 16 16\ntask q 3 64 16 16\n"
                                        "relate p q 0.5\n";
  std::ofstream(root / "more.spec") << "dims 8 8 3\ntask r 2 64 16 16\n";
  std::ofstream(root / "seg.txt") << "segment s1\nmode munet\ntasks p,q\niterations 1\ngenerations 1\n"
                                     "children 1\ncycles 1\nsamples_cap 32\n";
  const std::string ck = (root / "ck").string();
  ASSERT_EQ(run_cli("gen-tasks --spec " + (root / "tasks.spec").string() + " --seed 1 --out " +
                    (root / "tasks").string()), 0);
  ASSERT_EQ(run_cli("gen-tasks --spec " + (root / "more.spec").string() + " --seed 1 --out " +
                    (root / "more").string()), 0);
  ASSERT_EQ(run_cli("init --space " + (testing::spaces_dir() / "desk.axes").string() + " --tasks " +
                    (root / "tasks").string() + " --seed 3 --width 8 --root-depth 2 " + ck), 0);
  ASSERT_EQ(run_cli("run --checkpoint " + ck + " --segments " + (root / "seg.txt").string()), 0);
  ASSERT_EQ(run_cli("add-tasks --checkpoint " + ck + " --tasks " + (root / "more").string()), 0);
  ASSERT_EQ(run_cli("set-scoring --checkpoint " + ck + " --s 0.9 --recalibrate 10"), 0);
  ASSERT_EQ(run_cli("report --checkpoint " + ck + " --out " + (root / "rep").string()), 0);
  ASSERT_EQ(run_cli("export-dot --checkpoint " + ck + " --out " + (root / "g.dot").string()), 0);

  const RunState run = load_checkpoint(ck);
  EXPECT_TRUE(run.system.has_task("r"));
  EXPECT_EQ(run.system.score_params().s, 0.9);
  EXPECT_EQ(run.system.models().size(), 3u);
  EXPECT_EQ(run.history.size(), 2u);
  EXPECT_TRUE(fs::exists(root / "rep" / "timeline.csv"));
  EXPECT_EQ(read_file(root / "g.dot"), export_dot(run.system));

  // Re-running a completed segment file changes nothing.
  const auto digest = run_digest(run);
  ASSERT_EQ(run_cli("run --checkpoint " + ck + " --segments " + (root / "seg.txt").string()), 0);
  EXPECT_EQ(run_digest(load_checkpoint(ck)), digest);
}

TEST(Cli, InitCanPretrainTheRoot) {
  const auto root = scratch_dir("cli_pretrain");
  std::ofstream(root / "tasks.spec") << "dims 8 8 3\ntask p 3 32 8 8\n";
  std::ofstream(root / "bank.spec") << "dims 8 8 3\ntask bank 5 128 16 16\n";
  ASSERT_EQ(run_cli("gen-tasks --spec " + (root / "tasks.spec").string() + " --seed 1 --out " +
                    (root / "tasks").string()), 0);
  ASSERT_EQ(run_cli("gen-tasks --spec " + (root / "bank.spec").string() + " --seed 2 --out " +
                    (root / "bank").string()), 0);
  const std::string common = "init --space " + (testing::spaces_dir() / "desk.axes").string() + " --tasks " +
                             (root / "tasks").string() + " --seed 3 --width 8 --root-depth 1 ";
  ASSERT_EQ(run_cli(common + "--root-classes 5 " + (root / "plain").string()), 0);
  ASSERT_EQ(run_cli(common + "--pretrain " + (root / "bank" / "bank").string() + " --pretrain-cycles 2 " +
                    (root / "pre").string()), 0);
  const RunState plain = load_checkpoint(root / "plain"), pre = load_checkpoint(root / "pre");
  const ModelSpec& a = plain.system.model(1);
  const ModelSpec& b = pre.system.model(1);
  EXPECT_EQ(pre.system.block(b.head().block).d_out, 5);
  EXPECT_NE(block_digest(plain.system.block(a.layers[0].block)), block_digest(pre.system.block(b.layers[0].block)));
  EXPECT_EQ(b.train_steps, 8u);  // 2 cycles of 128 samples in batches of 32
  EXPECT_NE(pre.system.score_params().P, 0.0);
}

TEST(Cli, FailuresExitNonzeroWithOneLine) {
  std::string err;
  EXPECT_NE(run_cli("report --checkpoint /nonexistent/ck --out /tmp/x", &err), 0);
  EXPECT_EQ(std::count(err.begin(), err.end(), '\n'), 1) << err;
  EXPECT_NE(err.find("evomt:"), std::string::npos);
  EXPECT_NE(run_cli("frobnicate", &err), 0);
  EXPECT_NE(run_cli("", &err), 0);
  const auto root = scratch_dir("cli_bad");
  std::ofstream(root / "bad.spec") << "task a 0 1 1 1\n";
  EXPECT_NE(run_cli("gen-tasks --spec " + (root / "bad.spec").string() + " --seed 1 --out " + root.string(), &err), 0);
  EXPECT_EQ(std::count(err.begin(), err.end(), '\n'), 1) << err;
}

}  // namespace
}  // namespace evomt
