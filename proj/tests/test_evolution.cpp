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

#include "evomt/error.hpp"
#include "evomt/evolution.hpp"
#include "test_util.hpp"

namespace evomt {
namespace {

using testing::add_child;
using testing::make_run;
using testing::make_system;
using testing::small_config;

class EvolutionTest : public ::testing::Test {
 protected:
  void SetUp() override {
    run_ = make_run(testing::four_task_spec(128, 48, 48), 42, data_);
    run_.config = small_config();
  }
  std::size_t count_for(const TaskId& t) const { return run_.system.models_for_task(t).size(); }

  DatasetCache data_;
  RunState run_;
};

TEST(Acceptance, ExactPowersOfOneHalf) {
  for (int k = 0; k <= 10; ++k) EXPECT_EQ(acceptance_probability(k), 1.0 / static_cast<double>(1 << k));
  EXPECT_EQ(acceptance_probability(0), 1.0);
}

TEST(SampleParent, FreshCountsReturnTheBestActiveModel) {
  SystemState sys = make_system({"a", "b"});
  Rng rng(1, "t");
  const ModelId weak = add_child(sys, 1, "a", {}, rng);
  const ModelId strong = add_child(sys, 1, "a", {}, rng);
  sys.mutable_model(weak).quality = 0.3;
  sys.mutable_model(strong).quality = 0.8;
  EXPECT_EQ(ranked_population(sys, "a"), (std::vector<ModelId>{strong, weak}));
  Rng pick(2, "p");
  EXPECT_EQ(sample_parent(sys, "a", pick), strong);
  EXPECT_EQ(sys.selection_count(strong, "a"), 1);
  EXPECT_EQ(sys.selection_count(strong, "b"), 0);
}

TEST(SampleParent, TiesGoToTheOlderModel) {
  SystemState sys = make_system({"a"});
  Rng rng(3, "t");
  const ModelId first = add_child(sys, 1, "a", {}, rng);
  const ModelId second = add_child(sys, 1, "a", {}, rng);
  sys.mutable_model(first).quality = sys.mutable_model(second).quality = 0.5;
  EXPECT_EQ(ranked_population(sys, "a").front(), first);
}

TEST(SampleParent, CountTwoIsAcceptedAQuarterOfTheTime) {
  SystemState sys = make_system({"a"});
  Rng rng(4, "t");
  const ModelId x = add_child(sys, 1, "a", {}, rng);
  sys.mutable_model(x).quality = 0.9;
  Rng pick(5, "p");
  const int n = 20000;
  int chosen = 0;
  for (int i = 0; i < n; ++i) {
    sys.set_selection_count(x, "a", 2);
    sys.set_selection_count(1, "a", 200);  // root is never accepted
    chosen += sample_parent(sys, "a", pick) == x;
  }
  // x is accepted with 0.25 when first in line; otherwise the uniform
  // fallback over the two models picks it half of the time.
  const double expected = 0.25 + 0.75 * 0.5;
  EXPECT_NEAR(chosen / double(n), expected, 3 * std::sqrt(expected * (1 - expected) / n));
}

TEST(SampleParent, NewTaskDrawsFromOtherTasks) {
  SystemState sys = make_system({"a", "b", "c"});
  Rng rng(6, "t");
  add_child(sys, 1, "a", {}, rng);
  add_child(sys, 1, "b", {}, rng);
  Rng pick(7, "p");
  std::map<ModelId, int> hits;
  for (int i = 0; i < 300; ++i) {
    const ModelId p = sample_parent(sys, "c", pick);
    EXPECT_NE(sys.model(p).task, "c");
    ++hits[p];
  }
  EXPECT_EQ(hits.size(), 3u);  // shuffled order reaches every model
}

TEST(SampleParent, EmptySystemIsAnError) {
  SystemState sys(testing::desk_space(), testing::tiny_geometry(), 1);
  sys.register_task(testing::task_info("a"));
  Rng rng(8, "t");
  EXPECT_THROW(sample_parent(sys, "a", rng), Error);
}

TEST_F(EvolutionTest, OtherTaskParentChildIsAlwaysRetained) {
  run_.config.children_per_generation = 1;
  run_generation(run_, data_, "a1");
  ASSERT_EQ(run_.lineage.size(), 1u);
  EXPECT_EQ(run_.lineage[0].parent, 1u);
  EXPECT_TRUE(run_.lineage[0].retained);
  EXPECT_EQ(count_for("a1"), 1u);
}

TEST_F(EvolutionTest, StrictlyWorseChildIsDiscarded) {
  run_.config.children_per_generation = 1;
  run_task_iteration(run_, data_, "a1");
  const ModelId incumbent = run_.system.models_for_task("a1").front();
  run_.system.mutable_model(incumbent).quality = 1.5;  // out of reach for any child
  const auto blocks = run_.system.blocks().size();
  run_generation(run_, data_, "a1");
  EXPECT_FALSE(run_.lineage.back().retained);
  EXPECT_EQ(run_.system.models_for_task("a1"), std::vector<ModelId>{incumbent});
  EXPECT_EQ(run_.system.blocks().size(), blocks);
}

TEST_F(EvolutionTest, ExactTieWithParentIsRetained) {
  // Head-only children of a same-task parent keep every cost equal. A dry run
  // on a copy reveals the child's quality, which is then given to the parent.
  run_.config.children_per_generation = 1;
  run_task_iteration(run_, data_, "a1");
  const ModelId incumbent = run_.system.models_for_task("a1").front();
  run_.config.finetune_top_k = 0;
  RunState dry = run_;
  run_generation(dry, data_, "a1");
  const double child_quality = dry.lineage.back().quality;

  run_.system.mutable_model(incumbent).quality = child_quality;
  run_generation(run_, data_, "a1");
  const auto& ev = run_.lineage.back();
  ASSERT_EQ(ev.parent, incumbent);
  ASSERT_EQ(ev.quality, child_quality);
  EXPECT_EQ(ev.score, model_score(run_.system, run_.system.model(incumbent)));
  EXPECT_TRUE(ev.retained);
  EXPECT_EQ(count_for("a1"), 2u);
}

TEST_F(EvolutionTest, TrainerErrorsAreContainedPerChild) {
  TaskDataset broken = data_.get(run_.system.task("b1"));
  broken.train = Split{};
  data_.insert(std::move(broken));
  run_.config.children_per_generation = 2;
  EXPECT_NO_THROW(run_generation(run_, data_, "b1"));
  ASSERT_EQ(run_.lineage.size(), 2u);
  for (const auto& ev : run_.lineage) {
    EXPECT_FALSE(ev.error.empty());
    EXPECT_FALSE(ev.retained);
  }
  EXPECT_EQ(count_for("b1"), 0u);
  EXPECT_TRUE(testing::references_consistent(run_.system));
}

TEST_F(EvolutionTest, IterationLeavesExactlyOneModelAndSparesOthers) {
  run_.config.generations = 2;
  run_.config.children_per_generation = 3;
  run_task_iteration(run_, data_, "a1");
  EXPECT_EQ(count_for("a1"), 1u);
  const auto others_before = run_.system.models_for_task("a2");
  const ModelId a1_model = run_.system.models_for_task("a1").front();
  run_task_iteration(run_, data_, "a2");
  EXPECT_EQ(count_for("a2"), 1u);
  EXPECT_EQ(run_.system.models_for_task("a1"), std::vector<ModelId>{a1_model});
  EXPECT_TRUE(run_.system.has_model(1));
  EXPECT_TRUE(others_before.empty());
  EXPECT_TRUE(testing::references_consistent(run_.system));
}

TEST_F(EvolutionTest, FreshTaskSingleChildGainsOneModel) {
  run_.config.children_per_generation = 1;
  const auto before = run_.system.models().size();
  run_task_iteration(run_, data_, "b2");
  EXPECT_EQ(run_.system.models().size(), before + 1);
}

TEST_F(EvolutionTest, FinetuneBaselineClonesExactlyTheTopLayers) {
  run_.config.finetune_top_k = 2;
  run_.config.children_per_generation = 3;
  run_generation(run_, data_, "a1");
  for (const auto& ev : run_.lineage) {
    std::set<std::string> keys(ev.mutations.begin(), ev.mutations.end());
    // Root depth 2: body layers are the embedding (0) and hidden 1, 2.
    EXPECT_EQ(keys, (std::set<std::string>{"head", "clone:1", "clone:2"}));
  }
}

TEST_F(EvolutionTest, FrozenBlocksNeverChange) {
  std::map<BlockId, std::uint64_t> root_digests;
  for (const auto& ref : run_.system.model(1).layers) root_digests[ref.block] = block_digest(run_.system.block(ref.block));
  run_.config.generations = 2;
  for (auto t : {"a1", "a2", "b1"}) run_task_iteration(run_, data_, t);
  for (const auto& [id, d] : root_digests) EXPECT_EQ(block_digest(run_.system.block(id)), d);
}

TEST_F(EvolutionTest, MetricsSingleModelAndBruteForceMeans) {
  MetricsSnapshot only_root = metrics_snapshot(run_.system, data_, {});
  EXPECT_EQ(only_root.num_models, 1u);
  EXPECT_EQ(only_root.mean_accounted_params, accounted_params(run_.system, run_.system.model(1)));
  EXPECT_EQ(only_root.mean_flops, static_cast<double>(inference_flops(run_.system, run_.system.model(1))));

  for (auto t : {"a1", "a2", "b1"}) run_task_iteration(run_, data_, t);
  const MetricsSnapshot snap = metrics_snapshot(run_.system, data_, {"a1", "b1"});
  double sum = 0.0;
  for (const auto& [id, m] : run_.system.models()) sum += testing::brute_force_accounted(run_.system, id);
  EXPECT_NEAR(snap.mean_accounted_params, sum / 4.0, 1e-9);
  EXPECT_EQ(snap.rows.size(), 3u);
  double acc = 0.0;
  for (const auto& r : snap.rows)
    if (r.task == "a1" || r.task == "b1") acc += r.test_accuracy;
  EXPECT_DOUBLE_EQ(snap.mean_test_accuracy, acc / 2.0);
}

TEST(Segments, ParseRecords) {
  const auto segs = parse_segments(
      "# two segments\n"
      "segment warm\nmode munet\ntasks a1, a2\niterations 2\ngenerations 3\nchildren 5\ncycles 2\nsamples_cap 64\n"
      "\nsegment switch\nmode munet_plus\ns 0.99\nrecalibrate 10\nadd_tasks /tmp/more\n");
  ASSERT_EQ(segs.size(), 2u);
  EXPECT_EQ(segs[0].label, "warm");
  EXPECT_EQ(segs[0].tasks, (std::vector<std::string>{"a1", "a2"}));
  EXPECT_EQ(segs[0].iterations, 2);
  EXPECT_EQ(segs[0].mode, Mode::kMuNet);
  EXPECT_EQ(segs[0].generations, 3);
  EXPECT_EQ(segs[0].children, 5);
  EXPECT_EQ(segs[0].cycles, 2);
  EXPECT_EQ(segs[0].samples_cap, 64);
  EXPECT_FALSE(segs[0].s.has_value());
  EXPECT_EQ(segs[1].mode, Mode::kMuNetPlus);
  EXPECT_EQ(segs[1].s, 0.99);
  EXPECT_EQ(segs[1].recalibrate, 10.0);
  EXPECT_EQ(segs[1].add_task_dirs, std::vector<std::string>{"/tmp/more"});
  EXPECT_EQ(segs[1].iterations, 0);
}

TEST(Segments, MalformedFilesAreRejected) {
  EXPECT_THROW(parse_segments("mode munet\n"), Error);                          // record before a segment
  EXPECT_THROW(parse_segments("segment a\nmode fast\n"), Error);                // unknown mode
  EXPECT_THROW(parse_segments("segment a\niterations two\n"), Error);           // bad number
  EXPECT_THROW(parse_segments("segment a\niterations 1\n"), Error);             // iterations without tasks
  EXPECT_THROW(parse_segments("segment a\nlearning 3\n"), Error);               // unknown record
  EXPECT_THROW(load_segments("/nonexistent/segments.txt"), Error);
}

TEST_F(EvolutionTest, RecalibrationOnlySegmentKeepsModels) {
  run_task_iteration(run_, data_, "a1");
  const auto models = run_.system.models().size();
  SegmentSpec seg;
  seg.label = "cal";
  seg.recalibrate = 10.0;
  seg.s = 0.9;
  const auto out = run_segment(run_, data_, seg);
  EXPECT_TRUE(out.empty());
  EXPECT_EQ(run_.system.models().size(), models);
  const ScoreParams expect = calibrate(run_.system, 10.0);
  EXPECT_EQ(run_.system.score_params().P, expect.P);
  EXPECT_EQ(run_.system.score_params().s, 0.9);
}

TEST_F(EvolutionTest, SegmentRegistersAndVisitsNewTasks) {
  SyntheticSpec extra = testing::four_task_spec(64, 16, 16);
  extra.tasks = {{"c1", 3, 64, 16, 16}, {"c2", 3, 64, 16, 16}};
  extra.relations.clear();
  const auto dir = testing::scratch_dir("newtasks");
  write_synthetic_tasks(extra, 9, dir);
  SegmentSpec seg;
  seg.label = "grow";
  seg.add_task_dirs = {dir.string()};
  seg.tasks = {"c1", "c2"};
  seg.iterations = 1;
  const auto out = run_segment(run_, data_, seg);
  EXPECT_EQ(out.size(), 2u);
  EXPECT_EQ(count_for("c1"), 1u);
  EXPECT_EQ(count_for("c2"), 1u);
  EXPECT_EQ(out.back().task, "c2");
}

TEST_F(EvolutionTest, UnknownSegmentTaskIsAnError) {
  SegmentSpec seg;
  seg.label = "bad";
  seg.tasks = {"zz"};
  seg.iterations = 1;
  EXPECT_THROW(run_segment(run_, data_, seg), Error);
}

TEST_F(EvolutionTest, ModeSwitchUnlocksComputeMutations) {
  SegmentSpec base;
  base.label = "base";
  base.mode = Mode::kMuNet;
  base.tasks = {"a1", "b1"};
  base.iterations = 1;
  run_.config.children_per_generation = 6;
  run_segment(run_, data_, base);
  EXPECT_FALSE(run_.system.score_params().compute_factor_enabled);
  for (const auto& ev : run_.lineage)
    for (const auto& k : ev.mutations) EXPECT_TRUE(k != "remove_top" && k != "hparam:resolution") << k;

  SegmentSpec plus = base;
  plus.label = "plus";
  plus.mode = Mode::kMuNetPlus;
  plus.iterations = 3;
  const std::size_t mark = run_.lineage.size();
  run_segment(run_, data_, plus);
  EXPECT_TRUE(run_.system.score_params().compute_factor_enabled);
  bool saw = false;
  for (std::size_t i = mark; i < run_.lineage.size(); ++i)
    for (const auto& k : run_.lineage[i].mutations) saw |= k == "remove_top" || k == "hparam:resolution";
  EXPECT_TRUE(saw);
}

TEST_F(EvolutionTest, ResumedSegmentsMatchAnUnbrokenRun) {
  const std::vector<SegmentSpec> segs = parse_segments(
      "segment one\nmode munet\ntasks a1,b1\niterations 1\n"
      "segment two\nmode munet_plus\nrecalibrate 10\ntasks a2\niterations 1\n");
  RunState straight = run_;
  DatasetCache d1;
  for (auto& t : generate_synthetic_tasks(testing::four_task_spec(128, 48, 48), 42)) d1.insert(std::move(t));
  run_segments(straight, d1, segs, "digest");

  // Stop after the first task iteration, round-trip the state, then resume.
  RunState partial = run_;
  std::vector<RunState> saved;
  try {
    run_segments(partial, data_, segs, "digest", [&](const RunState& r) {
      if (r.progress.step == 1 && r.progress.segment == 0) {
        saved.push_back(r);
        throw std::runtime_error("interrupt");
      }
    });
  } catch (const std::runtime_error&) {
  }
  ASSERT_EQ(saved.size(), 1u);
  const auto dir = testing::scratch_dir("resume");
  save_checkpoint(saved[0], dir);
  RunState resumed = load_checkpoint(dir);
  run_segments(resumed, data_, segs, "digest");
  EXPECT_EQ(run_digest(resumed), run_digest(straight));
  EXPECT_EQ(resumed.history.size(), 3u);
  // A finished segment list is a no-op.
  const auto digest = run_digest(resumed);
  run_segments(resumed, data_, segs, "digest");
  EXPECT_EQ(run_digest(resumed), digest);
}

}  // namespace
}  // namespace evomt
