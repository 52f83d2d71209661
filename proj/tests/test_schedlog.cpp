/*
 * Licensed to the Apache Software Foundation (ASF) under one
 * or more contributor license agreements.  See the NOTICE file
 * distributed with this work for additional information
 * regarding copyright ownership.  The ASF licenses this file
 * to you under the Apache License, Version 2.0 (the
 * "License"); you may not use this file except in compliance
 * with the License.  You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing,
 * software distributed under the License is distributed on an
 * "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
 * KIND, either express or implied.  See the License for the
 * specific language governing permissions and limitations
 * under the License.
 */

#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <set>
#include <map>
#include <numeric>

#include "fixtures.hpp"
#include "schedscope/schedlog.hpp"
#include "schedscope/synth.hpp"

namespace schedscope {
namespace {

using testing::MakeRecord;
using testing::MakeStage;
using testing::MakeTask;

TaskDefinition SimpleTask() {
  return MakeTask("t0", {MakeStage(0, "matmul", {{"i", 64, LoopKind::kSpatial}, {"k", 10, LoopKind::kReduction}},
                                   ArithCounts{0, 1, 0, 0, 0})});
}

ErrorCode CodeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::kInternal;
}

TEST(ParseLog, TaskAndBaseline) {
  std::string text = testing::TaskLine(SimpleTask()) + "\n" +
                     testing::RecordLine(MakeRecord("b0", "t0", 5.0, {}, true)) + "\n";
  ParsedLog log = ParseLog(text);
  ASSERT_EQ(log.tasks.size(), 1u);
  ASSERT_EQ(log.records.size(), 1u);
  EXPECT_TRUE(log.records[0].is_baseline);
  EXPECT_EQ(log.tasks[0].stages[0].loops[1].kind, LoopKind::kReduction);
}

TEST(ParseLog, HandWrittenLineWithUnknownFields) {
  std::string text =
      R"({"kind":"task","task_id":"t","name":"n","extra":1,"stages":[{"stage_index":0,"op_kind":"conv2d",)"
      R"("arith_counts":{"fma":2},"loops":[{"loop_id":"k","extent":64,"kind":"spatial","note":"x"}]}],"read_edges":[]})"
      "\n\n"
      R"({"kind":"record","record_id":"r1","task_id":"t","is_baseline":false,"latency_ms":1.5,)"
      R"("steps":[{"op":"split","stage":0,"loop":"k","factors":[8]},{"op":"annotate","stage":0,"loop":"k.1","ann":"vectorize","factor":8}]})"
      "\n";
  ParsedLog log = ParseLog(text);
  ASSERT_EQ(log.records.size(), 1u);
  EXPECT_EQ(log.tasks[0].stages[0].arith_counts.fma, 2);
  EXPECT_EQ(log.tasks[0].stages[0].op_kind.tag, OpKind::kConv2d);
  ASSERT_EQ(log.records[0].steps.size(), 2u);
  EXPECT_EQ(std::get<AnnotateStep>(log.records[0].steps[1]).factor, 8);
}

TEST(ParseLog, SplitOnMissingLoopIsInvalidStep) {
  std::string text = testing::TaskLine(SimpleTask()) + "\n" +
                     testing::RecordLine(MakeRecord("r1", "t0", 1.0, {SplitStep{0, "nope", {4}}})) + "\n";
  EXPECT_EQ(CodeOf([&] { ParseLog(text); }), ErrorCode::kInvalidStep);
}

TEST(ParseLog, DuplicateRecordId) {
  std::string text = testing::TaskLine(SimpleTask()) + "\n";
  for (const char* id : {"r1", "r1", "r2"}) text += testing::RecordLine(MakeRecord(id, "t0", 1.0)) + "\n";
  try {
    ParseLog(text);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDuplicateRecordId);
    EXPECT_EQ(e.subject(), "r1");
  }
}

TEST(ParseLog, UnknownTaskAndMalformedLines) {
  EXPECT_EQ(CodeOf([] { ParseLog(testing::RecordLine(MakeRecord("r", "ghost", 1.0))); }), ErrorCode::kUnknownTask);
  EXPECT_EQ(CodeOf([] { ParseLog("{not json"); }), ErrorCode::kMalformedLine);
  std::string task = testing::TaskLine(SimpleTask()) + "\n";
  EXPECT_EQ(CodeOf([&] { ParseLog(task + testing::RecordLine(MakeRecord("r", "t0", 0.0))); }),
            ErrorCode::kMalformedLine);
  EXPECT_EQ(CodeOf([&] { ParseLog(task + testing::RecordLine(MakeRecord("r", "t0", 1.0, {SplitStep{0, "i", {2}}}, true))); }),
            ErrorCode::kMalformedLine);
  try {
    ParseLog(task + "\n" + R"({"kind":"bogus"})");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.line(), 3);
  }
}

TEST(ParseLog, RejectsCyclesAndBadStageIndices) {
  auto a = MakeStage(0, "add", {{"i", 4, LoopKind::kSpatial}});
  auto b = MakeStage(1, "add", {{"i", 4, LoopKind::kSpatial}});
  auto cyclic = MakeTask("c", {a, b}, {{0, 1}, {1, 0}});
  EXPECT_EQ(CodeOf([&] { ParseLog(testing::TaskLine(cyclic)); }), ErrorCode::kMalformedLine);
  auto gap = MakeTask("g", {a, MakeStage(2, "add", {{"i", 4, LoopKind::kSpatial}})});
  EXPECT_EQ(CodeOf([&] { ParseLog(testing::TaskLine(gap)); }), ErrorCode::kMalformedLine);
}

TEST(ParseMetrics, MapsOverwritesAndRejects) {
  MetricRegistry registry = ParseRegistry("dram_bytes,DRAM,lower\nsm_eff,SM,higher\n");
  std::vector<MeasurementRecord> records = {MakeRecord("r1", "t0", 1.0)};
  ParseMetrics("r1,dram_bytes,100.0\n", registry, records);
  EXPECT_DOUBLE_EQ(records[0].metrics.at("dram_bytes"), 100.0);
  ParseMetrics("r1,dram_bytes,1\nr1,dram_bytes,2.5\n", registry, records);
  EXPECT_DOUBLE_EQ(records[0].metrics.at("dram_bytes"), 2.5);

  EXPECT_EQ(CodeOf([&] { ParseMetrics("r1,foo,1\n", registry, records); }), ErrorCode::kUnregisteredMetric);
  EXPECT_EQ(CodeOf([&] { ParseMetrics("r9,sm_eff,1\n", registry, records); }), ErrorCode::kUnknownRecord);
  EXPECT_EQ(CodeOf([&] { ParseMetrics("r1,sm_eff,1,000\n", registry, records); }), ErrorCode::kMalformedLine);
  EXPECT_EQ(CodeOf([&] { ParseMetrics("r1,sm_eff,abc\n", registry, records); }), ErrorCode::kNonNumericValue);
  // A failed table leaves the records untouched.
  EXPECT_EQ(CodeOf([&] { ParseMetrics("r1,sm_eff,3\nr1,sm_eff,x\n", registry, records); }),
            ErrorCode::kNonNumericValue);
  EXPECT_EQ(records[0].metrics.count("sm_eff"), 0u);
}

TEST(ParseRegistry, RejectsUnknownGroupOrDirection) {
  EXPECT_EQ(CodeOf([] { ParseRegistry("x,L2,higher\n"); }), ErrorCode::kMalformedLine);
  EXPECT_EQ(CodeOf([] { ParseRegistry("x,SM,up\n"); }), ErrorCode::kMalformedLine);
  EXPECT_EQ(CodeOf([] { ParseRegistry("x,SM,higher\nx,GPU,lower\n"); }), ErrorCode::kMalformedLine);
  auto reg = ParseRegistry("# comment\nx,GPU,lower\n");
  EXPECT_EQ(reg.entries.at("x").group, MetricGroup::kGpu);
}

TEST(ApplySteps, EvenSplit) {
  StageDef stage = MakeStage(0, "add", {{"k", 64, LoopKind::kSpatial}});
  std::vector<TransformStep> steps = {SplitStep{0, "k", {8}}};
  auto nest = ApplySteps(stage, steps);
  ASSERT_EQ(nest.loops.size(), 2u);
  EXPECT_EQ(nest.loops[0].extent, 8);
  EXPECT_EQ(nest.loops[1].extent, 8);
  EXPECT_EQ(nest.loops[0].loop_id, "k.0");
  EXPECT_EQ(nest.loops[1].loop_id, "k.1");
}

TEST(ApplySteps, CeilingSplitCoversIterationSpace) {
  StageDef stage = MakeStage(0, "add", {{"k", 10, LoopKind::kSpatial}});
  std::vector<TransformStep> steps = {SplitStep{0, "k", {4}}};
  auto nest = ApplySteps(stage, steps);
  ASSERT_EQ(nest.loops.size(), 2u);
  EXPECT_EQ(nest.loops[0].extent, 3);
  EXPECT_EQ(nest.loops[1].extent, 4);
  // Oracle: enumerate (outer, inner) and check every original index is produced.
  std::set<int64_t> covered;
  for (int64_t o = 0; o < nest.loops[0].extent; ++o) {
    for (int64_t i = 0; i < nest.loops[1].extent; ++i) {
      int64_t idx = o * nest.loops[1].extent + i;
      if (idx < 10) covered.insert(idx);
    }
  }
  EXPECT_EQ(covered.size(), 10u);
  EXPECT_GE(nest.TripCount(), 10);
}

TEST(ApplySteps, AnnotateAttachesToInnerLoop) {
  StageDef stage = MakeStage(0, "add", {{"k", 64, LoopKind::kSpatial}});
  std::vector<TransformStep> steps = {SplitStep{0, "k", {8}}, AnnotateStep{0, "k.1", AnnotationKind::kVectorize, 8}};
  auto nest = ApplySteps(stage, steps);
  ASSERT_EQ(nest.loops[1].marks.size(), 1u);
  EXPECT_EQ(nest.loops[1].marks[0].annotation, AnnotationKind::kVectorize);
  EXPECT_EQ(nest.loops[1].marks[0].factor, 8);
  EXPECT_TRUE(nest.loops[0].marks.empty());
}

TEST(ApplySteps, ReorderFuseBind) {
  StageDef stage = MakeStage(0, "add",
                             {{"a", 2, LoopKind::kSpatial}, {"b", 3, LoopKind::kSpatial}, {"c", 5, LoopKind::kSpatial}});
  std::vector<TransformStep> steps = {ReorderStep{0, {"c", "a", "b"}}, FuseStep{0, {"a", "b"}},
                                      BindStep{0, "a+b", BindAxis::kThreadX}};
  auto nest = ApplySteps(stage, steps);
  ASSERT_EQ(nest.loops.size(), 2u);
  EXPECT_EQ(nest.loops[0].loop_id, "c");
  EXPECT_EQ(nest.loops[1].loop_id, "a+b");
  EXPECT_EQ(nest.loops[1].extent, 6);
  EXPECT_EQ(nest.loops[1].bind_axis(), BindAxis::kThreadX);
}

TEST(ApplySteps, DanglingReferencesThrow) {
  StageDef stage = MakeStage(0, "add", {{"a", 2, LoopKind::kSpatial}, {"r", 3, LoopKind::kReduction}});
  auto bad = [&](TransformStep step) {
    std::vector<TransformStep> steps = {std::move(step)};
    return CodeOf([&] { ApplySteps(stage, steps); });
  };
  EXPECT_EQ(bad(SplitStep{0, "zz", {2}}), ErrorCode::kInvalidStep);
  EXPECT_EQ(bad(SplitStep{0, "a", {0}}), ErrorCode::kInvalidStep);
  EXPECT_EQ(bad(ReorderStep{0, {"a"}}), ErrorCode::kInvalidStep);
  EXPECT_EQ(bad(ReorderStep{0, {"a", "a"}}), ErrorCode::kInvalidStep);
  EXPECT_EQ(bad(FuseStep{0, {"a", "r"}}), ErrorCode::kInvalidStep);
  EXPECT_EQ(bad(AnnotateStep{0, "a", AnnotationKind::kUnroll, 0}), ErrorCode::kInvalidStep);
  EXPECT_EQ(bad(BindStep{1, "a", BindAxis::kBlockX}), ErrorCode::kInvalidStep);

  auto task = MakeTask("t", {stage, MakeStage(1, "add", {{"x", 4, LoopKind::kSpatial}})});
  std::vector<TransformStep> at = {ComputeAtStep{1, 0, "missing"}};
  EXPECT_EQ(CodeOf([&] { ApplyRecordSteps(task, at); }), ErrorCode::kInvalidStep);
  at = {ComputeAtStep{1, 0, "a"}};
  EXPECT_EQ(ApplyRecordSteps(task, at)[1].attachments.size(), 1u);
}

// Property: transformed trip count >= original, with equality when every split divides.
TEST(ApplyStepsProperty, TripCountPaddingBound) {
  Rng rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    int64_t extent = 1 + static_cast<int64_t>(rng.Index(200));
    StageDef stage = MakeStage(0, "add", {{"x", extent, LoopKind::kSpatial}, {"y", 6, LoopKind::kSpatial}});
    std::vector<TransformStep> steps;
    std::vector<int64_t> factors;
    const int nf = 1 + static_cast<int>(rng.Index(3));
    for (int f = 0; f < nf; ++f) factors.push_back(1 + static_cast<int64_t>(rng.Index(9)));
    steps.push_back(SplitStep{0, "x", factors});
    auto nest = ApplySteps(stage, steps);
    const int64_t inner = std::accumulate(factors.begin(), factors.end(), int64_t{1}, std::multiplies<>());
    EXPECT_GE(nest.TripCount(), extent * 6);
    if (extent % inner == 0) {
      EXPECT_EQ(nest.TripCount(), extent * 6);
    }
  }
}

// Property: Reorder and Fuse never change the multiset of annotation kinds.
TEST(ApplyStepsProperty, ReorderFusePreserveAnnotations) {
  Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    StageDef stage = MakeStage(0, "add",
                               {{"a", 4, LoopKind::kSpatial}, {"b", 4, LoopKind::kSpatial}, {"c", 4, LoopKind::kSpatial}});
    std::vector<TransformStep> steps;
    const std::array<AnnotationKind, 3> kinds = {AnnotationKind::kVectorize, AnnotationKind::kUnroll,
                                                 AnnotationKind::kParallel};
    const std::array<const char*, 3> ids = {"a", "b", "c"};
    for (int i = 0; i < 3; ++i) {
      if (rng.Uniform() < 0.7) steps.push_back(AnnotateStep{0, ids[i], kinds[rng.Index(3)], 2});
    }
    auto count = [](const TransformedLoopNest& nest) {
      std::multiset<std::string> out;
      for (const auto& l : nest.loops) {
        for (const auto& m : l.marks) out.insert(m.Label());
      }
      return out;
    };
    auto before = count(ApplySteps(stage, steps));
    std::vector<std::string> perm = {"a", "b", "c"};
    for (size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[rng.Index(i + 1)]);
    steps.push_back(ReorderStep{0, perm});
    steps.push_back(FuseStep{0, {perm[0], perm[1]}});
    EXPECT_EQ(count(ApplySteps(stage, steps)), before);
  }
}

TEST(ValidateDataset, MissingBaselineAndCleanFixture) {
  Dataset dataset;
  dataset.tasks.emplace("t0", SimpleTask());
  dataset.records = {MakeRecord("r1", "t0", 1.0)};
  ValidationReport report = ValidateDataset(dataset);
  ASSERT_EQ(report.violations.size(), 1u);
  EXPECT_EQ(report.violations[0].code, "MissingBaseline");
  EXPECT_EQ(report.violations[0].subject, "t0");

  dataset.records.push_back(MakeRecord("b", "t0", 2.0, {}, true));
  EXPECT_TRUE(ValidateDataset(dataset).ok());
}

TEST(ValidateDataset, ReportsProgrammaticViolations) {
  Dataset dataset;
  dataset.tasks.emplace("t0", SimpleTask());
  dataset.records = {MakeRecord("b", "t0", 2.0, {}, true), MakeRecord("r1", "t0", -1.0),
                     MakeRecord("r1", "t0", 1.0, {SplitStep{0, "ghost", {2}}}), MakeRecord("r2", "nope", 1.0)};
  dataset.records[1].metrics["unregistered"] = 1.0;
  auto report = ValidateDataset(dataset);
  std::set<std::string> codes;
  for (const auto& v : report.violations) codes.insert(v.code);
  EXPECT_EQ(codes, (std::set<std::string>{"NonPositiveLatency", "UnregisteredMetric", "DuplicateRecordId",
                                          "InvalidStep", "UnknownTask"}));
  // Pure: same input, same report.
  EXPECT_EQ(ValidateDataset(dataset), report);
}

TEST(RoundTrip, SerializeThenParseIsIdentityOnSyntheticDatasets) {
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    SynthSpec spec;
    spec.n_tasks = 1 + static_cast<int>(seed % 3);
    spec.n_records = 30;
    spec.n_clusters = 1 + static_cast<int>(seed % 4);
    spec.seed = seed;
    SynthOutput gen = Generate(spec);
    MetricRegistry registry = ParseRegistry(gen.registry);
    Dataset first = BuildDataset(ParseLog(gen.log), registry, gen.metrics);
    Dataset second = BuildDataset(ParseLog(SerializeLog(first)), ParseRegistry(SerializeRegistry(registry)),
                                  SerializeMetrics(first.records));
    EXPECT_EQ(first, second) << "seed " << seed;
    EXPECT_EQ(SerializeLog(second), gen.log);
  }
}

}  // namespace
}  // namespace schedscope
