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

#include "fixtures.hpp"
#include "schedscope/features.hpp"

namespace schedscope {
namespace {

using testing::MakeRecord;
using testing::MakeStage;
using testing::MakeTask;

TEST(FeatureSchema, FixedLayout) {
  EXPECT_EQ(kFeatureSchema.size(), 22u);
  std::set<std::string> names(kFeatureSchema.begin(), kFeatureSchema.end());
  EXPECT_EQ(names.size(), 22u);
  EXPECT_STREQ(kFeatureSchema[kVectorizeLenMax], "vectorize_len_max");
  EXPECT_STREQ(kFeatureSchema[kReductionSplitFactorLast], "reduction_split_factor_last");
}

TEST(ExtractFeatures, BaselineWeightsArithmeticByTripCount) {
  auto task = MakeTask("t", {MakeStage(0, "matmul", {{"i", 4, LoopKind::kSpatial}, {"j", 4, LoopKind::kSpatial}},
                                       ArithCounts{0, 1, 0, 0, 0})});
  auto fv = ExtractFeatures(MakeRecord("b", "t", 1.0, {}, true), task);
  EXPECT_EQ(fv[kMulCount], 16.0);
  for (int i = kNumSplits; i < kNumFeatures; ++i) {
    if (i == kThreadsPerBlock || i == kGridExtent) continue;
    EXPECT_EQ(fv[i], 0.0) << kFeatureSchema[i];
  }
  EXPECT_EQ(fv[kThreadsPerBlock], 1.0);
  EXPECT_EQ(fv[kGridExtent], 1.0);
}

TEST(ExtractFeatures, SplitThenVectorizeHandCount) {
  auto task = MakeTask("t", {MakeStage(0, "add", {{"k", 64, LoopKind::kSpatial}}, ArithCounts{1, 0, 0, 0, 0})});
  auto rec = MakeRecord("r", "t", 1.0, {SplitStep{0, "k", {8}}, AnnotateStep{0, "k.1", AnnotationKind::kVectorize, 8}});
  auto fv = ExtractFeatures(rec, task);
  EXPECT_EQ(fv[kNumSplits], 1.0);
  EXPECT_DOUBLE_EQ(fv[kSplitFactorGeomean], 8.0);
  EXPECT_EQ(fv[kVectorizeLenMax], 8.0);
  EXPECT_EQ(fv[kNumVectorize], 1.0);
  EXPECT_EQ(fv[kTileDepthMax], 2.0);
  EXPECT_EQ(fv[kAddCount], 64.0);
  EXPECT_EQ(fv[kReductionSplitFactorLast], 0.0);
}

TEST(ExtractFeatures, FinalReductionSplitFactor) {
  auto task = testing::BgemmChainTask();
  auto rec = MakeRecord("r", task.task_id, 1.0, {SplitStep{0, "k", {4}}});
  EXPECT_EQ(ExtractFeatures(rec, task)[kReductionSplitFactorLast], 4.0);
  // Later reduction splits win; spatial splits do not count.
  rec.steps = {SplitStep{0, "k", {8}}, SplitStep{0, "k.1", {2}}, SplitStep{0, "i", {16}}};
  auto fv = ExtractFeatures(rec, task);
  EXPECT_EQ(fv[kReductionSplitFactorLast], 2.0);
  EXPECT_EQ(fv[kNumSplits], 3.0);
  EXPECT_NEAR(fv[kSplitFactorGeomean], std::cbrt(8.0 * 2.0 * 16.0), 1e-12);
}

TEST(ExtractFeatures, ThreadBindingAndPaddedTripCounts) {
  auto task = MakeTask("t", {MakeStage(0, "add", {{"i", 100, LoopKind::kSpatial}, {"j", 8, LoopKind::kSpatial}},
                                       ArithCounts{0, 0, 1, 0, 2})});
  auto rec = MakeRecord("r", "t", 1.0,
                        {SplitStep{0, "i", {32}}, BindStep{0, "i.0", BindAxis::kBlockX},
                         BindStep{0, "i.1", BindAxis::kThreadX}, BindStep{0, "j", BindAxis::kThreadY},
                         AnnotateStep{0, "j", AnnotationKind::kUnroll, 4}, CacheWriteStep{0, "local"}});
  auto fv = ExtractFeatures(rec, task);
  EXPECT_EQ(fv[kThreadsPerBlock], 32.0 * 8.0);
  EXPECT_EQ(fv[kGridExtent], 4.0);  // ceil(100 / 32)
  EXPECT_EQ(fv[kDivCount], 4.0 * 32.0 * 8.0);
  EXPECT_EQ(fv[kSpecialCount], 2.0 * 4.0 * 32.0 * 8.0);
  EXPECT_EQ(fv[kNumBindBlock], 1.0);
  EXPECT_EQ(fv[kNumBindThread], 2.0);
  EXPECT_EQ(fv[kUnrollFactorMax], 4.0);
  EXPECT_EQ(fv[kNumCache], 1.0);
}

TEST(ExtractFeatures, InvalidStepPropagates) {
  auto task = testing::BgemmChainTask();
  auto rec = MakeRecord("r", task.task_id, 1.0, {SplitStep{0, "ghost", {4}}});
  EXPECT_THROW(ExtractFeatures(rec, task), Error);
}

TEST(ExtractFeaturesProperty, ReorderOnlyChangesReorderCount) {
  auto task = testing::BgemmChainTask();
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<TransformStep> steps;
    int64_t tile = 1 + static_cast<int64_t>(rng.Index(20));
    steps.push_back(SplitStep{0, "i", {tile}});
    if (rng.Uniform() < 0.5) steps.push_back(BindStep{0, "i.1", BindAxis::kThreadX});
    if (rng.Uniform() < 0.5) steps.push_back(SplitStep{0, "k", {1 + static_cast<int64_t>(rng.Index(8))}});
    if (rng.Uniform() < 0.5) steps.push_back(AnnotateStep{2, "j", AnnotationKind::kVectorize, 4});
    auto rec = MakeRecord("r", task.task_id, 1.0, steps);
    auto before = ExtractFeatures(rec, task);
    // Any permutation of the current stage-0 loops.
    auto nest = ApplyRecordSteps(task, steps)[0];
    std::vector<std::string> ids;
    for (const auto& l : nest.loops) ids.push_back(l.loop_id);
    for (size_t i = ids.size() - 1; i > 0; --i) std::swap(ids[i], ids[rng.Index(i + 1)]);
    rec.steps.push_back(ReorderStep{0, ids});
    auto after = ExtractFeatures(rec, task);
    for (int f = 0; f < kNumFeatures; ++f) {
      EXPECT_EQ(after[f], before[f] + (f == kNumReorders ? 1.0 : 0.0)) << kFeatureSchema[f];
    }
  }
}

TEST(ExtractFeaturesProperty, IgnoresRecordIdAndMetrics) {
  auto task = testing::BgemmChainTask();
  auto a = MakeRecord("a", task.task_id, 1.0, {SplitStep{0, "j", {8}}, AnnotateStep{0, "j.1", AnnotationKind::kVectorize, 8}});
  auto b = a;
  b.record_id = "renamed";
  b.metrics["dram"] = 42.0;
  b.latency_ms = 9.0;
  EXPECT_EQ(ExtractFeatures(a, task).values, ExtractFeatures(b, task).values);
}

TEST(Standardize, DocumentedCases) {
  Eigen::MatrixXd constant(3, 1);
  constant << 2, 2, 2;
  auto z = Standardize(constant);
  EXPECT_EQ(z.values.col(0).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(z.stddev(0), 0.0);

  Eigen::MatrixXd two(2, 1);
  two << 1, 3;
  z = Standardize(two);
  EXPECT_DOUBLE_EQ(z.values(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(z.values(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(z.stddev(0), 1.0);

  Eigen::MatrixXd one = Eigen::MatrixXd::Constant(1, 22, 5.0);
  EXPECT_EQ(Standardize(one).values.cwiseAbs().maxCoeff(), 0.0);

  EXPECT_THROW(Standardize(Eigen::MatrixXd(0, 22)), Error);
}

TEST(StandardizeProperty, ZeroMeanAndIdempotent) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.Index(40));
    Eigen::MatrixXd m(n, 6);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < 6; ++j) m(i, j) = j == 5 ? 3.0 : 100.0 * rng.Normal() + 10.0 * j;
    }
    auto once = Standardize(m);
    for (int j = 0; j < 6; ++j) EXPECT_NEAR(once.values.col(j).mean(), 0.0, 1e-12);
    auto twice = Standardize(once.values);
    EXPECT_LE((twice.values - once.values).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(FeatureCsv, HeaderAndVersion) {
  auto task = testing::BgemmChainTask();
  std::vector<FeatureVector> fvs = {ExtractFeatures(MakeRecord("r1", task.task_id, 1.0), task)};
  std::string csv = FeatureCsv(fvs);
  EXPECT_EQ(csv.rfind("# feature-schema v1\nrecord_id,add_count,", 0), 0u);
  EXPECT_NE(csv.find("\nr1,"), std::string::npos);
}

}  // namespace
}  // namespace schedscope
