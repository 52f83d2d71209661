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

/*!
 * \file schedscope/features.hpp
 * \brief Fixed-schema feature vectors describing the optimization choices of a
 *  measurement record, and column standardization.
 */
#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "schedscope/schedlog.hpp"

namespace schedscope {

inline constexpr int kNumFeatures = 22;
inline constexpr const char* kFeatureSchemaVersion = "v1";

// Order is the vector layout.
inline constexpr std::array<const char*, kNumFeatures> kFeatureSchema = {
    "add_count",         "mul_count",         "div_count",         "fma_count",
    "special_count",     "n_splits",          "split_factor_geomean",
    "tile_depth_max",    "n_reorders",        "n_fuses",           "unroll_factor_max",
    "vectorize_len_max", "n_parallel",        "n_vectorize",       "n_unroll",
    "n_bind_block",      "n_bind_thread",     "threads_per_block", "grid_extent",
    "n_compute_at",      "n_cache",           "reduction_split_factor_last"};

enum FeatureIndex : int {
  kAddCount = 0,
  kMulCount,
  kDivCount,
  kFmaCount,
  kSpecialCount,
  kNumSplits,
  kSplitFactorGeomean,
  kTileDepthMax,
  kNumReorders,
  kNumFuses,
  kUnrollFactorMax,
  kVectorizeLenMax,
  kNumParallel,
  kNumVectorize,
  kNumUnroll,
  kNumBindBlock,
  kNumBindThread,
  kThreadsPerBlock,
  kGridExtent,
  kNumComputeAt,
  kNumCache,
  kReductionSplitFactorLast,
};

struct FeatureVector {
  std::string record_id;
  std::array<double, kNumFeatures> values{};

  double operator[](int i) const { return values[i]; }
};

/*!
 * \brief Extracts the feature vector of one record.
 *
 * Arithmetic counts are weighted by the transformed trip count of each stage.
 * Thread and grid extents are per-stage products over bound loops, maxed over
 * stages. Only the step list and the task are read.
 */
inline FeatureVector ExtractFeatures(const MeasurementRecord& record, const TaskDefinition& task) {
  FeatureVector fv;
  fv.record_id = record.record_id;
  auto& v = fv.values;

  std::vector<TransformedLoopNest> nests;
  for (const auto& stage : task.stages) nests.push_back(ApplySteps(stage, {}));

  double log_factor_sum = 0.0;
  int num_factors = 0;
  for (const auto& step : record.steps) {
    const int stage = StepStage(step);
    if (stage < 0 || stage >= static_cast<int>(nests.size())) {
      throw Error(ErrorCode::kInvalidStep, record.record_id, "stage " + std::to_string(stage));
    }
    auto& nest = nests[stage];
    if (const auto* split = std::get_if<SplitStep>(&step)) {
      int pos = nest.FindLoop(split->loop_id);
      v[kNumSplits] += 1;
      v[kTileDepthMax] = std::max(v[kTileDepthMax], static_cast<double>(split->factors.size() + 1));
      for (int64_t f : split->factors) {
        if (f >= 1) log_factor_sum += std::log(static_cast<double>(f));
        ++num_factors;
      }
      if (pos >= 0 && nest.loops[pos].kind == LoopKind::kReduction && !split->factors.empty()) {
        v[kReductionSplitFactorLast] = static_cast<double>(split->factors.back());
      }
    } else if (std::holds_alternative<ReorderStep>(step)) {
      v[kNumReorders] += 1;
    } else if (std::holds_alternative<FuseStep>(step)) {
      v[kNumFuses] += 1;
    } else if (const auto* ann = std::get_if<AnnotateStep>(&step)) {
      const double factor = static_cast<double>(ann->factor);
      switch (ann->kind) {
        case AnnotationKind::kVectorize:
          v[kNumVectorize] += 1;
          v[kVectorizeLenMax] = std::max(v[kVectorizeLenMax], factor);
          break;
        case AnnotationKind::kUnroll:
          v[kNumUnroll] += 1;
          v[kUnrollFactorMax] = std::max(v[kUnrollFactorMax], factor);
          break;
        case AnnotationKind::kParallel:
          v[kNumParallel] += 1;
          break;
      }
    } else if (const auto* bind = std::get_if<BindStep>(&step)) {
      v[IsThreadAxis(bind->axis) ? kNumBindThread : kNumBindBlock] += 1;
    } else if (const auto* at = std::get_if<ComputeAtStep>(&step)) {
      v[kNumComputeAt] += 1;
      int target = at->target_stage_index;
      if (target < 0 || target >= static_cast<int>(nests.size()) ||
          nests[target].FindLoop(at->target_loop_id) < 0) {
        throw Error(ErrorCode::kInvalidStep, record.record_id, "compute_at target");
      }
    } else {
      v[kNumCache] += 1;
    }
    detail::ApplyLocal(nest, step);
  }
  v[kSplitFactorGeomean] = num_factors > 0 ? std::exp(log_factor_sum / num_factors) : 0.0;

  double threads = 1.0, grid = 1.0;
  for (size_t s = 0; s < nests.size(); ++s) {
    const auto& nest = nests[s];
    const auto& arith = task.stages[s].arith_counts;
    const double trips = static_cast<double>(nest.TripCount());
    v[kAddCount] += static_cast<double>(arith.add) * trips;
    v[kMulCount] += static_cast<double>(arith.mul) * trips;
    v[kDivCount] += static_cast<double>(arith.div) * trips;
    v[kFmaCount] += static_cast<double>(arith.fma) * trips;
    v[kSpecialCount] += static_cast<double>(arith.special) * trips;

    double stage_threads = 1.0, stage_grid = 1.0;
    for (const auto& loop : nest.loops) {
      if (auto axis = loop.bind_axis()) {
        (IsThreadAxis(*axis) ? stage_threads : stage_grid) *= static_cast<double>(loop.extent);
      }
    }
    threads = std::max(threads, stage_threads);
    grid = std::max(grid, stage_grid);
  }
  v[kThreadsPerBlock] = threads;
  v[kGridExtent] = grid;
  return fv;
}

/*! \brief Stacks feature vectors into an N x 22 matrix, one row per record. */
inline Eigen::MatrixXd FeatureMatrix(const std::vector<FeatureVector>& features) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(features.size()), kNumFeatures);
  for (size_t i = 0; i < features.size(); ++i) {
    for (int j = 0; j < kNumFeatures; ++j) m(static_cast<Eigen::Index>(i), j) = features[i][j];
  }
  return m;
}

struct Standardized {
  Eigen::MatrixXd values;
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;  // population stddev, 0 for constant columns
};

/*!
 * \brief Z-scores each column with the population standard deviation.
 *
 * Constant columns (stddev below 1e-12 relative to the column scale) map to
 * zeros and report stddev 0.
 */
inline Standardized Standardize(const Eigen::MatrixXd& matrix) {
  if (matrix.rows() == 0) throw Error(ErrorCode::kEmptyMatrix, "standardize");
  const double n = static_cast<double>(matrix.rows());
  Standardized out;
  out.mean = matrix.colwise().sum().transpose() / n;
  out.stddev = Eigen::VectorXd::Zero(matrix.cols());
  out.values = Eigen::MatrixXd::Zero(matrix.rows(), matrix.cols());
  for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
    Eigen::VectorXd centered = matrix.col(j).array() - out.mean(j);
    const double sd = std::sqrt(centered.squaredNorm() / n);
    const double scale = std::max(1.0, matrix.col(j).cwiseAbs().maxCoeff());
    if (sd <= 1e-12 * scale) continue;
    out.stddev(j) = sd;
    out.values.col(j) = centered / sd;
  }
  return out;
}

inline std::string FeatureCsv(const std::vector<FeatureVector>& features) {
  std::string out = std::string("# feature-schema ") + kFeatureSchemaVersion + "\nrecord_id";
  for (const char* name : kFeatureSchema) out += std::string(",") + name;
  out += "\n";
  for (const auto& fv : features) {
    out += fv.record_id;
    for (double value : fv.values) out += "," + FormatDouble(value);
    out += "\n";
  }
  return out;
}

}  // namespace schedscope
