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
 * \file schedscope/synth.hpp
 * \brief Synthetic tuning logs with planted cluster structure.
 *
 * Every record of cluster c follows a step template with cluster-specific
 * thread tile, reduction split, vectorize length and annotation pattern. The
 * thread tile is jittered log-normally, which spreads the features inside a
 * cluster; the jitter is halved until the planted clusters are separated by at
 * least `cluster_separation` times their RMS radius in standardized feature space.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "schedscope/features.hpp"
#include "schedscope/schedlog.hpp"

namespace schedscope {

inline constexpr int kMaxSynthClusters = 6;

struct SynthSpec {
  int n_tasks = 1;
  int stages_per_task = 3;
  int n_records = 600;  // non-baseline records, over all tasks
  int n_clusters = 3;
  double cluster_separation = 10.0;
  double noise = 0.1;
  // cluster -> (mean_ms, stddev_ms); clusters not listed use
  // (1 + 0.5 c, noise).
  std::map<int, std::pair<double, double>> latency_model;
  // group -> per-cluster mean improvement; missing entries use 0.3 for the
  // cluster's favored group (c mod 3) and 0.05 otherwise.
  std::map<MetricGroup, std::vector<double>> metric_model;
  uint64_t seed = 42;
};

struct SynthOutput {
  std::string log;
  std::string metrics;
  std::string registry;
  std::vector<std::pair<std::string, int>> planted_labels;  // non-baseline records, in log order
  double jitter = 0.0;            // log-normal jitter actually used
  double achieved_separation = 0.0;  // min over tasks of center distance / RMS radius

  std::string PlantedCsv() const {
    std::string out = "record_id,label\n";
    for (const auto& [id, label] : planted_labels) out += id + "," + std::to_string(label) + "\n";
    return out;
  }
};

inline MetricRegistry SynthRegistry() {
  MetricRegistry registry;
  registry.entries = {
      {"dram_read_bytes", {MetricGroup::kDram, MetricDirection::kLowerIsBetter}},
      {"dram_throughput", {MetricGroup::kDram, MetricDirection::kHigherIsBetter}},
      {"sm_efficiency", {MetricGroup::kSm, MetricDirection::kHigherIsBetter}},
      {"sm_warp_stall_cycles", {MetricGroup::kSm, MetricDirection::kLowerIsBetter}},
      {"gpu_achieved_occupancy", {MetricGroup::kGpu, MetricDirection::kHigherIsBetter}},
      {"gpu_time_ns", {MetricGroup::kGpu, MetricDirection::kLowerIsBetter}},
  };
  return registry;
}

inline void ValidateSynthSpec(const SynthSpec& spec) {
  auto bad = [](const std::string& why) { return Error(ErrorCode::kInvalidSpec, "synth", why); };
  if (spec.n_tasks < 1) throw bad("n_tasks must be >= 1");
  if (spec.stages_per_task < 1) throw bad("stages_per_task must be >= 1");
  if (spec.n_records < 0) throw bad("n_records must be >= 0");
  if (spec.n_clusters < 1 || spec.n_clusters > kMaxSynthClusters) {
    throw bad("n_clusters must be in [1, " + std::to_string(kMaxSynthClusters) + "]");
  }
  if (!(spec.cluster_separation > 0.0)) throw bad("cluster_separation must be > 0");
  if (!(spec.noise >= 0.0)) throw bad("noise must be >= 0");
  for (const auto& [c, model] : spec.latency_model) {
    if (!(model.first > 0.0) || !(model.second >= 0.0)) throw bad("latency model needs mean > 0, stddev >= 0");
  }
  for (const auto& [g, means] : spec.metric_model) {
    for (double m : means) {
      if (!(std::abs(m) < 0.9)) throw bad("metric improvement means must lie in (-0.9, 0.9)");
    }
  }
}

namespace detail {

inline TaskDefinition SynthTask(int t, int stages) {
  TaskDefinition task;
  task.task_id = "task" + std::to_string(t);
  task.name = "fused_bgemm_" + std::to_string(t);
  StageDef bgemm;
  bgemm.stage_index = 0;
  bgemm.op_kind = OpKind::FromString("bgemm");
  bgemm.loops = {{"b", 16, LoopKind::kSpatial},
                 {"i", 1000, LoopKind::kSpatial},
                 {"j", 64, LoopKind::kSpatial},
                 {"k", 192, LoopKind::kReduction}};
  bgemm.arith_counts.fma = 1;
  task.stages.push_back(bgemm);
  for (int s = 1; s < stages; ++s) {
    StageDef ew;
    ew.stage_index = s;
    ew.op_kind = OpKind::FromString(s % 2 == 1 ? "add" : "relu");
    ew.loops = {{"i", 1000, LoopKind::kSpatial}, {"j", 64, LoopKind::kSpatial}};
    if (s % 2 == 1) {
      ew.arith_counts.add = 1;
    } else {
      ew.arith_counts.special = 1;
    }
    task.stages.push_back(ew);
    task.read_edges.emplace_back(s - 1, s);
  }
  return task;
}

inline std::vector<TransformStep> SynthSteps(int cluster, int stages, int64_t thread_tile) {
  const int64_t reduce_factor = int64_t{2} << cluster;           // 2, 4, 8, ...
  const int64_t vector_len = int64_t{64} >> std::min(cluster, 5);  // 64, 32, 16, ...
  std::vector<TransformStep> steps;
  steps.push_back(SplitStep{0, "i", {thread_tile}});
  steps.push_back(BindStep{0, "i.0", BindAxis::kBlockX});
  steps.push_back(BindStep{0, "i.1", BindAxis::kThreadX});
  steps.push_back(SplitStep{0, "k", {reduce_factor}});
  steps.push_back(SplitStep{0, "j", {vector_len}});
  steps.push_back(AnnotateStep{0, "j.1", AnnotationKind::kVectorize, vector_len});
  if (cluster % 2 == 1) steps.push_back(AnnotateStep{0, "k.1", AnnotationKind::kUnroll, reduce_factor});
  if (cluster % 3 == 2) steps.push_back(CacheReadStep{0, "shared"});
  if (cluster % 2 == 0) steps.push_back(BindStep{0, "b", BindAxis::kBlockY});
  for (int s = 1; s < stages; ++s) {
    if (cluster % 3 == 1) steps.push_back(ComputeAtStep{s, 0, "i.0"});
    steps.push_back(AnnotateStep{s, "j", AnnotationKind::kVectorize, vector_len});
    if (cluster % 2 == 0) steps.push_back(AnnotateStep{s, "i", AnnotationKind::kParallel, 1});
  }
  return steps;
}

/*! \brief min center distance / max RMS radius of planted clusters in z-space. */
inline double PlantedSeparation(const std::vector<FeatureVector>& features, const std::vector<int>& labels) {
  if (features.size() < 2) return std::numeric_limits<double>::infinity();
  Eigen::MatrixXd z = Standardize(FeatureMatrix(features)).values;
  std::map<int, std::pair<Eigen::VectorXd, int>> centers;
  for (size_t i = 0; i < labels.size(); ++i) {
    auto [it, fresh] = centers.try_emplace(labels[i], Eigen::VectorXd::Zero(z.cols()), 0);
    it->second.first += z.row(static_cast<Eigen::Index>(i)).transpose();
    ++it->second.second;
  }
  if (centers.size() < 2) return std::numeric_limits<double>::infinity();
  for (auto& [c, acc] : centers) acc.first /= acc.second;
  std::map<int, double> sq_radius;
  for (size_t i = 0; i < labels.size(); ++i) {
    sq_radius[labels[i]] += (z.row(static_cast<Eigen::Index>(i)).transpose() - centers[labels[i]].first).squaredNorm();
  }
  double max_radius = 0.0;
  for (auto& [c, sq] : sq_radius) max_radius = std::max(max_radius, std::sqrt(sq / centers[c].second));
  double min_dist = std::numeric_limits<double>::infinity();
  for (auto a = centers.begin(); a != centers.end(); ++a) {
    for (auto b = std::next(a); b != centers.end(); ++b) {
      min_dist = std::min(min_dist, (a->second.first - b->second.first).norm());
    }
  }
  return max_radius > 0.0 ? min_dist / max_radius : std::numeric_limits<double>::infinity();
}

}  // namespace detail

/*! \brief Generates a log, metrics table and registry. Deterministic in `spec.seed`. */
inline SynthOutput Generate(const SynthSpec& spec) {
  ValidateSynthSpec(spec);
  const MetricRegistry registry = SynthRegistry();
  std::vector<TaskDefinition> tasks;
  for (int t = 0; t < spec.n_tasks; ++t) tasks.push_back(detail::SynthTask(t, spec.stages_per_task));

  auto latency_of = [&](int c) {
    auto it = spec.latency_model.find(c);
    return it != spec.latency_model.end() ? it->second : std::pair<double, double>{1.0 + 0.5 * c, spec.noise};
  };
  auto improvement_mean = [&](MetricGroup g, int c) {
    auto it = spec.metric_model.find(g);
    if (it != spec.metric_model.end() && c < static_cast<int>(it->second.size())) return it->second[c];
    return static_cast<int>(g) == c % 3 ? 0.3 : 0.05;
  };
  double max_mean = 0.0;
  for (int c = 0; c < spec.n_clusters; ++c) max_mean = std::max(max_mean, latency_of(c).first);

  const int width = std::max(4, static_cast<int>(std::to_string(spec.n_records).size()));
  auto attempt = [&](double jitter) {
    Rng rng(spec.seed);
    ParsedLog log;
    log.tasks = tasks;
    SynthOutput out;
    out.jitter = jitter;
    for (int t = 0; t < spec.n_tasks; ++t) {
      MeasurementRecord base;
      base.record_id = tasks[t].task_id + "-base";
      base.task_id = tasks[t].task_id;
      base.is_baseline = true;
      base.latency_ms = 2.0 * max_mean;
      for (const auto& [name, info] : registry.entries) base.metrics[name] = 100.0;
      log.records.push_back(std::move(base));
    }
    std::map<int, std::vector<FeatureVector>> features;
    std::map<int, std::vector<int>> labels;
    for (int i = 0; i < spec.n_records; ++i) {
      const int t = i % spec.n_tasks;
      const int c = (i / spec.n_tasks) % spec.n_clusters;
      char id[32];
      std::snprintf(id, sizeof(id), "r%0*d", width, i + 1);
      MeasurementRecord rec;
      rec.record_id = id;
      rec.task_id = tasks[t].task_id;
      const double base_tile = static_cast<double>(int64_t{16} << c);
      const int64_t tile =
          std::max<int64_t>(1, std::llround(base_tile * std::exp(jitter * rng.Normal())));
      rec.steps = detail::SynthSteps(c, spec.stages_per_task, tile);
      auto [mean, sd] = latency_of(c);
      rec.latency_ms = std::max(0.05 * mean, mean + sd * rng.Normal());
      for (const auto& [name, info] : registry.entries) {
        double imp = improvement_mean(info.group, c) + 0.2 * spec.noise * rng.Normal();
        imp = std::clamp(imp, -0.9, 0.9);
        rec.metrics[name] =
            100.0 * (info.direction == MetricDirection::kHigherIsBetter ? 1.0 + imp : 1.0 - imp);
      }
      features[t].push_back(ExtractFeatures(rec, tasks[t]));
      labels[t].push_back(c);
      out.planted_labels.emplace_back(rec.record_id, c);
      log.records.push_back(std::move(rec));
    }
    out.achieved_separation = std::numeric_limits<double>::infinity();
    for (const auto& [t, fv] : features) {
      out.achieved_separation = std::min(out.achieved_separation, detail::PlantedSeparation(fv, labels[t]));
    }
    out.log = SerializeLog(log);
    out.metrics = SerializeMetrics(log.records);
    out.registry = SerializeRegistry(registry);
    return out;
  };

  double jitter = spec.noise;
  SynthOutput out = attempt(jitter);
  for (int round = 0; round < 30 && out.achieved_separation < spec.cluster_separation; ++round) {
    jitter = round == 29 ? 0.0 : jitter / 2.0;
    out = attempt(jitter);
  }
  return out;
}

}  // namespace schedscope
