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
 * \file schedscope/analysis.hpp
 * \brief Full analysis pipeline producing immutable, content-addressed snapshots
 *  and their export documents.
 */
#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "schedscope/contours.hpp"
#include "schedscope/embedding.hpp"
#include "schedscope/features.hpp"
#include "schedscope/honeycomb.hpp"
#include "schedscope/loopview.hpp"
#include "schedscope/schedlog.hpp"

namespace schedscope {

struct AnalysisParams {
  uint64_t seed = 42;
  std::optional<int> capacity;  // default: DefaultCapacity(N) per task
  std::optional<int> k;         // fixed k; otherwise k_min..k_max by silhouette
  int k_min = 2;
  int k_max = 8;
  int levels = 5;

  std::string Canonical() const {
    return "seed=" + std::to_string(seed) + ";capacity=" + (capacity ? std::to_string(*capacity) : "auto") +
           ";k=" + (k ? std::to_string(*k) : "auto") + ";k_range=" + std::to_string(k_min) + ":" +
           std::to_string(k_max) + ";levels=" + std::to_string(levels);
  }

  Json ToJson() const {
    return {{"seed", seed},
            {"capacity", capacity ? Json(*capacity) : Json("auto")},
            {"k", k ? Json(*k) : Json("auto")},
            {"k_range", {k_min, k_max}},
            {"levels", levels}};
  }
};

/*! \brief Analysis of one task. Baseline records are the reference, not options. */
struct TaskAnalysis {
  std::string task_id;
  std::string name;
  std::vector<std::string> option_ids;  // non-baseline records, log order
  std::vector<FeatureVector> features;
  Embedding2D embedding;
  HoneycombLayout layout;
  ScalarField field;
  std::vector<double> levels;
  ContourSet contours;
  LoopViewSummary loopview;
  StageGraph stage_graph;
  int record_count = 0;
  double min_latency_ms = 0.0;
  double baseline_latency_ms = 0.0;
  bool has_options() const { return !option_ids.empty(); }
};

struct AnalysisSnapshot {
  std::string snapshot_id;
  std::string digest;
  AnalysisParams params;
  Dataset dataset;
  std::map<std::string, TaskAnalysis> tasks;
};

inline std::string DatasetDigest(const Dataset& dataset, const AnalysisParams& params) {
  Fnv1a hash;
  hash.Update(SerializeLog(dataset));
  hash.Update(SerializeMetrics(dataset.records));
  hash.Update(SerializeRegistry(dataset.registry));
  hash.Update(params.Canonical());
  return hash.Hex();
}

inline TaskAnalysis AnalyzeTask(const Dataset& dataset, const TaskDefinition& task, const AnalysisParams& params) {
  TaskAnalysis out;
  out.task_id = task.task_id;
  out.name = task.name;
  out.stage_graph = BuildStageGraph(task);

  std::vector<const MeasurementRecord*> options;
  std::map<std::string, const MeasurementRecord*> by_id;
  bool first = true;
  for (const MeasurementRecord* rec : dataset.RecordsOf(task.task_id)) {
    ++out.record_count;
    out.min_latency_ms = first ? rec->latency_ms : std::min(out.min_latency_ms, rec->latency_ms);
    first = false;
    by_id[rec->record_id] = rec;
    if (!rec->is_baseline) options.push_back(rec);
  }
  const MeasurementRecord* baseline = dataset.BaselineOf(task.task_id);
  if (baseline != nullptr) out.baseline_latency_ms = baseline->latency_ms;
  out.loopview = ClassifyLoopStrategies(task, options);
  if (options.empty()) return out;

  for (const MeasurementRecord* rec : options) {
    out.option_ids.push_back(rec->record_id);
    out.features.push_back(ExtractFeatures(*rec, task));
  }
  EmbedOptions embed_opts;
  embed_opts.seed = params.seed;
  embed_opts.fixed_k = params.k;
  embed_opts.k_min = params.k_min;
  embed_opts.k_max = params.k_max;
  out.embedding = Embed(out.features, embed_opts);

  std::vector<EmbeddedPoint> points;
  for (size_t i = 0; i < options.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    points.push_back({options[i]->record_id, out.embedding.coords(row, 0), out.embedding.coords(row, 1),
                      out.embedding.labels[i], options[i]->latency_ms});
  }
  const int capacity = params.capacity.value_or(DefaultCapacity(points.size()));
  out.layout = BuildHoneycomb(points, capacity);

  if (baseline == nullptr) throw Error(ErrorCode::kNoBaseline, task.task_id);
  out.field = ApplyGroupMeans(out.layout, CellGroupMeans(out.layout, by_id, dataset.registry, baseline));
  out.levels = DefaultLevels(out.field, params.levels);
  out.contours = ExtractContours(out.field, out.levels);
  return out;
}

/*! \brief Runs every analysis over a validated dataset. */
inline AnalysisSnapshot BuildSnapshot(Dataset dataset, const AnalysisParams& params) {
  AnalysisSnapshot snap;
  snap.params = params;
  snap.digest = DatasetDigest(dataset, params);
  snap.snapshot_id = "snap-" + snap.digest.substr(0, 12);
  for (const auto& [id, task] : dataset.tasks) snap.tasks.emplace(id, AnalyzeTask(dataset, task, params));
  snap.dataset = std::move(dataset);
  return snap;
}

/*!
 * \brief Re-checks the structural invariants of a finished snapshot; throws
 *  Error(kInternal) on the first violation.
 */
inline void CheckSnapshotInvariants(const AnalysisSnapshot& snap) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kInternal, what); };
  for (const auto& [id, ta] : snap.tasks) {
    if (!ta.has_options()) continue;
    std::map<std::string, int> seen;
    bool has_origin = false;
    for (const auto& cell : ta.layout.cells) {
      if (cell.member_ids.empty()) fail(id + ": empty cell");
      if (static_cast<int>(cell.member_ids.size()) > ta.layout.capacity) fail(id + ": cell over capacity");
      if (cell.coord == HexCoord{0, 0}) has_origin = true;
      for (const auto& m : cell.member_ids) ++seen[m];
    }
    if (!has_origin) fail(id + ": layout misses the origin cell");
    if (seen.size() != ta.option_ids.size()) fail(id + ": partition size mismatch");
    for (const auto& rid : ta.option_ids) {
      if (seen[rid] != 1) fail(id + ": record " + rid + " not in exactly one cell");
    }
    std::vector<int> used(ta.embedding.chosen_k, 0);
    for (int label : ta.embedding.labels) {
      if (label < 0 || label >= ta.embedding.chosen_k) fail(id + ": label out of range");
      ++used[label];
    }
    for (int u : used) {
      if (u == 0) fail(id + ": unused cluster label");
    }
  }
}

// ---------------------------------------------------------------------------
// Export documents
// ---------------------------------------------------------------------------

inline Json TaskListJson(const AnalysisSnapshot& snap) {
  std::vector<const TaskAnalysis*> order;
  for (const auto& [id, ta] : snap.tasks) order.push_back(&ta);
  // Worst task first.
  std::stable_sort(order.begin(), order.end(), [](const TaskAnalysis* a, const TaskAnalysis* b) {
    return a->min_latency_ms > b->min_latency_ms;
  });
  Json tasks = Json::array();
  for (const TaskAnalysis* ta : order) {
    tasks.push_back({{"task_id", ta->task_id},
                     {"name", ta->name},
                     {"record_count", ta->record_count},
                     {"option_count", ta->option_ids.size()},
                     {"min_latency_ms", ta->min_latency_ms},
                     {"baseline_latency_ms", ta->baseline_latency_ms},
                     {"chosen_k", ta->embedding.chosen_k},
                     {"cell_count", ta->layout.cells.size()}});
  }
  return {{"snapshot_id", snap.snapshot_id}, {"tasks", tasks}};
}

inline Json HoneycombDocument(const AnalysisSnapshot& snap, const TaskAnalysis& ta) {
  Json doc = LayoutToJson(ta.layout);
  doc["snapshot_id"] = snap.snapshot_id;
  doc["task_id"] = ta.task_id;
  doc["chosen_k"] = ta.embedding.chosen_k;
  doc["explained_variance"] = {ta.embedding.explained[0], ta.embedding.explained[1]};
  return doc;
}

inline Json ContoursDocument(const AnalysisSnapshot& snap, const TaskAnalysis& ta) {
  Json doc = ContoursToJson(ta.contours);
  doc["snapshot_id"] = snap.snapshot_id;
  doc["task_id"] = ta.task_id;
  doc["levels"] = ta.levels;
  return doc;
}

inline Json LoopViewDocument(const AnalysisSnapshot& snap, const TaskAnalysis& ta) {
  Json doc = LoopViewToJson(ta.loopview);
  doc["snapshot_id"] = snap.snapshot_id;
  doc["task_id"] = ta.task_id;
  return doc;
}

inline Json StageGraphDocument(const AnalysisSnapshot& snap, const TaskAnalysis& ta) {
  Json doc = StageGraphToJson(ta.stage_graph);
  doc["snapshot_id"] = snap.snapshot_id;
  doc["task_id"] = ta.task_id;
  return doc;
}

inline Json RecordDocument(const AnalysisSnapshot& snap, const MeasurementRecord& rec) {
  Json doc = RecordToJson(rec);
  doc.erase("kind");
  doc["snapshot_id"] = snap.snapshot_id;
  doc["metrics"] = rec.metrics;
  auto it = snap.tasks.find(rec.task_id);
  if (it != snap.tasks.end()) {
    const TaskAnalysis& ta = it->second;
    for (size_t i = 0; i < ta.option_ids.size(); ++i) {
      if (ta.option_ids[i] != rec.record_id) continue;
      Json features = Json::object();
      for (int f = 0; f < kNumFeatures; ++f) features[kFeatureSchema[f]] = ta.features[i][f];
      doc["features"] = features;
      const auto row = static_cast<Eigen::Index>(i);
      doc["embedding"] = {{"x", ta.embedding.coords(row, 0)},
                          {"y", ta.embedding.coords(row, 1)},
                          {"label", ta.embedding.labels[i]}};
    }
    if (const HexCell* cell = ta.layout.CellOf(rec.record_id)) doc["cell"] = CoordToJson(cell->coord);
  }
  return doc;
}

inline Json SnapshotDocument(const AnalysisSnapshot& snap) {
  return {{"snapshot_id", snap.snapshot_id},
          {"digest", snap.digest},
          {"parameters", snap.params.ToJson()},
          {"tasks", TaskListJson(snap)["tasks"]}};
}

/*! \brief File-system safe directory name for a task id. */
inline std::string TaskDirName(const std::string& task_id) {
  std::string out;
  for (char c : task_id) {
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
  }
  return out.empty() || out == "." || out == ".." ? "_" + out : out;
}

inline void WriteTextFile(const std::filesystem::path& path, const std::string& content) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error(ErrorCode::kInternal, path.string(), "cannot open for writing");
  file << content;
  if (!file) throw Error(ErrorCode::kInternal, path.string(), "write failed");
}

/*! \brief Writes every export document of the snapshot under `out_dir`. */
inline std::vector<std::filesystem::path> WriteExports(const AnalysisSnapshot& snap,
                                                       const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  std::vector<fs::path> written;
  fs::create_directories(out_dir);
  auto put = [&](const fs::path& path, const std::string& content) {
    WriteTextFile(path, content);
    written.push_back(path);
  };
  put(out_dir / "snapshot.json", SnapshotDocument(snap).dump(2) + "\n");
  put(out_dir / "tasks.json", TaskListJson(snap).dump(2) + "\n");
  for (const auto& [id, ta] : snap.tasks) {
    fs::path dir = out_dir / TaskDirName(id);
    fs::create_directories(dir);
    put(dir / "features.csv", FeatureCsv(ta.features));
    put(dir / "embedding.csv", EmbeddingCsv(ta.embedding));
    put(dir / "honeycomb.json", HoneycombDocument(snap, ta).dump(2) + "\n");
    put(dir / "contours.json", ContoursDocument(snap, ta).dump(2) + "\n");
    put(dir / "loopview.json", LoopViewDocument(snap, ta).dump(2) + "\n");
    put(dir / "stagegraph.json", StageGraphDocument(snap, ta).dump(2) + "\n");
    put(dir / "honeycomb.svg", RenderSvg(ta.layout, ta.contours));
  }
  return written;
}

}  // namespace schedscope
