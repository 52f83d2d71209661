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

// Shared builders for test datasets.
#pragma once

#include <string>
#include <vector>

#include "schedscope/schedlog.hpp"

namespace schedscope::testing {

inline StageDef MakeStage(int index, const std::string& op, std::vector<LoopDef> loops, ArithCounts arith = {}) {
  StageDef stage;
  stage.stage_index = index;
  stage.op_kind = OpKind::FromString(op);
  stage.loops = std::move(loops);
  stage.arith_counts = arith;
  return stage;
}

inline TaskDefinition MakeTask(const std::string& id, std::vector<StageDef> stages,
                               std::vector<std::pair<int, int>> edges = {}) {
  TaskDefinition task;
  task.task_id = id;
  task.name = id + "_name";
  task.stages = std::move(stages);
  task.read_edges = std::move(edges);
  return task;
}

inline MeasurementRecord MakeRecord(const std::string& id, const std::string& task_id, double latency,
                                    std::vector<TransformStep> steps = {}, bool baseline = false) {
  MeasurementRecord rec;
  rec.record_id = id;
  rec.task_id = task_id;
  rec.latency_ms = latency;
  rec.steps = std::move(steps);
  rec.is_baseline = baseline;
  return rec;
}

/*!
 * Stage 0 is a bgemm with reduction loop k; stages 1..5 are elementwise adds
 * over (i, j), chained.
 */
inline TaskDefinition BgemmChainTask() {
  std::vector<StageDef> stages;
  stages.push_back(MakeStage(0, "bgemm",
                             {{"b", 16, LoopKind::kSpatial},
                              {"i", 64, LoopKind::kSpatial},
                              {"j", 64, LoopKind::kSpatial},
                              {"k", 64, LoopKind::kReduction}},
                             ArithCounts{0, 0, 0, 1, 0}));
  std::vector<std::pair<int, int>> edges;
  for (int s = 1; s <= 5; ++s) {
    stages.push_back(MakeStage(s, "add", {{"i", 256, LoopKind::kSpatial}, {"j", 64, LoopKind::kSpatial}},
                               ArithCounts{1, 0, 0, 0, 0}));
    edges.emplace_back(s - 1, s);
  }
  return MakeTask("bgemm_block", std::move(stages), std::move(edges));
}

inline std::string TaskLine(const TaskDefinition& task) { return TaskToJson(task).dump(); }
inline std::string RecordLine(const MeasurementRecord& rec) { return RecordToJson(rec).dump(); }

}  // namespace schedscope::testing
