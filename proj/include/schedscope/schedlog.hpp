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
 * \file schedscope/schedlog.hpp
 * \brief Dataset model for tuning logs: tasks, stages, loops, transform steps
 *  and measurement records, plus the line-oriented log and CSV readers.
 */
#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"
#include "schedscope/common.hpp"

namespace schedscope {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Task / stage / loop definitions
// ---------------------------------------------------------------------------

enum class LoopKind { kSpatial, kReduction };

inline const char* ToString(LoopKind kind) {
  return kind == LoopKind::kSpatial ? "spatial" : "reduction";
}

/*! \brief Operator kind of a stage; anything unrecognised is kept by name. */
struct OpKind {
  enum Tag { kConv2d, kBgemm, kMatmul, kAdd, kRelu, kPool, kOther };

  Tag tag = kOther;
  std::string name;  // canonical spelling, also the payload of kOther

  static OpKind FromString(const std::string& text) {
    static const std::pair<const char*, Tag> known[] = {
        {"conv2d", kConv2d}, {"bgemm", kBgemm}, {"matmul", kMatmul},
        {"add", kAdd},       {"relu", kRelu},   {"pool", kPool}};
    for (const auto& [spelling, tag] : known) {
      if (text == spelling) return OpKind{tag, text};
    }
    return OpKind{kOther, text};
  }

  bool operator==(const OpKind&) const = default;
};

/*! \brief Operation counts per innermost iteration. */
struct ArithCounts {
  int64_t add = 0;
  int64_t mul = 0;
  int64_t div = 0;
  int64_t fma = 0;
  int64_t special = 0;

  bool operator==(const ArithCounts&) const = default;
};

struct LoopDef {
  std::string loop_id;
  int64_t extent = 1;
  LoopKind kind = LoopKind::kSpatial;

  bool operator==(const LoopDef&) const = default;
};

struct StageDef {
  int stage_index = 0;
  OpKind op_kind;
  std::vector<LoopDef> loops;
  ArithCounts arith_counts;

  bool operator==(const StageDef&) const = default;
};

struct TaskDefinition {
  std::string task_id;
  std::string name;
  std::vector<StageDef> stages;
  // (producer stage_index, consumer stage_index)
  std::vector<std::pair<int, int>> read_edges;

  bool operator==(const TaskDefinition&) const = default;

  const StageDef* FindStage(int stage_index) const {
    if (stage_index < 0 || stage_index >= static_cast<int>(stages.size())) return nullptr;
    return &stages[stage_index];
  }
};

// ---------------------------------------------------------------------------
// Transform steps
// ---------------------------------------------------------------------------

enum class AnnotationKind { kVectorize, kUnroll, kParallel };

inline const char* ToString(AnnotationKind kind) {
  switch (kind) {
    case AnnotationKind::kVectorize: return "vectorize";
    case AnnotationKind::kUnroll: return "unroll";
    case AnnotationKind::kParallel: return "parallel";
  }
  return "?";
}

inline std::optional<AnnotationKind> AnnotationKindFromString(const std::string& text) {
  if (text == "vectorize") return AnnotationKind::kVectorize;
  if (text == "unroll") return AnnotationKind::kUnroll;
  if (text == "parallel") return AnnotationKind::kParallel;
  return std::nullopt;
}

enum class BindAxis { kBlockX, kBlockY, kBlockZ, kThreadX, kThreadY, kThreadZ };

inline const char* ToString(BindAxis axis) {
  switch (axis) {
    case BindAxis::kBlockX: return "blockIdx.x";
    case BindAxis::kBlockY: return "blockIdx.y";
    case BindAxis::kBlockZ: return "blockIdx.z";
    case BindAxis::kThreadX: return "threadIdx.x";
    case BindAxis::kThreadY: return "threadIdx.y";
    case BindAxis::kThreadZ: return "threadIdx.z";
  }
  return "?";
}

inline std::optional<BindAxis> BindAxisFromString(const std::string& text) {
  for (BindAxis axis : {BindAxis::kBlockX, BindAxis::kBlockY, BindAxis::kBlockZ,
                        BindAxis::kThreadX, BindAxis::kThreadY, BindAxis::kThreadZ}) {
    if (text == ToString(axis)) return axis;
  }
  return std::nullopt;
}

inline bool IsThreadAxis(BindAxis axis) {
  return axis == BindAxis::kThreadX || axis == BindAxis::kThreadY || axis == BindAxis::kThreadZ;
}

struct SplitStep {
  int stage_index = 0;
  std::string loop_id;
  std::vector<int64_t> factors;
  bool operator==(const SplitStep&) const = default;
};

struct ReorderStep {
  int stage_index = 0;
  std::vector<std::string> permutation;
  bool operator==(const ReorderStep&) const = default;
};

struct FuseStep {
  int stage_index = 0;
  std::vector<std::string> loop_ids;
  bool operator==(const FuseStep&) const = default;
};

struct AnnotateStep {
  int stage_index = 0;
  std::string loop_id;
  AnnotationKind kind = AnnotationKind::kUnroll;
  int64_t factor = 1;
  bool operator==(const AnnotateStep&) const = default;
};

struct BindStep {
  int stage_index = 0;
  std::string loop_id;
  BindAxis axis = BindAxis::kThreadX;
  bool operator==(const BindStep&) const = default;
};

struct ComputeAtStep {
  int stage_index = 0;
  int target_stage_index = 0;
  std::string target_loop_id;
  bool operator==(const ComputeAtStep&) const = default;
};

struct CacheReadStep {
  int stage_index = 0;
  std::string scope;
  bool operator==(const CacheReadStep&) const = default;
};

struct CacheWriteStep {
  int stage_index = 0;
  std::string scope;
  bool operator==(const CacheWriteStep&) const = default;
};

using TransformStep = std::variant<SplitStep, ReorderStep, FuseStep, AnnotateStep, BindStep,
                                   ComputeAtStep, CacheReadStep, CacheWriteStep>;

inline int StepStage(const TransformStep& step) {
  return std::visit([](const auto& s) { return s.stage_index; }, step);
}

/*! \brief Wire name of the step ("split", "annotate", ...). */
inline const char* StepOpName(const TransformStep& step) {
  static const char* names[] = {"split", "reorder",    "fuse",       "annotate",
                                "bind",  "compute_at", "cache_read", "cache_write"};
  return names[step.index()];
}

// ---------------------------------------------------------------------------
// Records, metrics and the dataset
// ---------------------------------------------------------------------------

struct MeasurementRecord {
  std::string record_id;
  std::string task_id;
  std::vector<TransformStep> steps;
  double latency_ms = 0.0;
  bool is_baseline = false;
  std::map<std::string, double> metrics;

  bool operator==(const MeasurementRecord&) const = default;
};

enum class MetricGroup { kDram = 0, kSm = 1, kGpu = 2 };

inline constexpr MetricGroup kAllGroups[] = {MetricGroup::kDram, MetricGroup::kSm,
                                             MetricGroup::kGpu};

inline const char* ToString(MetricGroup group) {
  switch (group) {
    case MetricGroup::kDram: return "DRAM";
    case MetricGroup::kSm: return "SM";
    case MetricGroup::kGpu: return "GPU";
  }
  return "?";
}

enum class MetricDirection { kHigherIsBetter, kLowerIsBetter };

struct MetricInfo {
  MetricGroup group = MetricGroup::kGpu;
  MetricDirection direction = MetricDirection::kHigherIsBetter;
  bool operator==(const MetricInfo&) const = default;
};

struct MetricRegistry {
  std::map<std::string, MetricInfo> entries;

  bool Contains(const std::string& name) const { return entries.count(name) != 0; }
  bool operator==(const MetricRegistry&) const = default;
};

/*! \brief Tasks and records in input order, as read from one log. */
struct ParsedLog {
  std::vector<TaskDefinition> tasks;
  std::vector<MeasurementRecord> records;
};

struct Dataset {
  std::map<std::string, TaskDefinition> tasks;
  std::vector<MeasurementRecord> records;
  MetricRegistry registry;

  bool operator==(const Dataset&) const = default;

  const TaskDefinition* FindTask(const std::string& task_id) const {
    auto it = tasks.find(task_id);
    return it == tasks.end() ? nullptr : &it->second;
  }

  const MeasurementRecord* FindRecord(const std::string& record_id) const {
    for (const auto& rec : records) {
      if (rec.record_id == record_id) return &rec;
    }
    return nullptr;
  }

  std::vector<const MeasurementRecord*> RecordsOf(const std::string& task_id) const {
    std::vector<const MeasurementRecord*> out;
    for (const auto& rec : records) {
      if (rec.task_id == task_id) out.push_back(&rec);
    }
    return out;
  }

  /*! \brief First baseline record of the task, or nullptr. */
  const MeasurementRecord* BaselineOf(const std::string& task_id) const {
    for (const auto& rec : records) {
      if (rec.task_id == task_id && rec.is_baseline) return &rec;
    }
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// Step application
// ---------------------------------------------------------------------------

/*! \brief An annotation or thread binding attached to a transformed loop. */
struct LoopMark {
  bool is_bind = false;
  AnnotationKind annotation = AnnotationKind::kUnroll;
  int64_t factor = 0;
  BindAxis axis = BindAxis::kThreadX;

  std::string Label() const {
    return is_bind ? std::string("bind:") + ToString(axis) : std::string(ToString(annotation));
  }
  bool operator==(const LoopMark&) const = default;
};

struct TransformedLoop {
  std::string loop_id;
  int64_t extent = 1;
  LoopKind kind = LoopKind::kSpatial;
  std::vector<LoopMark> marks;  // in order of application

  /*! \brief Axis of the most recent Bind on this loop, if any. */
  std::optional<BindAxis> bind_axis() const {
    for (auto it = marks.rbegin(); it != marks.rend(); ++it) {
      if (it->is_bind) return it->axis;
    }
    return std::nullopt;
  }
};

struct TransformedLoopNest {
  int stage_index = 0;
  std::vector<TransformedLoop> loops;
  std::vector<ComputeAtStep> attachments;
  std::vector<std::string> cache_read_scopes;
  std::vector<std::string> cache_write_scopes;

  int64_t TripCount() const {
    int64_t total = 1;
    for (const auto& loop : loops) total *= loop.extent;
    return total;
  }

  int FindLoop(const std::string& loop_id) const {
    for (size_t i = 0; i < loops.size(); ++i) {
      if (loops[i].loop_id == loop_id) return static_cast<int>(i);
    }
    return -1;
  }
};

namespace detail {

inline TransformedLoopNest InitialNest(const StageDef& stage) {
  TransformedLoopNest nest;
  nest.stage_index = stage.stage_index;
  for (const auto& loop : stage.loops) {
    nest.loops.push_back(TransformedLoop{loop.loop_id, loop.extent, loop.kind, {}});
  }
  return nest;
}

[[noreturn]] inline void Dangling(const std::string& what) {
  throw Error(ErrorCode::kInvalidStep, what, "dangling or invalid reference");
}

inline int RequireLoop(const TransformedLoopNest& nest, const std::string& loop_id) {
  int pos = nest.FindLoop(loop_id);
  if (pos < 0) {
    Dangling("stage " + std::to_string(nest.stage_index) + " loop '" + loop_id + "'");
  }
  return pos;
}

/*!
 * \brief Applies one step to the nest of its own stage.
 *
 * Split of extent E by factors [f1..fn] yields loops [ceil(E / prod f), f1, ..., fn]
 * named `<id>.0 .. <id>.n`; marks already on the split loop move to the innermost
 * part. Fuse requires contiguous loops of one kind, in nest order, and yields
 * `<a>+<b>+...` carrying the concatenated marks.
 */
inline void ApplyLocal(TransformedLoopNest& nest, const TransformStep& step) {
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SplitStep>) {
          int pos = RequireLoop(nest, s.loop_id);
          if (s.factors.empty()) Dangling("split of '" + s.loop_id + "' has no factors");
          int64_t inner = 1;
          for (int64_t f : s.factors) {
            if (f < 1) Dangling("split factor < 1 on '" + s.loop_id + "'");
            inner *= f;
          }
          TransformedLoop original = nest.loops[pos];
          std::vector<TransformedLoop> parts;
          parts.push_back({original.loop_id + ".0", (original.extent + inner - 1) / inner,
                           original.kind, {}});
          for (size_t i = 0; i < s.factors.size(); ++i) {
            parts.push_back(
                {original.loop_id + "." + std::to_string(i + 1), s.factors[i], original.kind, {}});
          }
          parts.back().marks = original.marks;
          for (const auto& part : parts) {
            if (nest.FindLoop(part.loop_id) >= 0) Dangling("split creates duplicate '" + part.loop_id + "'");
          }
          nest.loops.erase(nest.loops.begin() + pos);
          nest.loops.insert(nest.loops.begin() + pos, parts.begin(), parts.end());
        } else if constexpr (std::is_same_v<T, ReorderStep>) {
          if (s.permutation.size() != nest.loops.size()) Dangling("reorder is not a permutation");
          std::vector<TransformedLoop> reordered;
          std::set<std::string> seen;
          for (const auto& id : s.permutation) {
            if (!seen.insert(id).second) Dangling("reorder repeats '" + id + "'");
            reordered.push_back(nest.loops[RequireLoop(nest, id)]);
          }
          nest.loops = std::move(reordered);
        } else if constexpr (std::is_same_v<T, FuseStep>) {
          if (s.loop_ids.size() < 2) Dangling("fuse needs at least two loops");
          int first = RequireLoop(nest, s.loop_ids.front());
          TransformedLoop fused = nest.loops[first];
          for (size_t i = 1; i < s.loop_ids.size(); ++i) {
            int pos = RequireLoop(nest, s.loop_ids[i]);
            if (pos != first + static_cast<int>(i)) Dangling("fuse of non-contiguous loops");
            const auto& next = nest.loops[pos];
            if (next.kind != fused.kind) Dangling("fuse of spatial and reduction loops");
            fused.loop_id += "+" + next.loop_id;
            fused.extent *= next.extent;
            fused.marks.insert(fused.marks.end(), next.marks.begin(), next.marks.end());
          }
          nest.loops.erase(nest.loops.begin() + first,
                           nest.loops.begin() + first + static_cast<int>(s.loop_ids.size()));
          nest.loops.insert(nest.loops.begin() + first, fused);
        } else if constexpr (std::is_same_v<T, AnnotateStep>) {
          int pos = RequireLoop(nest, s.loop_id);
          if (s.factor < 1) Dangling("annotation factor < 1 on '" + s.loop_id + "'");
          LoopMark mark;
          mark.annotation = s.kind;
          mark.factor = s.factor;
          nest.loops[pos].marks.push_back(mark);
        } else if constexpr (std::is_same_v<T, BindStep>) {
          int pos = RequireLoop(nest, s.loop_id);
          LoopMark mark;
          mark.is_bind = true;
          mark.axis = s.axis;
          nest.loops[pos].marks.push_back(mark);
        } else if constexpr (std::is_same_v<T, ComputeAtStep>) {
          if (s.target_stage_index == s.stage_index) Dangling("compute_at targets its own stage");
          nest.attachments.push_back(s);
        } else if constexpr (std::is_same_v<T, CacheReadStep>) {
          nest.cache_read_scopes.push_back(s.scope);
        } else if constexpr (std::is_same_v<T, CacheWriteStep>) {
          nest.cache_write_scopes.push_back(s.scope);
        }
      },
      step);
}

}  // namespace detail

/*!
 * \brief Applies steps that all target `stage` and returns the resulting loop nest.
 *
 * ComputeAt targets in other stages cannot be checked here; ApplyRecordSteps
 * validates them against the target stage's nest at the time of application.
 */
inline TransformedLoopNest ApplySteps(const StageDef& stage, std::span<const TransformStep> steps) {
  TransformedLoopNest nest = detail::InitialNest(stage);
  for (const auto& step : steps) {
    if (StepStage(step) != stage.stage_index) {
      detail::Dangling("step for stage " + std::to_string(StepStage(step)) +
                       " applied to stage " + std::to_string(stage.stage_index));
    }
    detail::ApplyLocal(nest, step);
  }
  return nest;
}

/*! \brief Applies a record's full step list; one nest per stage, indexed by stage_index. */
inline std::vector<TransformedLoopNest> ApplyRecordSteps(const TaskDefinition& task,
                                                         std::span<const TransformStep> steps) {
  std::vector<TransformedLoopNest> nests;
  nests.reserve(task.stages.size());
  for (const auto& stage : task.stages) nests.push_back(detail::InitialNest(stage));
  for (const auto& step : steps) {
    int stage = StepStage(step);
    if (stage < 0 || stage >= static_cast<int>(nests.size())) {
      detail::Dangling("stage " + std::to_string(stage));
    }
    if (const auto* at = std::get_if<ComputeAtStep>(&step)) {
      int target = at->target_stage_index;
      if (target < 0 || target >= static_cast<int>(nests.size())) {
        detail::Dangling("compute_at target stage " + std::to_string(target));
      }
      detail::RequireLoop(nests[target], at->target_loop_id);
    }
    detail::ApplyLocal(nests[stage], step);
  }
  return nests;
}

// ---------------------------------------------------------------------------
// JSON documents
// ---------------------------------------------------------------------------

inline Json StepToJson(const TransformStep& step) {
  Json j;
  j["op"] = StepOpName(step);
  j["stage"] = StepStage(step);
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SplitStep>) {
          j["loop"] = s.loop_id;
          j["factors"] = s.factors;
        } else if constexpr (std::is_same_v<T, ReorderStep>) {
          j["order"] = s.permutation;
        } else if constexpr (std::is_same_v<T, FuseStep>) {
          j["loops"] = s.loop_ids;
        } else if constexpr (std::is_same_v<T, AnnotateStep>) {
          j["loop"] = s.loop_id;
          j["ann"] = ToString(s.kind);
          j["factor"] = s.factor;
        } else if constexpr (std::is_same_v<T, BindStep>) {
          j["loop"] = s.loop_id;
          j["axis"] = ToString(s.axis);
        } else if constexpr (std::is_same_v<T, ComputeAtStep>) {
          j["target_stage"] = s.target_stage_index;
          j["target_loop"] = s.target_loop_id;
        } else {
          j["scope"] = s.scope;
        }
      },
      step);
  return j;
}

/*! \brief Throws nlohmann type errors or std::invalid_argument on malformed input. */
inline TransformStep StepFromJson(const Json& j) {
  const std::string op = j.at("op").get<std::string>();
  const int stage = j.at("stage").get<int>();
  if (op == "split") {
    return SplitStep{stage, j.at("loop").get<std::string>(), j.at("factors").get<std::vector<int64_t>>()};
  }
  if (op == "reorder") {
    return ReorderStep{stage, j.at("order").get<std::vector<std::string>>()};
  }
  if (op == "fuse") {
    return FuseStep{stage, j.at("loops").get<std::vector<std::string>>()};
  }
  if (op == "annotate") {
    auto kind = AnnotationKindFromString(j.at("ann").get<std::string>());
    if (!kind) throw std::invalid_argument("unknown annotation");
    return AnnotateStep{stage, j.at("loop").get<std::string>(), *kind, j.at("factor").get<int64_t>()};
  }
  if (op == "bind") {
    auto axis = BindAxisFromString(j.at("axis").get<std::string>());
    if (!axis) throw std::invalid_argument("unknown bind axis");
    return BindStep{stage, j.at("loop").get<std::string>(), *axis};
  }
  if (op == "compute_at") {
    return ComputeAtStep{stage, j.at("target_stage").get<int>(), j.at("target_loop").get<std::string>()};
  }
  if (op == "cache_read") return CacheReadStep{stage, j.at("scope").get<std::string>()};
  if (op == "cache_write") return CacheWriteStep{stage, j.at("scope").get<std::string>()};
  throw std::invalid_argument("unknown step op '" + op + "'");
}

inline Json TaskToJson(const TaskDefinition& task) {
  Json stages = Json::array();
  for (const auto& stage : task.stages) {
    Json loops = Json::array();
    for (const auto& loop : stage.loops) {
      loops.push_back({{"loop_id", loop.loop_id}, {"extent", loop.extent}, {"kind", ToString(loop.kind)}});
    }
    const auto& a = stage.arith_counts;
    stages.push_back({{"stage_index", stage.stage_index},
                      {"op_kind", stage.op_kind.name},
                      {"arith_counts",
                       {{"add", a.add}, {"mul", a.mul}, {"div", a.div}, {"fma", a.fma}, {"special", a.special}}},
                      {"loops", loops}});
  }
  Json edges = Json::array();
  for (const auto& [p, c] : task.read_edges) edges.push_back({p, c});
  return {{"kind", "task"}, {"task_id", task.task_id}, {"name", task.name},
          {"stages", stages}, {"read_edges", edges}};
}

inline Json RecordToJson(const MeasurementRecord& rec) {
  Json steps = Json::array();
  for (const auto& step : rec.steps) steps.push_back(StepToJson(step));
  return {{"kind", "record"},          {"record_id", rec.record_id}, {"task_id", rec.task_id},
          {"is_baseline", rec.is_baseline}, {"latency_ms", rec.latency_ms}, {"steps", steps}};
}

namespace detail {

inline bool HasCycle(int n, const std::vector<std::pair<int, int>>& edges) {
  std::vector<int> indegree(n, 0);
  std::vector<std::vector<int>> out(n);
  for (const auto& [p, c] : edges) {
    out[p].push_back(c);
    ++indegree[c];
  }
  std::vector<int> ready;
  for (int i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.push_back(i);
  }
  int visited = 0;
  while (!ready.empty()) {
    int v = ready.back();
    ready.pop_back();
    ++visited;
    for (int c : out[v]) {
      if (--indegree[c] == 0) ready.push_back(c);
    }
  }
  return visited != n;
}

inline TaskDefinition TaskFromJson(const Json& j, int line_no) {
  auto malformed = [&](const std::string& why) {
    return Error(ErrorCode::kMalformedLine, std::to_string(line_no), why, line_no);
  };
  TaskDefinition task;
  task.task_id = j.at("task_id").get<std::string>();
  task.name = j.value("name", std::string());
  std::set<std::pair<int, int>> seen_edges;
  for (const auto& js : j.at("stages")) {
    StageDef stage;
    stage.stage_index = js.at("stage_index").get<int>();
    stage.op_kind = OpKind::FromString(js.at("op_kind").get<std::string>());
    const Json arith = js.value("arith_counts", Json::object());
    stage.arith_counts = ArithCounts{arith.value("add", int64_t{0}), arith.value("mul", int64_t{0}),
                                     arith.value("div", int64_t{0}), arith.value("fma", int64_t{0}),
                                     arith.value("special", int64_t{0})};
    const auto& ac = stage.arith_counts;
    if (ac.add < 0 || ac.mul < 0 || ac.div < 0 || ac.fma < 0 || ac.special < 0) {
      throw malformed("negative arithmetic count");
    }
    std::set<std::string> ids;
    for (const auto& jl : js.at("loops")) {
      LoopDef loop;
      loop.loop_id = jl.at("loop_id").get<std::string>();
      loop.extent = jl.at("extent").get<int64_t>();
      const std::string kind = jl.at("kind").get<std::string>();
      if (kind == "spatial") {
        loop.kind = LoopKind::kSpatial;
      } else if (kind == "reduction") {
        loop.kind = LoopKind::kReduction;
      } else {
        throw malformed("unknown loop kind '" + kind + "'");
      }
      if (loop.extent < 1) throw malformed("loop extent < 1");
      if (!ids.insert(loop.loop_id).second) throw malformed("duplicate loop id '" + loop.loop_id + "'");
      stage.loops.push_back(std::move(loop));
    }
    if (stage.loops.empty()) throw malformed("stage without loops");
    task.stages.push_back(std::move(stage));
  }
  std::sort(task.stages.begin(), task.stages.end(),
            [](const StageDef& a, const StageDef& b) { return a.stage_index < b.stage_index; });
  for (size_t i = 0; i < task.stages.size(); ++i) {
    if (task.stages[i].stage_index != static_cast<int>(i)) {
      throw malformed("stage indices must be 0..n-1 and unique");
    }
  }
  const int n = static_cast<int>(task.stages.size());
  for (const auto& je : j.value("read_edges", Json::array())) {
    auto edge = je.get<std::pair<int, int>>();
    if (edge.first < 0 || edge.first >= n || edge.second < 0 || edge.second >= n) {
      throw malformed("read edge references a missing stage");
    }
    if (seen_edges.insert(edge).second) task.read_edges.push_back(edge);
  }
  if (HasCycle(n, task.read_edges)) throw malformed("read edges form a cycle");
  return task;
}

}  // namespace detail

/*!
 * \brief Parses a SchedLog document stream.
 *
 * Every non-empty line is one JSON object whose "kind" is "task" or "record".
 * Task lines may appear anywhere; records are checked against all tasks in the
 * log. Output preserves input order.
 */
inline ParsedLog ParseLog(std::string_view text) {
  struct RawLine {
    int line_no;
    Json doc;
  };
  std::vector<RawLine> record_lines;
  ParsedLog out;
  std::map<std::string, size_t> task_pos;

  ForEachLine(text, [&](int line_no, std::string_view line) {
    if (Trim(line).empty()) return;
    Json doc = Json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
      throw Error(ErrorCode::kMalformedLine, std::to_string(line_no), "not a JSON object", line_no);
    }
    std::string kind = doc.value("kind", std::string());
    if (kind == "task") {
      TaskDefinition task;
      try {
        task = detail::TaskFromJson(doc, line_no);
      } catch (const Json::exception& e) {
        throw Error(ErrorCode::kMalformedLine, std::to_string(line_no), e.what(), line_no);
      }
      if (!task_pos.emplace(task.task_id, out.tasks.size()).second) {
        throw Error(ErrorCode::kMalformedLine, std::to_string(line_no),
                    "duplicate task '" + task.task_id + "'", line_no);
      }
      out.tasks.push_back(std::move(task));
    } else if (kind == "record") {
      record_lines.push_back({line_no, std::move(doc)});
    } else {
      throw Error(ErrorCode::kMalformedLine, std::to_string(line_no), "unknown kind '" + kind + "'",
                  line_no);
    }
  });

  std::set<std::string> record_ids;
  for (const auto& [line_no, doc] : record_lines) {
    MeasurementRecord rec;
    try {
      rec.record_id = doc.at("record_id").get<std::string>();
      rec.task_id = doc.at("task_id").get<std::string>();
      rec.is_baseline = doc.value("is_baseline", false);
      rec.latency_ms = doc.at("latency_ms").get<double>();
      for (const auto& js : doc.value("steps", Json::array())) rec.steps.push_back(StepFromJson(js));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kMalformedLine, std::to_string(line_no), e.what(), line_no);
    }
    if (!(rec.latency_ms > 0.0) || !std::isfinite(rec.latency_ms)) {
      throw Error(ErrorCode::kMalformedLine, std::to_string(line_no), "latency_ms must be > 0", line_no);
    }
    if (rec.is_baseline && !rec.steps.empty()) {
      throw Error(ErrorCode::kMalformedLine, std::to_string(line_no), "baseline record has steps",
                  line_no);
    }
    if (!record_ids.insert(rec.record_id).second) {
      throw Error(ErrorCode::kDuplicateRecordId, rec.record_id, {}, line_no);
    }
    auto it = task_pos.find(rec.task_id);
    if (it == task_pos.end()) throw Error(ErrorCode::kUnknownTask, rec.task_id, {}, line_no);
    try {
      ApplyRecordSteps(out.tasks[it->second], rec.steps);
    } catch (const Error& e) {
      throw Error(ErrorCode::kInvalidStep, rec.record_id, e.what(), line_no);
    }
    out.records.push_back(std::move(rec));
  }
  return out;
}

/*! \brief Emits task lines then record lines; ParseLog inverts this exactly. */
inline std::string SerializeLog(const ParsedLog& log) {
  std::string out;
  for (const auto& task : log.tasks) out += TaskToJson(task).dump() + "\n";
  for (const auto& rec : log.records) out += RecordToJson(rec).dump() + "\n";
  return out;
}

inline std::string SerializeLog(const Dataset& dataset) {
  ParsedLog log;
  for (const auto& [id, task] : dataset.tasks) log.tasks.push_back(task);
  log.records = dataset.records;
  return SerializeLog(log);
}

/*! \brief Parses "metric_name,group,direction" rows. */
inline MetricRegistry ParseRegistry(std::string_view text) {
  MetricRegistry registry;
  ForEachLine(text, [&](int line_no, std::string_view line) {
    std::string trimmed = Trim(line);
    if (trimmed.empty() || trimmed.front() == '#') return;
    auto fields = SplitString(trimmed, ',');
    auto bad = [&](const std::string& why) {
      return Error(ErrorCode::kMalformedLine, std::to_string(line_no), why, line_no);
    };
    if (fields.size() != 3) throw bad("expected metric_name,group,direction");
    std::string name = Trim(fields[0]), group = Trim(fields[1]), direction = Trim(fields[2]);
    MetricInfo info;
    if (group == "DRAM") {
      info.group = MetricGroup::kDram;
    } else if (group == "SM") {
      info.group = MetricGroup::kSm;
    } else if (group == "GPU") {
      info.group = MetricGroup::kGpu;
    } else {
      throw bad("unknown group '" + group + "'");
    }
    if (direction == "higher") {
      info.direction = MetricDirection::kHigherIsBetter;
    } else if (direction == "lower") {
      info.direction = MetricDirection::kLowerIsBetter;
    } else {
      throw bad("unknown direction '" + direction + "'");
    }
    if (name.empty() || !registry.entries.emplace(name, info).second) {
      throw bad("empty or duplicate metric '" + name + "'");
    }
  });
  return registry;
}

inline std::string SerializeRegistry(const MetricRegistry& registry) {
  std::string out;
  for (const auto& [name, info] : registry.entries) {
    out += name + "," + ToString(info.group) + "," +
           (info.direction == MetricDirection::kHigherIsBetter ? "higher" : "lower") + "\n";
  }
  return out;
}

/*!
 * \brief Merges "record_id,metric_name,value" rows into `records`.
 *
 * Later rows for the same (record, metric) overwrite earlier ones. The input is
 * all-or-nothing: on error `records` is left untouched.
 */
inline void ParseMetrics(std::string_view table, const MetricRegistry& registry,
                         std::vector<MeasurementRecord>& records) {
  std::map<std::string, size_t> index;
  for (size_t i = 0; i < records.size(); ++i) index.emplace(records[i].record_id, i);
  std::vector<std::tuple<size_t, std::string, double>> updates;
  ForEachLine(table, [&](int line_no, std::string_view line) {
    std::string trimmed = Trim(line);
    if (trimmed.empty() || trimmed.front() == '#') return;
    auto fields = SplitString(trimmed, ',');
    if (fields.size() != 3) {
      throw Error(ErrorCode::kMalformedLine, std::to_string(line_no),
                  "expected record_id,metric_name,value", line_no);
    }
    std::string record_id = Trim(fields[0]), metric = Trim(fields[1]);
    auto it = index.find(record_id);
    if (it == index.end()) throw Error(ErrorCode::kUnknownRecord, record_id, {}, line_no);
    if (!registry.Contains(metric)) throw Error(ErrorCode::kUnregisteredMetric, metric, {}, line_no);
    auto value = ParseDouble(fields[2]);
    if (!value) throw Error(ErrorCode::kNonNumericValue, std::to_string(line_no), fields[2], line_no);
    updates.emplace_back(it->second, metric, *value);
  });
  for (auto& [pos, metric, value] : updates) records[pos].metrics[metric] = value;
}

inline std::string SerializeMetrics(const std::vector<MeasurementRecord>& records) {
  std::string out;
  for (const auto& rec : records) {
    for (const auto& [name, value] : rec.metrics) {
      out += rec.record_id + "," + name + "," + FormatDouble(value) + "\n";
    }
  }
  return out;
}

/*! \brief Builds a dataset from a parsed log, optional metrics table and registry. */
inline Dataset BuildDataset(ParsedLog log, MetricRegistry registry, std::string_view metrics = {}) {
  if (!metrics.empty()) ParseMetrics(metrics, registry, log.records);
  Dataset dataset;
  for (auto& task : log.tasks) {
    std::string id = task.task_id;
    dataset.tasks.emplace(std::move(id), std::move(task));
  }
  dataset.records = std::move(log.records);
  dataset.registry = std::move(registry);
  return dataset;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct Violation {
  std::string code;     // machine-readable, e.g. "MissingBaseline"
  std::string subject;  // task or record id
  std::string detail;
  bool operator==(const Violation&) const = default;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  bool operator==(const ValidationReport&) const = default;
};

inline Json ReportToJson(const ValidationReport& report) {
  Json list = Json::array();
  for (const auto& v : report.violations) {
    list.push_back({{"code", v.code}, {"subject", v.subject}, {"detail", v.detail}});
  }
  return {{"ok", report.ok()}, {"violations", list}};
}

/*! \brief Checks every dataset invariant; never throws. */
inline ValidationReport ValidateDataset(const Dataset& dataset) {
  ValidationReport report;
  auto add = [&](std::string code, std::string subject, std::string detail = {}) {
    report.violations.push_back({std::move(code), std::move(subject), std::move(detail)});
  };

  for (const auto& [id, task] : dataset.tasks) {
    if (id != task.task_id) add("TaskIdMismatch", id);
    const int n = static_cast<int>(task.stages.size());
    for (int i = 0; i < n; ++i) {
      const auto& stage = task.stages[i];
      if (stage.stage_index != i) add("BadStageIndex", id, "position " + std::to_string(i));
      if (stage.loops.empty()) add("EmptyStage", id, "stage " + std::to_string(i));
      std::set<std::string> loop_ids;
      for (const auto& loop : stage.loops) {
        if (loop.extent < 1) add("NonPositiveExtent", id, loop.loop_id);
        if (!loop_ids.insert(loop.loop_id).second) add("DuplicateLoopId", id, loop.loop_id);
      }
    }
    bool edges_ok = true;
    for (const auto& [p, c] : task.read_edges) {
      if (p < 0 || p >= n || c < 0 || c >= n) {
        add("DanglingReadEdge", id, std::to_string(p) + "->" + std::to_string(c));
        edges_ok = false;
      }
    }
    if (edges_ok && detail::HasCycle(n, task.read_edges)) add("CyclicTask", id);
  }

  std::set<std::string> seen_ids;
  std::set<std::string> tasks_with_records, tasks_with_baseline;
  for (const auto& rec : dataset.records) {
    if (!seen_ids.insert(rec.record_id).second) add("DuplicateRecordId", rec.record_id);
    if (!(rec.latency_ms > 0.0)) add("NonPositiveLatency", rec.record_id);
    if (rec.is_baseline && !rec.steps.empty()) add("BaselineHasSteps", rec.record_id);
    for (const auto& [name, value] : rec.metrics) {
      if (!dataset.registry.Contains(name)) add("UnregisteredMetric", rec.record_id, name);
    }
    const TaskDefinition* task = dataset.FindTask(rec.task_id);
    if (task == nullptr) {
      add("UnknownTask", rec.record_id, rec.task_id);
      continue;
    }
    tasks_with_records.insert(rec.task_id);
    if (rec.is_baseline) tasks_with_baseline.insert(rec.task_id);
    try {
      ApplyRecordSteps(*task, rec.steps);
    } catch (const Error& e) {
      add("InvalidStep", rec.record_id, e.what());
    }
  }
  for (const auto& id : tasks_with_records) {
    if (!tasks_with_baseline.count(id)) add("MissingBaseline", id);
  }
  return report;
}

}  // namespace schedscope
