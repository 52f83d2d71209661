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
 * \file schedscope/loopview.hpp
 * \brief Per-stage scheduling strategy statistics, the stage data-flow graph and
 *  pairwise schedule comparison.
 */
#pragma once

#include <algorithm>
#include <map>
#include <queue>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "schedscope/schedlog.hpp"

namespace schedscope {

/*!
 * \brief Factor-erased marks applied to one loop, in application order.
 *  The empty signature means the loop is unscheduled.
 */
struct StrategySignature {
  std::vector<std::string> marks;

  static StrategySignature Of(const TransformedLoop& loop) {
    StrategySignature sig;
    for (const auto& mark : loop.marks) sig.marks.push_back(mark.Label());
    return sig;
  }

  std::string ToString() const {
    std::string out = "[";
    for (size_t i = 0; i < marks.size(); ++i) out += (i ? "," : "") + marks[i];
    return out + "]";
  }

  auto operator<=>(const StrategySignature&) const = default;
};

struct StageStrategies {
  int stage_index = 0;
  std::map<StrategySignature, int> strategy_freq;        // records carrying the signature
  std::map<StrategySignature, double> loop_proportions;  // share of (record, loop) instances
  int total_loops = 0;
};

struct LoopViewSummary {
  std::vector<StageStrategies> stages;  // by stage_index
};

/*!
 * \brief Counts strategy signatures per stage over all given records.
 *
 * Each transformed loop of each record contributes one instance. A record
 * contributes at most once per signature to strategy_freq.
 */
inline LoopViewSummary ClassifyLoopStrategies(const TaskDefinition& task,
                                              const std::vector<const MeasurementRecord*>& records) {
  LoopViewSummary summary;
  std::vector<std::map<StrategySignature, int>> instances(task.stages.size());
  summary.stages.resize(task.stages.size());
  for (size_t s = 0; s < task.stages.size(); ++s) summary.stages[s].stage_index = static_cast<int>(s);

  for (const MeasurementRecord* rec : records) {
    if (rec->task_id != task.task_id) throw Error(ErrorCode::kTaskMismatch, rec->record_id);
    auto nests = ApplyRecordSteps(task, rec->steps);
    for (size_t s = 0; s < nests.size(); ++s) {
      std::set<StrategySignature> present;
      for (const auto& loop : nests[s].loops) {
        auto sig = StrategySignature::Of(loop);
        ++instances[s][sig];
        present.insert(sig);
      }
      for (const auto& sig : present) ++summary.stages[s].strategy_freq[sig];
    }
  }
  for (size_t s = 0; s < instances.size(); ++s) {
    auto& stage = summary.stages[s];
    for (const auto& [sig, count] : instances[s]) stage.total_loops += count;
    for (const auto& [sig, count] : instances[s]) {
      stage.loop_proportions[sig] = static_cast<double>(count) / stage.total_loops;
    }
  }
  return summary;
}

inline Json LoopViewToJson(const LoopViewSummary& summary) {
  Json stages = Json::array();
  for (const auto& stage : summary.stages) {
    Json table = Json::array();
    for (const auto& [sig, proportion] : stage.loop_proportions) {
      auto freq = stage.strategy_freq.find(sig);
      table.push_back({{"signature", sig.ToString()},
                       {"freq", freq == stage.strategy_freq.end() ? 0 : freq->second},
                       {"proportion", proportion}});
    }
    stages.push_back({{"stage_index", stage.stage_index}, {"total_loops", stage.total_loops},
                      {"strategies", table}});
  }
  return {{"stages", stages}};
}

struct StageNode {
  int stage_index = 0;
  std::string op_kind;
  int loop_count = 0;
};

struct StageGraph {
  std::vector<StageNode> nodes;
  std::vector<std::pair<int, int>> edges;
  std::vector<int> topo_order;
};

/*! \brief Stage nodes and read edges; topological order takes the smallest ready index first. */
inline StageGraph BuildStageGraph(const TaskDefinition& task) {
  StageGraph graph;
  const int n = static_cast<int>(task.stages.size());
  for (const auto& stage : task.stages) {
    graph.nodes.push_back({stage.stage_index, stage.op_kind.name, static_cast<int>(stage.loops.size())});
  }
  graph.edges = task.read_edges;
  std::vector<int> indegree(n, 0);
  std::vector<std::vector<int>> out(n);
  for (const auto& [p, c] : graph.edges) {
    if (p < 0 || p >= n || c < 0 || c >= n) throw Error(ErrorCode::kCyclicTask, task.task_id, "dangling edge");
    out[p].push_back(c);
    ++indegree[c];
  }
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (int i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.push(i);
  }
  while (!ready.empty()) {
    int v = ready.top();
    ready.pop();
    graph.topo_order.push_back(v);
    for (int c : out[v]) {
      if (--indegree[c] == 0) ready.push(c);
    }
  }
  if (static_cast<int>(graph.topo_order.size()) != n) throw Error(ErrorCode::kCyclicTask, task.task_id);
  return graph;
}

inline Json StageGraphToJson(const StageGraph& graph) {
  Json nodes = Json::array();
  for (const auto& node : graph.nodes) {
    nodes.push_back({{"stage_index", node.stage_index}, {"op_kind", node.op_kind}, {"loop_count", node.loop_count}});
  }
  Json edges = Json::array();
  for (const auto& [p, c] : graph.edges) edges.push_back({p, c});
  return {{"nodes", nodes}, {"edges", edges}, {"topo_order", graph.topo_order}};
}

struct ChangedStep {
  int stage_index = 0;
  std::string description;  // e.g. "split factors", "vectorize factor", "added annotate"
  std::string value_a;
  std::string value_b;
  bool operator==(const ChangedStep&) const = default;
};

struct ScheduleDiff {
  std::string record_a;
  std::string record_b;
  std::vector<ChangedStep> changed_steps;
  double latency_delta_ms = 0.0;  // b - a
};

namespace detail {

inline std::string JoinFactors(const std::vector<int64_t>& factors) {
  std::string out = "[";
  for (size_t i = 0; i < factors.size(); ++i) out += (i ? "," : "") + std::to_string(factors[i]);
  return out + "]";
}

inline std::string JoinIds(const std::vector<std::string>& ids) {
  std::string out = "[";
  for (size_t i = 0; i < ids.size(); ++i) out += (i ? "," : "") + ids[i];
  return out + "]";
}

/*! \brief Loop a step is anchored to; empty for stage-level steps. */
inline std::string StepAnchor(const TransformStep& step) {
  return std::visit(
      [](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SplitStep> || std::is_same_v<T, AnnotateStep> ||
                      std::is_same_v<T, BindStep>) {
          return s.loop_id;
        } else if constexpr (std::is_same_v<T, FuseStep>) {
          return s.loop_ids.empty() ? std::string() : s.loop_ids.front();
        } else {
          return std::string();
        }
      },
      step);
}

inline std::string DescribeStep(const TransformStep& step) {
  return StepToJson(step).dump();
}

/*! \brief Parameter differences of two steps sharing (stage, op, anchor loop). */
inline std::vector<ChangedStep> CompareAligned(const TransformStep& a, const TransformStep& b) {
  std::vector<ChangedStep> out;
  const int stage = StepStage(a);
  auto add = [&](std::string what, std::string va, std::string vb) {
    if (va != vb) out.push_back({stage, std::move(what), std::move(va), std::move(vb)});
  };
  if (const auto* sa = std::get_if<SplitStep>(&a)) {
    const auto& sb = std::get<SplitStep>(b);
    add("split factors", JoinFactors(sa->factors), JoinFactors(sb.factors));
  } else if (const auto* ra = std::get_if<ReorderStep>(&a)) {
    add("reorder", JoinIds(ra->permutation), JoinIds(std::get<ReorderStep>(b).permutation));
  } else if (const auto* fa = std::get_if<FuseStep>(&a)) {
    add("fused loops", JoinIds(fa->loop_ids), JoinIds(std::get<FuseStep>(b).loop_ids));
  } else if (const auto* aa = std::get_if<AnnotateStep>(&a)) {
    const auto& ab = std::get<AnnotateStep>(b);
    if (aa->kind != ab.kind) {
      add("annotation", std::string(ToString(aa->kind)) + ":" + std::to_string(aa->factor),
          std::string(ToString(ab.kind)) + ":" + std::to_string(ab.factor));
    } else {
      add(std::string(ToString(aa->kind)) + " factor", std::to_string(aa->factor), std::to_string(ab.factor));
    }
  } else if (const auto* ba = std::get_if<BindStep>(&a)) {
    add("bind axis", ToString(ba->axis), ToString(std::get<BindStep>(b).axis));
  } else if (const auto* ca = std::get_if<ComputeAtStep>(&a)) {
    const auto& cb = std::get<ComputeAtStep>(b);
    add("compute_at target", std::to_string(ca->target_stage_index) + ":" + ca->target_loop_id,
        std::to_string(cb.target_stage_index) + ":" + cb.target_loop_id);
  } else if (const auto* cra = std::get_if<CacheReadStep>(&a)) {
    add("cache_read scope", cra->scope, std::get<CacheReadStep>(b).scope);
  } else if (const auto* cwa = std::get_if<CacheWriteStep>(&a)) {
    add("cache_write scope", cwa->scope, std::get<CacheWriteStep>(b).scope);
  }
  return out;
}

}  // namespace detail

/*!
 * \brief Compares two schedules of the same task.
 *
 * Steps are keyed by (stage, op, anchor loop); the j-th occurrence of a key in
 * `a` is paired with the j-th occurrence in `b`. Paired steps report each
 * differing parameter; unpaired steps are reported as removed (only in a) or
 * added (only in b).
 */
inline ScheduleDiff DiffSchedules(const MeasurementRecord& a, const MeasurementRecord& b,
                                  const TaskDefinition& task) {
  if (a.task_id != task.task_id || b.task_id != task.task_id) {
    throw Error(ErrorCode::kTaskMismatch, a.record_id + "/" + b.record_id);
  }
  using Key = std::tuple<int, std::string, std::string>;
  auto key_of = [](const TransformStep& s) {
    return Key{StepStage(s), StepOpName(s), detail::StepAnchor(s)};
  };
  std::map<Key, std::vector<size_t>> b_positions;
  for (size_t i = 0; i < b.steps.size(); ++i) b_positions[key_of(b.steps[i])].push_back(i);

  ScheduleDiff diff;
  diff.record_a = a.record_id;
  diff.record_b = b.record_id;
  diff.latency_delta_ms = b.latency_ms - a.latency_ms;
  std::map<Key, size_t> seen;
  std::vector<bool> b_used(b.steps.size(), false);
  for (const auto& step : a.steps) {
    Key key = key_of(step);
    size_t occurrence = seen[key]++;
    auto it = b_positions.find(key);
    if (it == b_positions.end() || occurrence >= it->second.size()) {
      diff.changed_steps.push_back({StepStage(step), std::string("removed ") + StepOpName(step),
                                    detail::DescribeStep(step), ""});
      continue;
    }
    size_t j = it->second[occurrence];
    b_used[j] = true;
    for (auto& change : detail::CompareAligned(step, b.steps[j])) diff.changed_steps.push_back(std::move(change));
  }
  for (size_t j = 0; j < b.steps.size(); ++j) {
    if (b_used[j]) continue;
    diff.changed_steps.push_back({StepStage(b.steps[j]), std::string("added ") + StepOpName(b.steps[j]), "",
                                  detail::DescribeStep(b.steps[j])});
  }
  return diff;
}

inline Json DiffToJson(const ScheduleDiff& diff) {
  Json rows = Json::array();
  for (const auto& c : diff.changed_steps) {
    rows.push_back({{"stage_index", c.stage_index}, {"description", c.description},
                    {"value_a", c.value_a}, {"value_b", c.value_b}});
  }
  return {{"record_a", diff.record_a}, {"record_b", diff.record_b},
          {"changed_steps", rows}, {"latency_delta_ms", diff.latency_delta_ms}};
}

/*! \brief Plain-text table for terminals. */
inline std::string DiffTable(const ScheduleDiff& diff) {
  std::string out = "stage\tchange\t" + diff.record_a + "\t" + diff.record_b + "\n";
  for (const auto& c : diff.changed_steps) {
    out += std::to_string(c.stage_index) + "\t" + c.description + "\t" + c.value_a + "\t" + c.value_b + "\n";
  }
  out += "latency_delta_ms\t" + FormatDouble(diff.latency_delta_ms) + "\n";
  return out;
}

}  // namespace schedscope
