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
 * \file schedscope/api.hpp
 * \brief Read-only HTTP API over the current analysis snapshot, and the
 *  cpp-httplib binding that serves it.
 */
#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>

#include "httplib.h"
#include "schedscope/analysis.hpp"

namespace schedscope {

struct ApiResponse {
  int status = 200;
  Json body;
};

/*!
 * \brief Routes GET requests to snapshot documents.
 *
 * The snapshot is swapped atomically; a request holds its own reference, so
 * in-flight reads finish against the snapshot they started with.
 */
class ApiService {
 public:
  ApiService() = default;
  explicit ApiService(std::shared_ptr<const AnalysisSnapshot> snapshot) : snapshot_(std::move(snapshot)) {}

  void Swap(std::shared_ptr<const AnalysisSnapshot> snapshot) {
    std::lock_guard<std::mutex> lock(mutex_);
    snapshot_ = std::move(snapshot);
  }

  std::shared_ptr<const AnalysisSnapshot> Current() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return snapshot_;
  }

  ApiResponse Handle(const std::string& path, const std::map<std::string, std::string>& query = {}) const {
    auto snap = Current();
    if (!snap) return Fail(409, "NoSnapshot", "no analysis snapshot is loaded");

    auto parts = SplitString(path, '/');
    // "/api/tasks" splits into {"", "api", "tasks"}.
    if (parts.size() < 3 || !parts[0].empty() || parts[1] != "api") {
      return Fail(404, "NotFound", "unknown resource " + path);
    }
    const std::string& root = parts[2];
    if (root == "tasks" && parts.size() == 3) return {200, TaskListJson(*snap)};
    if (root == "tasks" && parts.size() == 5) {
      auto it = snap->tasks.find(parts[3]);
      if (it == snap->tasks.end()) return Fail(404, "UnknownTask", parts[3]);
      const std::string& view = parts[4];
      if (view == "honeycomb") return {200, HoneycombDocument(*snap, it->second)};
      if (view == "contours") return {200, ContoursDocument(*snap, it->second)};
      if (view == "loopview") return {200, LoopViewDocument(*snap, it->second)};
      if (view == "stagegraph") return {200, StageGraphDocument(*snap, it->second)};
      return Fail(404, "NotFound", "unknown view " + view);
    }
    if (root == "records" && parts.size() == 4) {
      const MeasurementRecord* rec = snap->dataset.FindRecord(parts[3]);
      if (rec == nullptr) return Fail(404, "UnknownRecord", parts[3]);
      return {200, RecordDocument(*snap, *rec)};
    }
    if (root == "diff" && parts.size() == 3) {
      auto a_it = query.find("a");
      auto b_it = query.find("b");
      if (a_it == query.end() || b_it == query.end()) return Fail(400, "BadRequest", "diff needs a= and b=");
      const MeasurementRecord* a = snap->dataset.FindRecord(a_it->second);
      const MeasurementRecord* b = snap->dataset.FindRecord(b_it->second);
      if (a == nullptr) return Fail(404, "UnknownRecord", a_it->second);
      if (b == nullptr) return Fail(404, "UnknownRecord", b_it->second);
      if (a->task_id != b->task_id) return Fail(400, "TaskMismatch", a->record_id + "/" + b->record_id);
      Json doc = DiffToJson(DiffSchedules(*a, *b, *snap->dataset.FindTask(a->task_id)));
      doc["snapshot_id"] = snap->snapshot_id;
      return {200, doc};
    }
    return Fail(404, "NotFound", "unknown resource " + path);
  }

 private:
  static ApiResponse Fail(int status, const std::string& code, const std::string& message) {
    return {status, Json{{"error", code}, {"message", message}}};
  }

  mutable std::mutex mutex_;
  std::shared_ptr<const AnalysisSnapshot> snapshot_;
};

/*! \brief Wires an ApiService into an httplib server; call listen() on the result. */
inline void MountApi(httplib::Server& server, const ApiService& service) {
  server.Get(R"(/api/.*)", [&service](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> query;
    for (const auto& [key, value] : req.params) query[key] = value;
    ApiResponse out = service.Handle(req.path, query);
    res.status = out.status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(out.body.dump(), "application/json; charset=utf-8");
  });
}

}  // namespace schedscope
