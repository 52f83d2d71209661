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
 * \file schedscope/cli.hpp
 * \brief Command-line driver. Kept in the library so tests can run the exact
 *  command paths in-process.
 *
 * Exit status: 0 success, 1 validation violations, 2 malformed input,
 * 3 internal invariant failure.
 */
#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "schedscope/analysis.hpp"
#include "schedscope/api.hpp"
#include "schedscope/synth.hpp"

namespace schedscope {

enum ExitCode : int { kExitOk = 0, kExitInvalid = 1, kExitMalformed = 2, kExitInternal = 3 };

inline constexpr int kDefaultPort = 8722;

/*! \brief Exit status for an error escaping a subcommand. */
inline int ExitCodeFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInternal:
      return kExitInternal;
    case ErrorCode::kUnknownRecord:
    case ErrorCode::kTaskMismatch:
    case ErrorCode::kInvalidSpec:
    case ErrorCode::kNoBaseline:
    case ErrorCode::kZeroBaseline:
    case ErrorCode::kMissingLabel:
      return kExitInvalid;
    default:
      return kExitMalformed;
  }
}

inline std::string ReadTextFile(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw Error(ErrorCode::kMalformedLine, path, "cannot read file");
  std::ostringstream buf;
  buf << file.rdbuf();
  return buf.str();
}

struct InputOptions {
  std::string log;
  std::string metrics;
  std::string registry;
};

inline Dataset LoadDataset(const InputOptions& in) {
  ParsedLog log = ParseLog(ReadTextFile(in.log));
  MetricRegistry registry;
  if (!in.registry.empty()) registry = ParseRegistry(ReadTextFile(in.registry));
  std::string metrics = in.metrics.empty() ? std::string() : ReadTextFile(in.metrics);
  return BuildDataset(std::move(log), std::move(registry), metrics);
}

/*! \brief Parses "MIN:MAX". */
inline std::pair<int, int> ParseKRange(const std::string& text) {
  auto parts = SplitString(text, ':');
  try {
    if (parts.size() == 2) {
      size_t used_a = 0, used_b = 0;
      int a = std::stoi(parts[0], &used_a), b = std::stoi(parts[1], &used_b);
      if (used_a == parts[0].size() && used_b == parts[1].size() && a >= 1 && b >= a) return {a, b};
    }
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::kInvalidSpec, text, "--k-range expects MIN:MAX with 1 <= MIN <= MAX");
}

/*! \brief Port from SCHEDSCOPE_PORT if set, else the flag value. */
inline int ResolvePort(int flag_port) {
  if (const char* env = std::getenv("SCHEDSCOPE_PORT")) {
    try {
      return std::stoi(env);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidSpec, env, "SCHEDSCOPE_PORT is not a port number");
    }
  }
  return flag_port;
}

/*! \brief Runs the command line; output goes to `out`, diagnostics to `err`. */
inline int RunCli(int argc, const char* const* argv, std::ostream& out = std::cout,
                  std::ostream& err = std::cerr) {
  CLI::App app{"schedscope: auto-scheduling search-space explorer"};
  app.require_subcommand(1);

  InputOptions in;
  AnalysisParams params;
  int capacity = 0, fixed_k = 0, port = kDefaultPort;
  std::string k_range = "2:8", out_dir;
  bool json = false;

  auto add_inputs = [&](CLI::App* cmd, bool need_metrics_flags) {
    cmd->add_option("--log", in.log, "SchedLog file")->required()->check(CLI::ExistingFile);
    if (need_metrics_flags) {
      cmd->add_option("--metrics", in.metrics, "metrics table (record_id,metric,value)")->check(CLI::ExistingFile);
      cmd->add_option("--registry", in.registry, "metric registry (metric,group,direction)")
          ->check(CLI::ExistingFile);
    }
  };
  auto add_analysis = [&](CLI::App* cmd) {
    cmd->add_option("--seed", params.seed, "clustering seed")->default_val(42);
    cmd->add_option("--capacity", capacity, "records per honeycomb cell (default ceil(N/200))");
    auto* k_opt = cmd->add_option("--k", fixed_k, "fixed number of clusters");
    cmd->add_option("--k-range", k_range, "silhouette search range MIN:MAX")->default_val("2:8")->excludes(k_opt);
    cmd->add_option("--levels", params.levels, "number of contour levels")->default_val(5);
  };

  auto* ingest = app.add_subcommand("ingest", "validate inputs and print the report");
  add_inputs(ingest, true);
  ingest->add_flag("--json", json, "print the report as JSON");

  auto* analyze = app.add_subcommand("analyze", "build a snapshot and write export documents");
  add_inputs(analyze, true);
  add_analysis(analyze);
  analyze->add_option("--out", out_dir, "output directory")->required();

  auto* svg = app.add_subcommand("export-svg", "write honeycomb + contour SVG per task");
  add_inputs(svg, true);
  add_analysis(svg);
  svg->add_option("--out", out_dir, "output directory")->required();

  SynthSpec spec;
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--tasks", spec.n_tasks)->default_val(1);
  synth->add_option("--stages", spec.stages_per_task)->default_val(3);
  synth->add_option("--records", spec.n_records, "non-baseline records")->default_val(600);
  synth->add_option("--clusters", spec.n_clusters)->default_val(3);
  synth->add_option("--separation", spec.cluster_separation)->default_val(10.0);
  synth->add_option("--noise", spec.noise)->default_val(0.1);
  synth->add_option("--seed", spec.seed)->default_val(42);
  synth->add_option("--out", out_dir, "output directory")->required();

  auto* serve = app.add_subcommand("serve", "serve the HTTP API");
  add_inputs(serve, true);
  add_analysis(serve);
  serve->add_option("--port", port, "listen port (SCHEDSCOPE_PORT overrides)")->default_val(kDefaultPort);

  std::vector<std::string> diff_ids;
  auto* diff = app.add_subcommand("diff", "compare two records of one task");
  add_inputs(diff, false);
  diff->add_option("records", diff_ids, "record ids A B")->required()->expected(2);
  diff->add_flag("--json", json, "print the diff as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitMalformed;
  }

  auto finalize_params = [&] {
    if (capacity > 0) params.capacity = capacity;
    if (fixed_k > 0) params.k = fixed_k;
    auto [lo, hi] = ParseKRange(k_range);
    params.k_min = lo;
    params.k_max = hi;
  };
  // Shared by analyze, export-svg and serve.
  auto load_and_analyze = [&](AnalysisSnapshot& snap) -> int {
    Dataset dataset = LoadDataset(in);
    ValidationReport report = ValidateDataset(dataset);
    if (!report.ok()) {
      err << ReportToJson(report).dump(2) << "\n";
      return kExitInvalid;
    }
    finalize_params();
    snap = BuildSnapshot(std::move(dataset), params);
    CheckSnapshotInvariants(snap);
    return kExitOk;
  };

  try {
    if (ingest->parsed()) {
      Dataset dataset = LoadDataset(in);
      ValidationReport report = ValidateDataset(dataset);
      if (json) {
        out << ReportToJson(report).dump(2) << "\n";
      } else {
        out << "tasks: " << dataset.tasks.size() << "\nrecords: " << dataset.records.size() << "\n";
        for (const auto& v : report.violations) out << v.code << "\t" << v.subject << "\t" << v.detail << "\n";
        out << (report.ok() ? "ok" : "violations: " + std::to_string(report.violations.size())) << "\n";
      }
      return report.ok() ? kExitOk : kExitInvalid;
    }
    if (analyze->parsed()) {
      AnalysisSnapshot snap;
      if (int rc = load_and_analyze(snap); rc != kExitOk) return rc;
      auto files = WriteExports(snap, out_dir);
      out << snap.snapshot_id << "\t" << files.size() << " documents written to " << out_dir << "\n";
      return kExitOk;
    }
    if (svg->parsed()) {
      AnalysisSnapshot snap;
      if (int rc = load_and_analyze(snap); rc != kExitOk) return rc;
      std::filesystem::create_directories(out_dir);
      for (const auto& [id, ta] : snap.tasks) {
        auto path = std::filesystem::path(out_dir) / (TaskDirName(id) + ".svg");
        WriteTextFile(path, RenderSvg(ta.layout, ta.contours));
        out << path.string() << "\n";
      }
      return kExitOk;
    }
    if (synth->parsed()) {
      SynthOutput gen = Generate(spec);
      std::filesystem::create_directories(out_dir);
      const std::filesystem::path dir(out_dir);
      WriteTextFile(dir / "schedule.log", gen.log);
      WriteTextFile(dir / "metrics.csv", gen.metrics);
      WriteTextFile(dir / "registry.csv", gen.registry);
      WriteTextFile(dir / "planted.csv", gen.PlantedCsv());
      out << "wrote " << gen.planted_labels.size() << " records to " << out_dir
          << " (separation ratio " << FormatDouble(gen.achieved_separation) << ")\n";
      return kExitOk;
    }
    if (serve->parsed()) {
      AnalysisSnapshot snap;
      if (int rc = load_and_analyze(snap); rc != kExitOk) return rc;
      ApiService service(std::make_shared<const AnalysisSnapshot>(std::move(snap)));
      httplib::Server server;
      MountApi(server, service);
      const int listen_port = ResolvePort(port);
      out << "serving " << service.Current()->snapshot_id << " on http://0.0.0.0:" << listen_port << "\n";
      out.flush();
      if (!server.listen("0.0.0.0", listen_port)) {
        err << "cannot listen on port " << listen_port << "\n";
        return kExitInternal;
      }
      return kExitOk;
    }
    if (diff->parsed()) {
      Dataset dataset = LoadDataset(in);
      const MeasurementRecord* a = dataset.FindRecord(diff_ids[0]);
      const MeasurementRecord* b = dataset.FindRecord(diff_ids[1]);
      if (a == nullptr) throw Error(ErrorCode::kUnknownRecord, diff_ids[0]);
      if (b == nullptr) throw Error(ErrorCode::kUnknownRecord, diff_ids[1]);
      const TaskDefinition* task = dataset.FindTask(a->task_id);
      if (task == nullptr) throw Error(ErrorCode::kUnknownTask, a->task_id);
      ScheduleDiff result = DiffSchedules(*a, *b, *task);
      out << (json ? DiffToJson(result).dump(2) + "\n" : DiffTable(result));
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return ExitCodeFor(e.code());
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitOk;
}

}  // namespace schedscope
