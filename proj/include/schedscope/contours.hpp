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
 * \file schedscope/contours.hpp
 * \brief Baseline-relative metric improvements aggregated per honeycomb cell and
 *  hardware group, max-merged into a scalar field, and oriented contour lines
 *  extracted from it with marching triangles over the cell centers.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "schedscope/honeycomb.hpp"
#include "schedscope/schedlog.hpp"

namespace schedscope {

/*! \brief Relative improvement over the baseline; positive always means better. */
inline double Improvement(double value, double baseline_value, MetricDirection direction) {
  if (baseline_value == 0.0) throw Error(ErrorCode::kZeroBaseline, FormatDouble(value));
  const double delta = direction == MetricDirection::kLowerIsBetter ? baseline_value - value
                                                                    : value - baseline_value;
  return delta / std::abs(baseline_value);
}

struct GroupMeans {
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<bool, 3> missing{true, true, true};
};

/*!
 * \brief Per cell and hardware group, the mean improvement over every
 *  (member, metric-in-group) pair that has a value in both the member and the
 *  baseline. Groups without any pair report 0 and are flagged missing.
 */
inline std::vector<GroupMeans> CellGroupMeans(const HoneycombLayout& layout,
                                              const std::map<std::string, const MeasurementRecord*>& records,
                                              const MetricRegistry& registry,
                                              const MeasurementRecord* baseline) {
  if (baseline == nullptr) throw Error(ErrorCode::kNoBaseline, "cell_group_means");
  std::vector<GroupMeans> out;
  out.reserve(layout.cells.size());
  for (const auto& cell : layout.cells) {
    std::array<double, 3> sum{0.0, 0.0, 0.0};
    std::array<int, 3> count{0, 0, 0};
    for (const auto& id : cell.member_ids) {
      auto it = records.find(id);
      if (it == records.end()) throw Error(ErrorCode::kUnknownRecord, id);
      for (const auto& [name, value] : it->second->metrics) {
        auto info = registry.entries.find(name);
        if (info == registry.entries.end()) throw Error(ErrorCode::kUnregisteredMetric, name);
        auto base = baseline->metrics.find(name);
        if (base == baseline->metrics.end()) continue;
        const int g = static_cast<int>(info->second.group);
        sum[g] += Improvement(value, base->second, info->second.direction);
        ++count[g];
      }
    }
    GroupMeans gm;
    for (int g = 0; g < 3; ++g) {
      gm.missing[g] = count[g] == 0;
      gm.mean[g] = count[g] == 0 ? 0.0 : sum[g] / count[g];
    }
    out.push_back(gm);
  }
  return out;
}

/*! \brief Max over the three group means; ties resolved DRAM, then SM, then GPU. */
inline std::pair<double, MetricGroup> MergeMax(const std::array<double, 3>& means) {
  int best = 0;
  for (int g = 1; g < 3; ++g) {
    if (means[g] > means[best]) best = g;
  }
  return {means[best], static_cast<MetricGroup>(best)};
}

struct ScalarField {
  std::map<HexCoord, double> values;
  std::map<HexCoord, MetricGroup> dominant;
};

/*! \brief Writes group means into the layout and returns the merged field. */
inline ScalarField ApplyGroupMeans(HoneycombLayout& layout, const std::vector<GroupMeans>& means) {
  if (means.size() != layout.cells.size()) {
    throw Error(ErrorCode::kInternal, "apply_group_means", "one entry per cell expected");
  }
  ScalarField field;
  for (size_t i = 0; i < means.size(); ++i) {
    auto& cell = layout.cells[i];
    cell.group_means = means[i].mean;
    cell.group_missing = means[i].missing;
    auto [value, group] = MergeMax(cell.group_means);
    cell.merged_value = value;
    cell.dominant_group = group;
    field.values[cell.coord] = value;
    field.dominant[cell.coord] = group;
  }
  return field;
}

/*! \brief n equally spaced levels strictly between the field's min and max. */
inline std::vector<double> DefaultLevels(const ScalarField& field, int n = 5) {
  if (field.values.empty() || n < 1) return {};
  double lo = field.values.begin()->second, hi = lo;
  for (const auto& [c, v] : field.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi == lo) return {};
  std::vector<double> levels;
  for (int i = 1; i <= n; ++i) levels.push_back(lo + i * (hi - lo) / (n + 1));
  return levels;
}

enum class Orientation { kCw, kCcw, kOpen };

inline const char* ToString(Orientation o) {
  switch (o) {
    case Orientation::kCw: return "cw";
    case Orientation::kCcw: return "ccw";
    case Orientation::kOpen: return "open";
  }
  return "?";
}

using HexEdge = std::pair<HexCoord, HexCoord>;  // ordered so first < second

struct Contour {
  double level = 0.0;
  // Unit-circumradius honeycomb frame, y up. Closed contours do not repeat the
  // first point.
  std::vector<std::pair<double, double>> points;
  std::vector<HexEdge> edges;  // triangle edge each point lies on
  bool closed = false;
  Orientation orientation = Orientation::kOpen;
  std::set<MetricGroup> groups_crossed;
  MetricGroup color_group = MetricGroup::kDram;  // most frequent dominant group along the line
};

struct ContourSet {
  std::vector<Contour> contours;
};

inline double SignedArea(const std::vector<std::pair<double, double>>& pts) {
  double area = 0.0;
  for (size_t i = 0; i < pts.size(); ++i) {
    const auto& a = pts[i];
    const auto& b = pts[(i + 1) % pts.size()];
    area += a.first * b.second - b.first * a.second;
  }
  return 0.5 * area;
}

namespace detail {

struct Segment {
  HexEdge from;
  HexEdge to;
  std::array<HexCoord, 3> triangle;
};

inline HexEdge MakeEdge(HexCoord a, HexCoord b) { return a < b ? HexEdge{a, b} : HexEdge{b, a}; }

inline std::pair<double, double> EdgePoint(const ScalarField& field, const HexEdge& edge, double level) {
  const double fa = field.values.at(edge.first), fb = field.values.at(edge.second);
  const double t = (level - fa) / (fb - fa);
  auto [ax, ay] = HexCenter(edge.first);
  auto [bx, by] = HexCenter(edge.second);
  return {ax + t * (bx - ax), ay + t * (by - ay)};
}

/*!
 * \brief One segment per triangle whose vertices straddle the level. Walking the
 *  triangle counterclockwise, the segment runs from the edge that goes from above
 *  to below the level toward the edge going from below to above, which keeps the
 *  higher side on the left.
 */
inline std::vector<Segment> LevelSegments(const ScalarField& field, double level) {
  std::vector<Segment> segments;
  auto occupied = [&](HexCoord c) { return field.values.count(c) != 0; };
  for (const auto& [c, value] : field.values) {
    const std::array<std::array<HexCoord, 3>, 2> triangles = {{
        {c, HexCoord{c.q + 1, c.r}, HexCoord{c.q, c.r + 1}},
        {c, HexCoord{c.q + 1, c.r - 1}, HexCoord{c.q + 1, c.r}},
    }};
    for (const auto& tri : triangles) {
      if (!occupied(tri[1]) || !occupied(tri[2])) continue;
      std::array<bool, 3> above;
      for (int i = 0; i < 3; ++i) above[i] = field.values.at(tri[i]) > level;
      if (above[0] == above[1] && above[1] == above[2]) continue;
      Segment seg{};
      seg.triangle = tri;
      for (int i = 0; i < 3; ++i) {
        const int j = (i + 1) % 3;
        if (above[i] && !above[j]) seg.from = MakeEdge(tri[i], tri[j]);
        if (!above[i] && above[j]) seg.to = MakeEdge(tri[i], tri[j]);
      }
      segments.push_back(seg);
    }
  }
  return segments;
}

inline void FinishContour(Contour& contour, const ScalarField& field,
                          const std::vector<const Segment*>& chain) {
  std::map<MetricGroup, int> votes;
  for (const Segment* seg : chain) {
    for (const auto& c : seg->triangle) {
      MetricGroup g = field.dominant.count(c) ? field.dominant.at(c) : MetricGroup::kDram;
      contour.groups_crossed.insert(g);
      ++votes[g];
    }
  }
  int best = -1;
  for (const auto& [g, n] : votes) {
    if (n > best) {
      best = n;
      contour.color_group = g;
    }
  }
  if (contour.closed) {
    contour.orientation = SignedArea(contour.points) > 0.0 ? Orientation::kCcw : Orientation::kCw;
  } else {
    contour.orientation = Orientation::kOpen;
  }
}

}  // namespace detail

/*!
 * \brief Marching triangles over the occupied cell centers.
 *
 * Triangles are {(q,r),(q+1,r),(q,r+1)} and {(q,r),(q+1,r-1),(q+1,r)} with all
 * three cells occupied. Closed loops around maxima are counterclockwise, around
 * minima clockwise; chains that leave the triangulated region are open.
 * Levels not strictly inside the field's range produce nothing.
 */
inline ContourSet ExtractContours(const ScalarField& field, const std::vector<double>& levels) {
  ContourSet out;
  if (field.values.empty()) return out;
  double lo = field.values.begin()->second, hi = lo;
  for (const auto& [c, v] : field.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  for (double level : levels) {
    if (!(level > lo && level < hi)) continue;
    const auto segments = detail::LevelSegments(field, level);
    std::map<HexEdge, size_t> by_start;
    std::set<HexEdge> ends;
    for (size_t i = 0; i < segments.size(); ++i) {
      by_start.emplace(segments[i].from, i);
      ends.insert(segments[i].to);
    }
    std::vector<bool> used(segments.size(), false);

    auto walk = [&](size_t start, bool closed) {
      Contour contour;
      contour.level = level;
      contour.closed = closed;
      std::vector<const detail::Segment*> chain;
      size_t cur = start;
      while (true) {
        used[cur] = true;
        chain.push_back(&segments[cur]);
        contour.points.push_back(detail::EdgePoint(field, segments[cur].from, level));
        contour.edges.push_back(segments[cur].from);
        auto next = by_start.find(segments[cur].to);
        if (next == by_start.end() || used[next->second]) {
          if (!closed) {
            contour.points.push_back(detail::EdgePoint(field, segments[cur].to, level));
            contour.edges.push_back(segments[cur].to);
          }
          break;
        }
        cur = next->second;
      }
      detail::FinishContour(contour, field, chain);
      out.contours.push_back(std::move(contour));
    };

    for (size_t i = 0; i < segments.size(); ++i) {
      if (!used[i] && !ends.count(segments[i].from)) walk(i, false);
    }
    for (size_t i = 0; i < segments.size(); ++i) {
      if (!used[i]) walk(i, true);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

inline const char* GroupColor(MetricGroup group) {
  switch (group) {
    case MetricGroup::kDram: return "#d95f02";
    case MetricGroup::kSm: return "#1b9e77";
    case MetricGroup::kGpu: return "#7570b3";
  }
  return "#000000";
}

inline Json ContoursToJson(const ContourSet& set) {
  Json list = Json::array();
  for (const auto& c : set.contours) {
    Json points = Json::array();
    for (const auto& [x, y] : c.points) {
      auto [sx, sy] = SvgPoint(x, y);
      points.push_back({sx, sy});
    }
    Json groups = Json::array();
    for (MetricGroup g : c.groups_crossed) groups.push_back(ToString(g));
    list.push_back({{"level", c.level},
                    {"orientation", ToString(c.orientation)},
                    {"closed", c.closed},
                    {"points", points},
                    {"groups_crossed", groups},
                    {"color_group", ToString(c.color_group)}});
  }
  return {{"contours", list}};
}

/*! \brief Contour polylines with an arrowhead on every 5th segment. */
inline std::string ContoursSvgBody(const ContourSet& set) {
  std::string out = "<g class=\"contours\" fill=\"none\">\n";
  for (const auto& c : set.contours) {
    const std::string color = GroupColor(c.color_group);
    std::vector<std::pair<double, double>> pts;
    for (const auto& [x, y] : c.points) pts.push_back(SvgPoint(x, y));
    if (c.closed && !pts.empty()) pts.push_back(pts.front());
    out += "<polyline data-orientation=\"" + std::string(ToString(c.orientation)) +
           "\" stroke=\"" + color + "\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < pts.size(); ++i) {
      out += (i ? " " : "") + detail::SvgNum(pts[i].first) + "," + detail::SvgNum(pts[i].second);
    }
    out += "\"/>\n";
    for (size_t i = 0; i + 1 < pts.size(); i += 5) {
      const double dx = pts[i + 1].first - pts[i].first, dy = pts[i + 1].second - pts[i].second;
      const double len = std::hypot(dx, dy);
      if (len <= 0.0) continue;
      const double ux = dx / len, uy = dy / len;
      const double mx = 0.5 * (pts[i].first + pts[i + 1].first), my = 0.5 * (pts[i].second + pts[i + 1].second);
      const double tip_x = mx + 3.0 * ux, tip_y = my + 3.0 * uy;
      const double lx = mx - 2.0 * ux - 2.0 * uy, ly = my - 2.0 * uy + 2.0 * ux;
      const double rx = mx - 2.0 * ux + 2.0 * uy, ry = my - 2.0 * uy - 2.0 * ux;
      out += "<polygon class=\"arrow\" fill=\"" + color + "\" points=\"" + detail::SvgNum(tip_x) + "," +
             detail::SvgNum(tip_y) + " " + detail::SvgNum(lx) + "," + detail::SvgNum(ly) + " " +
             detail::SvgNum(rx) + "," + detail::SvgNum(ry) + "\"/>\n";
    }
  }
  out += "</g>\n";
  return out;
}

/*! \brief Complete SVG document: honeycomb cells, boundaries and contour overlay. */
inline std::string RenderSvg(const HoneycombLayout& layout, const ContourSet& contours) {
  double min_x = 0, max_x = 0, min_y = 0, max_y = 0;
  bool first = true;
  for (const auto& cell : layout.cells) {
    auto [x, y] = HexCenter(cell.coord);
    auto [sx, sy] = SvgPoint(x, y);
    if (first || sx < min_x) min_x = sx;
    if (first || sx > max_x) max_x = sx;
    if (first || sy < min_y) min_y = sy;
    if (first || sy > max_y) max_y = sy;
    first = false;
  }
  const double pad = 2.0 * kSvgHexRadius;
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" + detail::SvgNum(min_x - pad) +
                    " " + detail::SvgNum(min_y - pad) + " " + detail::SvgNum(max_x - min_x + 2 * pad) +
                    " " + detail::SvgNum(max_y - min_y + 2 * pad) + "\">\n";
  out += HoneycombSvgBody(layout);
  out += ContoursSvgBody(contours);
  out += "</svg>\n";
  return out;
}

}  // namespace schedscope
