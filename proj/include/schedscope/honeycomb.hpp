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
 * \file schedscope/honeycomb.hpp
 * \brief Honeycomb chart: capacity-limited spiral assignment of embedded points
 *  to a pointy-top axial hex grid, majority categories, category boundaries
 *  and three-bin latency coloring.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "schedscope/common.hpp"
#include "schedscope/schedlog.hpp"

namespace schedscope {

struct HexCoord {
  int q = 0;
  int r = 0;

  auto operator<=>(const HexCoord&) const = default;
};

inline int HexDistance(HexCoord a, HexCoord b = {}) {
  const int dq = a.q - b.q, dr = a.r - b.r;
  return (std::abs(dq) + std::abs(dr) + std::abs(dq + dr)) / 2;
}

// Counterclockwise neighbor order starting toward (+1, 0).
inline constexpr std::array<HexCoord, 6> kHexDirections = {
    HexCoord{1, 0}, HexCoord{0, 1}, HexCoord{-1, 1}, HexCoord{-1, 0}, HexCoord{0, -1}, HexCoord{1, -1}};

/*! \brief Center of a cell for circumradius 1, y pointing up. */
inline std::pair<double, double> HexCenter(HexCoord c) {
  return {std::numbers::sqrt3 * (c.q + 0.5 * c.r), 1.5 * c.r};
}

/*! \brief Cells at hex distance k, starting at (k, 0) and walking counterclockwise. */
inline std::vector<HexCoord> HexRing(int k) {
  if (k <= 0) return {HexCoord{0, 0}};
  // Side walks from (k,0) toward (0,k), (-k,k), (-k,0), (0,-k), (k,-k) and back.
  static constexpr std::array<HexCoord, 6> walk = {
      HexCoord{-1, 1}, HexCoord{-1, 0}, HexCoord{0, -1}, HexCoord{1, -1}, HexCoord{1, 0}, HexCoord{0, 1}};
  std::vector<HexCoord> ring;
  ring.reserve(6 * static_cast<size_t>(k));
  HexCoord cur{k, 0};
  for (const auto& dir : walk) {
    for (int step = 0; step < k; ++step) {
      ring.push_back(cur);
      cur.q += dir.q;
      cur.r += dir.r;
    }
  }
  return ring;
}

/*! \brief Position of a coordinate in the spiral (ring 0, then ring 1 from (1,0), ...). */
inline int SpiralIndex(HexCoord c) {
  const int k = HexDistance(c);
  if (k == 0) return 0;
  const auto ring = HexRing(k);
  const int pos = static_cast<int>(std::find(ring.begin(), ring.end(), c) - ring.begin());
  return 1 + 3 * k * (k - 1) + pos;
}

struct EmbeddedPoint {
  std::string record_id;
  double x = 0.0;
  double y = 0.0;
  int label = 0;
  double latency_ms = 0.0;
};

struct HexCell {
  HexCoord coord;
  int ring = 0;
  int spiral_index = 0;
  std::vector<std::string> member_ids;
  int category = 0;
  double mean_latency_ms = 0.0;
  int color_bin = 0;
  // Filled by the contour pipeline, indexed by MetricGroup.
  std::array<double, 3> group_means{0.0, 0.0, 0.0};
  std::array<bool, 3> group_missing{false, false, false};
  double merged_value = 0.0;
  MetricGroup dominant_group = MetricGroup::kDram;
};

struct HoneycombLayout {
  std::vector<HexCell> cells;  // spiral order
  int capacity = 1;
  std::pair<double, double> centroid{0.0, 0.0};
  std::vector<std::pair<HexCoord, HexCoord>> boundary_edges;

  const HexCell* Find(HexCoord c) const {
    auto it = std::lower_bound(cells.begin(), cells.end(), SpiralIndex(c),
                               [](const HexCell& cell, int idx) { return cell.spiral_index < idx; });
    return it != cells.end() && it->coord == c ? &*it : nullptr;
  }
  HexCell* Find(HexCoord c) {
    return const_cast<HexCell*>(static_cast<const HoneycombLayout*>(this)->Find(c));
  }

  /*! \brief Cell holding `record_id`, or nullptr. */
  const HexCell* CellOf(const std::string& record_id) const {
    for (const auto& cell : cells) {
      if (std::find(cell.member_ids.begin(), cell.member_ids.end(), record_id) != cell.member_ids.end()) {
        return &cell;
      }
    }
    return nullptr;
  }
};

/*! \brief Default capacity targeting about 200 cells. */
inline int DefaultCapacity(size_t num_points) {
  return std::max<int>(1, static_cast<int>((num_points + 199) / 200));
}

namespace detail {

inline double AngleGap(double a, double b) {
  double d = std::fmod(std::abs(a - b), 2.0 * std::numbers::pi);
  return d > std::numbers::pi ? 2.0 * std::numbers::pi - d : d;
}

}  // namespace detail

/*!
 * \brief Fills the honeycomb outward from the centroid of the points.
 *
 * Points are taken by increasing distance to the centroid (ties by record id).
 * Each goes to the non-full cell of the innermost non-full ring whose center
 * angle is closest to the point's angle about the centroid, ties to the smaller
 * spiral index. The origin cell accepts any angle. Once ceil(N / capacity) cells
 * are occupied, only occupied cells accept further points, so the outermost
 * ring does not fan out. Cell means are filled here; categories are set by
 * LabelCells.
 */
inline HoneycombLayout SpiralAssign(const std::vector<EmbeddedPoint>& points, int capacity) {
  if (points.empty()) throw Error(ErrorCode::kEmptyInput, "spiral_assign");
  if (capacity < 1) throw Error(ErrorCode::kInvalidSpec, "capacity", "capacity must be >= 1");
  HoneycombLayout layout;
  layout.capacity = capacity;
  double cx = 0.0, cy = 0.0;
  for (const auto& p : points) {
    cx += p.x;
    cy += p.y;
  }
  cx /= static_cast<double>(points.size());
  cy /= static_cast<double>(points.size());
  layout.centroid = {cx, cy};

  std::vector<std::pair<double, size_t>> order;
  order.reserve(points.size());
  for (size_t i = 0; i < points.size(); ++i) {
    order.emplace_back(std::hypot(points[i].x - cx, points[i].y - cy), i);
  }
  std::sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return points[a.second].record_id < points[b.second].record_id;
  });

  int ring = -1;
  std::vector<HexCoord> ring_cells;
  std::vector<double> ring_angles;
  std::vector<int> fill;
  int open_slots = 0;
  std::vector<std::vector<double>> latencies;
  auto open_next_ring = [&] {
    ++ring;
    ring_cells = HexRing(ring);
    ring_angles.clear();
    for (const auto& c : ring_cells) {
      auto [x, y] = HexCenter(c);
      ring_angles.push_back(std::atan2(y, x));
    }
    fill.assign(ring_cells.size(), 0);
    open_slots = static_cast<int>(ring_cells.size()) * capacity;
  };
  std::map<HexCoord, size_t> cell_pos;
  const size_t cell_budget = (points.size() + static_cast<size_t>(capacity) - 1) / static_cast<size_t>(capacity);

  for (const auto& [dist, idx] : order) {
    if (open_slots == 0) open_next_ring();
    const auto& p = points[idx];
    const double angle = std::atan2(p.y - cy, p.x - cx);
    int best = -1;
    double best_gap = 0.0;
    for (size_t c = 0; c < ring_cells.size(); ++c) {
      if (fill[c] >= capacity) continue;
      if (fill[c] == 0 && layout.cells.size() == cell_budget) continue;
      double gap = ring == 0 ? 0.0 : detail::AngleGap(angle, ring_angles[c]);
      if (best < 0 || gap < best_gap) {
        best = static_cast<int>(c);
        best_gap = gap;
      }
    }
    ++fill[best];
    --open_slots;
    const HexCoord coord = ring_cells[best];
    auto [it, inserted] = cell_pos.emplace(coord, layout.cells.size());
    if (inserted) {
      HexCell cell;
      cell.coord = coord;
      cell.ring = ring;
      cell.spiral_index = SpiralIndex(coord);
      layout.cells.push_back(std::move(cell));
      latencies.emplace_back();
    }
    layout.cells[it->second].member_ids.push_back(p.record_id);
    latencies[it->second].push_back(p.latency_ms);
  }
  for (size_t i = 0; i < layout.cells.size(); ++i) {
    double sum = 0.0;
    for (double l : latencies[i]) sum += l;
    layout.cells[i].mean_latency_ms = sum / static_cast<double>(latencies[i].size());
  }
  std::sort(layout.cells.begin(), layout.cells.end(),
            [](const HexCell& a, const HexCell& b) { return a.spiral_index < b.spiral_index; });
  return layout;
}

/*!
 * \brief Sets each cell's category to the majority label of its members (ties to
 *  the smaller label) and recomputes the category boundary edges.
 */
inline void LabelCells(HoneycombLayout& layout, const std::map<std::string, int>& labels) {
  for (auto& cell : layout.cells) {
    std::map<int, int> votes;
    for (const auto& id : cell.member_ids) {
      auto it = labels.find(id);
      if (it == labels.end()) throw Error(ErrorCode::kMissingLabel, id);
      ++votes[it->second];
    }
    int best = 0, best_count = -1;
    for (const auto& [label, count] : votes) {
      if (count > best_count) {
        best = label;
        best_count = count;
      }
    }
    cell.category = best;
  }
  layout.boundary_edges.clear();
  for (const auto& cell : layout.cells) {
    for (const auto& dir : kHexDirections) {
      HexCoord nb{cell.coord.q + dir.q, cell.coord.r + dir.r};
      const HexCell* other = layout.Find(nb);
      if (other != nullptr && other->spiral_index > cell.spiral_index && other->category != cell.category) {
        layout.boundary_edges.emplace_back(cell.coord, nb);
      }
    }
  }
}

/*! \brief Quantile with linear interpolation between order statistics. */
inline double LinearQuantile(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const size_t lo = static_cast<size_t>(std::floor(h));
  const size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

/*!
 * \brief Assigns color bins 0 (lightest) .. 2 (darkest) by cell mean latency.
 *
 * Cuts are the 1/3 and 2/3 linear quantiles of the cell means; a mean equal to
 * a cut goes to the lower bin. With fewer than three distinct means the
 * distinct values are ranked into bins 0, 1.
 */
inline void LatencyBins(HoneycombLayout& layout) {
  if (layout.cells.empty()) return;
  std::vector<double> means;
  for (const auto& cell : layout.cells) means.push_back(cell.mean_latency_ms);
  std::vector<double> distinct = means;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 3) {
    for (auto& cell : layout.cells) {
      cell.color_bin = static_cast<int>(
          std::lower_bound(distinct.begin(), distinct.end(), cell.mean_latency_ms) - distinct.begin());
    }
    return;
  }
  const double low_cut = LinearQuantile(means, 1.0 / 3.0);
  const double high_cut = LinearQuantile(means, 2.0 / 3.0);
  for (auto& cell : layout.cells) {
    const double m = cell.mean_latency_ms;
    cell.color_bin = m <= low_cut ? 0 : (m <= high_cut ? 1 : 2);
  }
}

/*! \brief SpiralAssign + LabelCells + LatencyBins using each point's own label. */
inline HoneycombLayout BuildHoneycomb(const std::vector<EmbeddedPoint>& points, int capacity) {
  HoneycombLayout layout = SpiralAssign(points, capacity);
  std::map<std::string, int> labels;
  for (const auto& p : points) labels[p.record_id] = p.label;
  LabelCells(layout, labels);
  LatencyBins(layout);
  return layout;
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

inline constexpr double kSvgHexRadius = 12.0;
inline constexpr std::array<const char*, 3> kLatencyRamp = {"#deebf7", "#6baed6", "#08519c"};

/*! \brief Cell center in SVG space (circumradius 12, y down). */
inline std::pair<double, double> SvgPoint(double x, double y) {
  return {kSvgHexRadius * x, -kSvgHexRadius * y};
}

inline Json CoordToJson(HexCoord c) { return Json::array({c.q, c.r}); }

inline Json LayoutToJson(const HoneycombLayout& layout) {
  Json cells = Json::array();
  for (const auto& cell : layout.cells) {
    cells.push_back({{"coord", CoordToJson(cell.coord)},
                     {"ring", cell.ring},
                     {"member_ids", cell.member_ids},
                     {"category", cell.category},
                     {"mean_latency_ms", cell.mean_latency_ms},
                     {"color_bin", cell.color_bin},
                     {"group_means",
                      {{"DRAM", cell.group_means[0]}, {"SM", cell.group_means[1]}, {"GPU", cell.group_means[2]}}},
                     {"group_missing",
                      {{"DRAM", cell.group_missing[0]}, {"SM", cell.group_missing[1]}, {"GPU", cell.group_missing[2]}}},
                     {"merged_value", cell.merged_value},
                     {"dominant_group", ToString(cell.dominant_group)}});
  }
  Json edges = Json::array();
  for (const auto& [a, b] : layout.boundary_edges) edges.push_back({CoordToJson(a), CoordToJson(b)});
  return {{"capacity", layout.capacity},
          {"centroid", {layout.centroid.first, layout.centroid.second}},
          {"cells", cells},
          {"boundary_edges", edges}};
}

namespace detail {

inline std::string SvgNum(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", std::abs(v) < 5e-4 ? 0.0 : v);
  return buf;
}

/*! \brief Corner i of a pointy-top hex (corner 0 at 30 degrees), math frame, unit radius. */
inline std::pair<double, double> HexCorner(HexCoord c, int i) {
  auto [x, y] = HexCenter(c);
  const double angle = std::numbers::pi / 180.0 * (60.0 * i + 30.0);
  return {x + std::cos(angle), y + std::sin(angle)};
}

}  // namespace detail

/*!
 * \brief Honeycomb SVG body (no surrounding <svg> element): one hexagon per cell,
 *  then heavy strokes on category boundaries.
 */
inline std::string HoneycombSvgBody(const HoneycombLayout& layout) {
  std::string out = "<g class=\"cells\">\n";
  for (const auto& cell : layout.cells) {
    out += "<polygon points=\"";
    for (int i = 0; i < 6; ++i) {
      auto [x, y] = detail::HexCorner(cell.coord, i);
      auto [sx, sy] = SvgPoint(x, y);
      out += (i ? " " : "") + detail::SvgNum(sx) + "," + detail::SvgNum(sy);
    }
    out += "\" fill=\"" + std::string(kLatencyRamp[cell.color_bin]) +
           "\" stroke=\"#ffffff\" stroke-width=\"1\" data-q=\"" + std::to_string(cell.coord.q) +
           "\" data-r=\"" + std::to_string(cell.coord.r) + "\"/>\n";
  }
  out += "</g>\n<g class=\"boundaries\">\n";
  for (const auto& [a, b] : layout.boundary_edges) {
    // The shared side of neighbors a and b has corners i and i+1 (mod 6) of a,
    // where direction i points from a to b in HexCorner's angle frame.
    HexCoord d{b.q - a.q, b.r - a.r};
    int dir = static_cast<int>(std::find(kHexDirections.begin(), kHexDirections.end(), d) -
                               kHexDirections.begin());
    // kHexDirections[dir] sits at angle 60*dir; corners at 60*dir - 30 and 60*dir + 30.
    auto [x1, y1] = detail::HexCorner(a, (dir + 5) % 6);
    auto [x2, y2] = detail::HexCorner(a, dir);
    auto [sx1, sy1] = SvgPoint(x1, y1);
    auto [sx2, sy2] = SvgPoint(x2, y2);
    out += "<line x1=\"" + detail::SvgNum(sx1) + "\" y1=\"" + detail::SvgNum(sy1) + "\" x2=\"" +
           detail::SvgNum(sx2) + "\" y2=\"" + detail::SvgNum(sy2) +
           "\" stroke=\"#000000\" stroke-width=\"3\"/>\n";
  }
  out += "</g>\n";
  return out;
}

}  // namespace schedscope
