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
 * \file schedscope/embedding.hpp
 * \brief Deterministic 2D embedding (PCA) and clustering (k-means++, silhouette
 *  based k selection) of standardized feature matrices.
 */
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "schedscope/common.hpp"
#include "schedscope/features.hpp"

namespace schedscope {

struct Pca2Result {
  Eigen::MatrixXd coords;      // N x 2
  Eigen::MatrixXd components;  // D x 2, unit columns
  std::array<double, 2> explained{0.0, 0.0};
};

/*!
 * \brief Projects rows onto the top two eigenvectors of their covariance.
 *
 * Eigenvectors are sign-fixed so that their largest-magnitude component is
 * positive; equal eigenvalues are ordered by the column index of that component.
 */
inline Pca2Result Pca2(const Eigen::MatrixXd& matrix) {
  if (matrix.rows() < 2) throw Error(ErrorCode::kTooFewRows, "pca2", "need at least 2 rows");
  const Eigen::Index n = matrix.rows(), d = matrix.cols();
  Eigen::RowVectorXd mean = matrix.colwise().mean();
  Eigen::MatrixXd centered = matrix.rowwise() - mean;
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  Eigen::VectorXd values = solver.eigenvalues();
  Eigen::MatrixXd vectors = solver.eigenvectors();

  struct Pair {
    double value;
    Eigen::Index lead;  // index of the largest-magnitude component
    Eigen::VectorXd vec;
  };
  std::vector<Pair> pairs;
  for (Eigen::Index i = 0; i < d; ++i) {
    Eigen::VectorXd vec = vectors.col(i);
    Eigen::Index lead = 0;
    for (Eigen::Index j = 1; j < d; ++j) {
      if (std::abs(vec(j)) > std::abs(vec(lead)) + 1e-12) lead = j;
    }
    if (vec(lead) < 0) vec = -vec;
    pairs.push_back({std::max(values(i), 0.0), lead, vec});
  }
  const double scale = std::max(1.0, pairs.empty() ? 0.0 : values.cwiseAbs().maxCoeff());
  std::stable_sort(pairs.begin(), pairs.end(), [&](const Pair& a, const Pair& b) {
    if (std::abs(a.value - b.value) > 1e-12 * scale) return a.value > b.value;
    return a.lead < b.lead;
  });

  Pca2Result out;
  out.coords = Eigen::MatrixXd::Zero(n, 2);
  out.components = Eigen::MatrixXd::Zero(d, 2);
  const double total = cov.trace();
  for (int c = 0; c < 2 && c < static_cast<int>(pairs.size()); ++c) {
    out.components.col(c) = pairs[c].vec;
    out.coords.col(c) = centered * pairs[c].vec;
    out.explained[c] = total > 0.0 ? pairs[c].value / total : 0.0;
  }
  return out;
}

struct KMeansResult {
  std::vector<int> labels;
  Eigen::MatrixXd centroids;  // k x dims
  double wcss = 0.0;
  int iterations = 0;
};

namespace detail {

inline double SquaredDistance(const Eigen::MatrixXd& a, Eigen::Index i, const Eigen::MatrixXd& b,
                              Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

inline std::vector<int> AssignNearest(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids) {
  std::vector<int> labels(points.rows(), 0);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
      double dist = SquaredDistance(points, i, centroids, c);
      if (dist < best) {
        best = dist;
        labels[i] = static_cast<int>(c);
      }
    }
  }
  return labels;
}

/*!
 * \brief Recomputes centroids as member means. Each empty cluster takes the point
 *  farthest from its current centroid among clusters with more than one member.
 */
inline void UpdateCentroids(const Eigen::MatrixXd& points, std::vector<int>& labels,
                            Eigen::MatrixXd& centroids) {
  const Eigen::Index k = centroids.rows();
  std::vector<int> counts(k, 0);
  for (int label : labels) ++counts[label];
  for (Eigen::Index c = 0; c < k; ++c) {
    if (counts[c] > 0) continue;
    Eigen::Index victim = -1;
    double worst = -1.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      if (counts[labels[i]] <= 1) continue;
      double dist = SquaredDistance(points, i, centroids, labels[i]);
      if (dist > worst) {
        worst = dist;
        victim = i;
      }
    }
    if (victim < 0) break;  // unreachable while k <= N
    --counts[labels[victim]];
    labels[victim] = static_cast<int>(c);
    counts[c] = 1;
  }
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
  for (Eigen::Index i = 0; i < points.rows(); ++i) sums.row(labels[i]) += points.row(i);
  for (Eigen::Index c = 0; c < k; ++c) {
    if (counts[c] > 0) centroids.row(c) = sums.row(c) / static_cast<double>(counts[c]);
  }
}

}  // namespace detail

/*!
 * \brief Lloyd's k-means with k-means++ seeding.
 *
 * Iterates until the assignment reaches a fixpoint or 300 rounds. Ties in the
 * nearest-centroid search go to the smaller label.
 */
inline KMeansResult KMeans(const Eigen::MatrixXd& points, int k, uint64_t seed) {
  const Eigen::Index n = points.rows();
  if (k < 1) throw Error(ErrorCode::kKTooLarge, std::to_string(k), "k must be >= 1");
  if (k > n) throw Error(ErrorCode::kKTooLarge, std::to_string(k), "k exceeds number of points");
  Rng rng(seed);

  Eigen::MatrixXd centroids(k, points.cols());
  std::vector<bool> taken(n, false);
  Eigen::Index first = static_cast<Eigen::Index>(rng.Index(static_cast<size_t>(n)));
  centroids.row(0) = points.row(first);
  taken[first] = true;
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], detail::SquaredDistance(points, i, centroids, c - 1));
      total += nearest[i];
    }
    Eigen::Index pick = -1;
    if (total > 0.0) {
      double target = rng.Uniform() * total, acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += nearest[i];
        if (nearest[i] > 0.0 && acc > target) {
          pick = i;
          break;
        }
      }
      if (pick < 0) {
        for (Eigen::Index i = n - 1; i >= 0; --i) {
          if (nearest[i] > 0.0) {
            pick = i;
            break;
          }
        }
      }
    } else {
      // All remaining mass is zero (duplicates): take the first unused index.
      for (Eigen::Index i = 0; i < n && pick < 0; ++i) {
        if (!taken[i]) pick = i;
      }
    }
    taken[pick] = true;
    centroids.row(c) = points.row(pick);
  }

  KMeansResult out;
  out.labels = detail::AssignNearest(points, centroids);
  for (int iter = 1; iter <= 300; ++iter) {
    out.iterations = iter;
    detail::UpdateCentroids(points, out.labels, centroids);
    std::vector<int> next = detail::AssignNearest(points, centroids);
    if (next == out.labels) break;
    out.labels = std::move(next);
  }
  // Guarantees every label is used even if the loop ended on a degenerate split.
  std::vector<int> counts(k, 0);
  for (int label : out.labels) ++counts[label];
  if (std::count(counts.begin(), counts.end(), 0) > 0) {
    detail::UpdateCentroids(points, out.labels, centroids);
  }
  out.centroids = centroids;
  for (Eigen::Index i = 0; i < n; ++i) {
    out.wcss += detail::SquaredDistance(points, i, centroids, out.labels[i]);
  }
  return out;
}

/*!
 * \brief Mean silhouette coefficient with Euclidean distance.
 *
 * Points in singleton clusters score 0, as do points with a = b = 0.
 */
inline double MeanSilhouette(const Eigen::MatrixXd& points, const std::vector<int>& labels, int k) {
  const Eigen::Index n = points.rows();
  if (n == 0 || k < 2) return 0.0;
  std::vector<int> sizes(k, 0);
  for (int label : labels) ++sizes[label];
  double total = 0.0;
  std::vector<double> sums(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::fill(sums.begin(), sums.end(), 0.0);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j) sums[labels[j]] += (points.row(i) - points.row(j)).norm();
    }
    const int own = labels[i];
    if (sizes[own] <= 1) continue;
    const double a = sums[own] / (sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      if (c != own && sizes[c] > 0) b = std::min(b, sums[c] / sizes[c]);
    }
    const double denom = std::max(a, b);
    if (std::isfinite(b) && denom > 0.0) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

struct SelectKResult {
  int chosen_k = 0;
  std::map<int, double> silhouette;  // per evaluated k
  KMeansResult clustering;           // run for chosen_k
};

/*! \brief Picks the k in [k_min, min(k_max, N)] with the highest mean silhouette; ties to smaller k. */
inline SelectKResult SelectK(const Eigen::MatrixXd& points, int k_min, int k_max, uint64_t seed) {
  const int n = static_cast<int>(points.rows());
  if (k_min < 1 || n < k_min) {
    throw Error(ErrorCode::kTooFewRows, "select_k",
                std::to_string(n) + " rows for k_min " + std::to_string(k_min));
  }
  k_max = std::min(k_max, n);
  SelectKResult out;
  double best = -std::numeric_limits<double>::infinity();
  for (int k = k_min; k <= std::max(k_min, k_max); ++k) {
    KMeansResult run = KMeans(points, k, seed);
    double score = MeanSilhouette(points, run.labels, k);
    out.silhouette[k] = score;
    if (score > best + 1e-12) {
      best = score;
      out.chosen_k = k;
      out.clustering = std::move(run);
    }
  }
  return out;
}

/*! \brief Adjusted Rand index of two labelings of the same points. */
inline double AdjustedRandIndex(const std::vector<int>& a, const std::vector<int>& b) {
  const size_t n = a.size();
  if (n != b.size()) throw Error(ErrorCode::kInternal, "ari", "label vectors differ in length");
  std::map<std::pair<int, int>, double> table;
  std::map<int, double> rows, cols;
  for (size_t i = 0; i < n; ++i) {
    table[{a[i], b[i]}] += 1;
    rows[a[i]] += 1;
    cols[b[i]] += 1;
  }
  auto choose2 = [](double x) { return x * (x - 1) / 2.0; };
  double index = 0, sum_rows = 0, sum_cols = 0;
  for (const auto& [key, count] : table) index += choose2(count);
  for (const auto& [key, count] : rows) sum_rows += choose2(count);
  for (const auto& [key, count] : cols) sum_cols += choose2(count);
  const double total = choose2(static_cast<double>(n));
  if (total == 0) return 1.0;
  const double expected = sum_rows * sum_cols / total;
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

struct EmbedOptions {
  uint64_t seed = 42;
  std::optional<int> fixed_k;
  int k_min = 2;
  int k_max = 8;
};

struct Embedding2D {
  std::vector<std::string> record_ids;
  Eigen::MatrixXd coords;  // N x 2
  std::vector<int> labels;
  Eigen::MatrixXd centroids;  // chosen_k x 2
  int chosen_k = 0;
  std::array<double, 2> explained{0.0, 0.0};
  std::map<int, double> silhouette;
};

/*!
 * \brief Standardizes, projects and clusters the feature vectors.
 *
 * A fixed k larger than N is clamped to N; with fewer rows than k_min the
 * range collapses to [1, N].
 */
inline Embedding2D Embed(const std::vector<FeatureVector>& features, const EmbedOptions& options) {
  Embedding2D out;
  const int n = static_cast<int>(features.size());
  if (n == 0) throw Error(ErrorCode::kEmptyMatrix, "embed");
  for (const auto& fv : features) out.record_ids.push_back(fv.record_id);
  Standardized z = Standardize(FeatureMatrix(features));
  if (n == 1) {
    out.coords = Eigen::MatrixXd::Zero(1, 2);
  } else {
    Pca2Result pca = Pca2(z.values);
    out.coords = pca.coords;
    out.explained = pca.explained;
  }
  KMeansResult clustering;
  if (options.fixed_k) {
    out.chosen_k = std::clamp(*options.fixed_k, 1, n);
    clustering = KMeans(out.coords, out.chosen_k, options.seed);
  } else {
    int k_min = std::min(options.k_min, n);
    SelectKResult sel = SelectK(out.coords, k_min, options.k_max, options.seed);
    out.chosen_k = sel.chosen_k;
    out.silhouette = sel.silhouette;
    clustering = std::move(sel.clustering);
  }
  out.labels = clustering.labels;
  out.centroids = clustering.centroids;
  return out;
}

inline std::string EmbeddingCsv(const Embedding2D& embedding) {
  std::string out = "record_id,x,y,label\n";
  for (size_t i = 0; i < embedding.record_ids.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    out += embedding.record_ids[i] + "," + FormatDouble(embedding.coords(row, 0)) + "," +
           FormatDouble(embedding.coords(row, 1)) + "," + std::to_string(embedding.labels[i]) + "\n";
  }
  return out;
}

}  // namespace schedscope
