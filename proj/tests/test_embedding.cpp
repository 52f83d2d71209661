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

#include <gtest/gtest.h>

#include <array>
#include <set>
#include <vector>

#include "oracles.hpp"
#include "schedscope/embedding.hpp"

namespace schedscope {
namespace {

Eigen::MatrixXd PcaFixture() {
  Eigen::MatrixXd m(5, 4);
  m << 2, 0.5, 1, -1,
       1, 1.5, 0, 0.5,
       3, -0.5, 2, 1,
       0, 2, -1, 0,
       4, 1, 0.5, -0.5;
  return m;
}

// Frozen from the characteristic-polynomial oracle below.
constexpr std::array<double, 5> kPc1 = {0.40374245810648142, -1.2438124095120144, 2.1402505640788013,
                                        -2.7278013300334764, 1.4276207173602081};
constexpr std::array<double, 5> kPc2 = {-0.28494881578851877, 0.41055006541980243, 1.2627090106369032,
                                        0.022823188620224121, -1.4111334488884110};
constexpr double kExplained1 = 0.74385616831802131;
constexpr double kExplained2 = 0.18094338386271726;

Eigen::MatrixXd ToMatrix(const std::vector<std::array<double, 2>>& pts) {
  Eigen::MatrixXd m(pts.size(), 2);
  for (size_t i = 0; i < pts.size(); ++i) m.row(i) << pts[i][0], pts[i][1];
  return m;
}

std::vector<std::array<double, 2>> Blob(Rng& rng, double cx, double cy, double radius, int n) {
  std::vector<std::array<double, 2>> out;
  while (static_cast<int>(out.size()) < n) {
    double x = 2 * rng.Uniform() - 1, y = 2 * rng.Uniform() - 1;
    if (x * x + y * y <= 1) out.push_back({cx + radius * x, cy + radius * y});
  }
  return out;
}

TEST(Pca2, MatchesCharacteristicPolynomialOracle) {
  Eigen::MatrixXd m = PcaFixture();
  const int n = 5, d = 4;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (int i = 0; i < n; ++i) mean += m.row(i).transpose() / n;
  for (int a = 0; a < d; ++a) {
    for (int b = 0; b < d; ++b) {
      for (int i = 0; i < n; ++i) cov(a, b) += (m(i, a) - mean(a)) * (m(i, b) - mean(b)) / n;
    }
  }
  auto roots = oracle::RealRoots(oracle::CharPoly(cov), 10.0);
  ASSERT_GE(roots.size(), 2u);
  double trace = cov.trace();

  auto pca = Pca2(m);
  for (int c = 0; c < 2; ++c) {
    Eigen::VectorXd v = oracle::EigenvectorFor(cov, roots[c]);
    EXPECT_NEAR(pca.explained[c], roots[c] / trace, 1e-6);
    for (int i = 0; i < n; ++i) {
      double coord = (m.row(i).transpose() - mean).dot(v);
      EXPECT_NEAR(pca.coords(i, c), coord, 1e-6) << "row " << i << " pc " << c;
    }
  }
}

TEST(Pca2, FrozenFixtureValues) {
  auto pca = Pca2(PcaFixture());
  for (int i = 0; i < 5; ++i) {
    EXPECT_NEAR(pca.coords(i, 0), kPc1[i], 1e-6);
    EXPECT_NEAR(pca.coords(i, 1), kPc2[i], 1e-6);
  }
  EXPECT_NEAR(pca.explained[0], kExplained1, 1e-6);
  EXPECT_NEAR(pca.explained[1], kExplained2, 1e-6);
}

TEST(Pca2, AxisAlignedVariance) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(4, 22);
  m.col(0) << -1.5, 0.5, 2.0, -1.0;
  auto pca = Pca2(m);
  EXPECT_EQ(pca.coords.col(1).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_NEAR(pca.explained[0], 1.0, 1e-12);
  EXPECT_NEAR(pca.explained[1], 0.0, 1e-12);
  EXPECT_NEAR(pca.coords(2, 0), 2.0, 1e-12);  // largest component of the axis is positive
}

TEST(Pca2, CollinearRankOne) {
  Eigen::MatrixXd m(3, 22);
  Rng rng(1);
  Eigen::RowVectorXd dir(22), base(22);
  for (int j = 0; j < 22; ++j) {
    dir(j) = rng.Normal();
    base(j) = rng.Normal();
  }
  for (int i = 0; i < 3; ++i) m.row(i) = base + (i * 1.7 - 0.3) * dir;
  auto pca = Pca2(m);
  EXPECT_NEAR(pca.explained[0], 1.0, 1e-9);
  EXPECT_LE(pca.coords.col(1).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Pca2, TooFewRows) { EXPECT_THROW(Pca2(Eigen::MatrixXd::Ones(1, 22)), Error); }

TEST(Pca2Property, TranslationInvariantAndProjectionBound) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 3 + static_cast<int>(rng.Index(30));
    Eigen::MatrixXd m(n, 22);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < 22; ++j) m(i, j) = rng.Normal() * (1 + j % 5);
    }
    Eigen::RowVectorXd shift(22);
    for (int j = 0; j < 22; ++j) shift(j) = 50 * rng.Normal();
    auto a = Pca2(m);
    auto b = Pca2(m.rowwise() + shift);
    EXPECT_LE((a.coords - b.coords).cwiseAbs().maxCoeff(), 1e-9);

    Eigen::MatrixXd centered = m.rowwise() - m.colwise().mean();
    double in_var = centered.squaredNorm() / n;
    Eigen::MatrixXd c2 = a.coords.rowwise() - a.coords.colwise().mean();
    EXPECT_LE(c2.squaredNorm() / n, in_var + 1e-9);
  }
}

TEST(KMeans, SingleClusterIsMean) {
  std::vector<std::array<double, 2>> pts = {{0, 0}, {2, 1}, {4, -1}, {6, 4}};
  auto res = KMeans(ToMatrix(pts), 1, 7);
  EXPECT_NEAR(res.centroids(0, 0), 3.0, 1e-12);
  EXPECT_NEAR(res.centroids(0, 1), 1.0, 1e-12);
  EXPECT_NEAR(res.wcss, oracle::Wcss(pts, res.labels, 1), 1e-9);
}

TEST(KMeans, LineFixtureMatchesBruteForce) {
  std::vector<std::array<double, 2>> pts = {{0, 0}, {0.1, 0}, {10, 0}, {10.1, 0}};
  auto expected = oracle::BruteForcePartition(pts, 2);
  for (uint64_t seed = 0; seed < 20; ++seed) {
    auto res = KMeans(ToMatrix(pts), 2, seed);
    EXPECT_TRUE(oracle::SamePartition(res.labels, expected)) << "seed " << seed;
  }
}

TEST(KMeans, KTooLarge) {
  std::vector<std::array<double, 2>> pts = {{0, 0}, {0.1, 0}, {10, 0}, {10.1, 0}};
  try {
    KMeans(ToMatrix(pts), 5, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kKTooLarge);
  }
}

TEST(KMeansProperty, ReproducibleAndFixpoint) {
  Rng rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 5 + static_cast<int>(rng.Index(80));
    const int k = 1 + static_cast<int>(rng.Index(std::min(n, 6)));
    Eigen::MatrixXd pts(n, 2);
    for (int i = 0; i < n; ++i) pts.row(i) << rng.Normal() * 3, rng.Normal();
    auto a = KMeans(pts, k, 99);
    auto b = KMeans(pts, k, 99);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_EQ(a.centroids, b.centroids);
    std::set<int> used(a.labels.begin(), a.labels.end());
    EXPECT_EQ(static_cast<int>(used.size()), k);
    for (int i = 0; i < n; ++i) {
      double own = (pts.row(i) - a.centroids.row(a.labels[i])).squaredNorm();
      for (int c = 0; c < k; ++c) EXPECT_LE(own, (pts.row(i) - a.centroids.row(c)).squaredNorm() + 1e-12);
    }
  }
}

TEST(MeanSilhouette, AgreesWithDoubleLoop) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::array<double, 2>> pts;
    std::vector<int> labels;
    const int n = 3 + static_cast<int>(rng.Index(30));
    for (int i = 0; i < n; ++i) {
      pts.push_back({rng.Normal(), rng.Normal()});
      labels.push_back(static_cast<int>(rng.Index(3)));
    }
    labels[0] = 0;
    labels[1] = 1;
    labels[2] = 2;
    EXPECT_NEAR(MeanSilhouette(ToMatrix(pts), labels, 3), oracle::Silhouette(pts, labels), 1e-12);
  }
}

TEST(SelectK, ThreeBlobs) {
  Rng rng(4);
  std::vector<std::array<double, 2>> pts;
  for (auto [cx, cy] : {std::pair{0.0, 0.0}, {10.0, 0.0}, {0.0, 10.0}}) {
    auto blob = Blob(rng, cx, cy, 0.5, 20);
    pts.insert(pts.end(), blob.begin(), blob.end());
  }
  auto sel = SelectK(ToMatrix(pts), 2, 8, 42);
  EXPECT_EQ(sel.chosen_k, 3);
  for (const auto& [k, score] : sel.silhouette) {
    auto run = KMeans(ToMatrix(pts), k, 42);
    EXPECT_NEAR(score, oracle::Silhouette(pts, run.labels), 1e-12);
    if (k != 3) {
      EXPECT_LT(score, sel.silhouette.at(3));
    }
  }
}

TEST(SelectK, TwoCopiesFarApart) {
  Rng rng(6);
  auto cloud = Blob(rng, 0, 0, 1.0, 15);
  std::vector<std::array<double, 2>> pts = cloud;
  for (auto p : cloud) pts.push_back({p[0] + 100.0, p[1]});
  auto sel = SelectK(ToMatrix(pts), 2, 8, 42);
  EXPECT_EQ(sel.chosen_k, 2);
  auto run = KMeans(ToMatrix(pts), 2, 42);
  EXPECT_NEAR(sel.silhouette.at(2), oracle::Silhouette(pts, run.labels), 1e-12);
}

TEST(SelectK, RangeCollapse) {
  std::vector<std::array<double, 2>> pts = {{0, 0}, {1, 1}};
  EXPECT_EQ(SelectK(ToMatrix(pts), 2, 8, 1).chosen_k, 2);
  EXPECT_THROW(SelectK(ToMatrix(std::vector<std::array<double, 2>>{{0.0, 0.0}}), 2, 8, 1), Error);
}

TEST(AdjustedRandIndex, KnownValues) {
  EXPECT_DOUBLE_EQ(AdjustedRandIndex({0, 0, 1, 1}, {1, 1, 0, 0}), 1.0);
  // Classic example: ARI of {0,0,0,1,1,1} vs {0,0,1,1,2,2} is 0.24242...
  EXPECT_NEAR(AdjustedRandIndex({0, 0, 0, 1, 1, 1}, {0, 0, 1, 1, 2, 2}), 8.0 / 33.0, 1e-12);
}

TEST(EmbedProperty, PlantedClustersRecovered) {
  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const int k = 2 + trial % 4;
    std::vector<FeatureVector> fvs;
    std::vector<int> plant;
    std::vector<std::array<double, kNumFeatures>> centers(k);
    for (auto& c : centers) {
      for (double& v : c) v = 10.0 * rng.Normal();
    }
    for (int i = 0; i < 30 * k; ++i) {
      FeatureVector fv;
      fv.record_id = "r" + std::to_string(i);
      const int c = i % k;
      for (int f = 0; f < kNumFeatures; ++f) fv.values[f] = centers[c][f] + 0.1 * rng.Normal();
      fvs.push_back(fv);
      plant.push_back(c);
    }
    auto emb = Embed(fvs, EmbedOptions{});
    EXPECT_GE(AdjustedRandIndex(emb.labels, plant), 0.9) << "k " << k;
  }
}

}  // namespace
}  // namespace schedscope
