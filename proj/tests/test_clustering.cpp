#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "test_support.hpp"

using namespace twophase;
using tp_test::error_kind;
using tp_test::make_matrix;

namespace {

DistanceMatrix points_distance(const std::vector<std::pair<double, double>>& pts) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < pts.size(); ++i) ids.push_back("p" + std::string(1, static_cast<char>('a' + i)));
  DistanceMatrix d(ids);
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      d.set(i, j, std::hypot(pts[i].first - pts[j].first, pts[i].second - pts[j].second) / 2.0);
  return d;
}

DistanceMatrix random_distance(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::pair<double, double>> pts(n);
  for (auto& p : pts) p = {u(rng), u(rng)};
  return points_distance(pts);
}

// Naive average linkage: cluster distance recomputed from all point pairs at every step.
struct NaiveMerge {
  double height;
  std::vector<std::vector<std::size_t>> partition;
};

std::vector<NaiveMerge> naive_average_linkage(const DistanceMatrix& d) {
  std::vector<std::vector<std::size_t>> clusters;
  for (std::size_t i = 0; i < d.size(); ++i) clusters.push_back({i});
  std::vector<NaiveMerge> out;
  while (clusters.size() > 1) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < clusters.size(); ++i)
      for (std::size_t j = i + 1; j < clusters.size(); ++j) {
        double s = 0.0;
        for (auto a : clusters[i])
          for (auto b : clusters[j]) s += d(a, b);
        s /= static_cast<double>(clusters[i].size() * clusters[j].size());
        if (s < best) best = s, bi = i, bj = j;
      }
    clusters[bi].insert(clusters[bi].end(), clusters[bj].begin(), clusters[bj].end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bj));
    auto part = clusters;
    for (auto& c : part) std::sort(c.begin(), c.end());
    std::sort(part.begin(), part.end());
    out.push_back({best, part});
  }
  return out;
}

std::vector<std::vector<std::size_t>> partition_of(const std::vector<std::size_t>& labels) {
  std::map<std::size_t, std::vector<std::size_t>> g;
  for (std::size_t i = 0; i < labels.size(); ++i) g[labels[i]].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  for (auto& [k, v] : g) out.push_back(v);
  std::sort(out.begin(), out.end());
  return out;
}

// Silhouette straight from the definition.
double silhouette_oracle(const std::vector<std::size_t>& labels, const DistanceMatrix& d) {
  const auto parts = partition_of(labels);
  if (parts.size() < 2) return 0.0;
  bool any = false;
  for (const auto& p : parts) any |= p.size() > 1;
  if (!any) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& own = *std::find_if(parts.begin(), parts.end(), [&](const auto& p) { return std::count(p.begin(), p.end(), i); });
    if (own.size() == 1) continue;
    double a = 0.0;
    for (auto j : own) a += d(i, j);
    a /= static_cast<double>(own.size() - 1);
    double b = std::numeric_limits<double>::infinity();
    for (const auto& p : parts) {
      if (&p == &own) continue;
      double s = 0.0;
      for (auto j : p) s += d(i, j);
      b = std::min(b, s / static_cast<double>(p.size()));
    }
    total += (b - a) / std::max(a, b);
  }
  return total / static_cast<double>(labels.size());
}

double sse_of(const std::vector<std::vector<double>>& pts, const std::vector<std::size_t>& labels, std::size_t k) {
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> mean(pts[0].size(), 0.0);
    std::size_t n = 0;
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (labels[i] == c) {
        ++n;
        for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += pts[i][j];
      }
    if (n == 0) continue;
    for (auto& v : mean) v /= static_cast<double>(n);
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (labels[i] == c) total += squared_distance(pts[i], mean);
  }
  return total;
}

}  // namespace

TEST(Silhouette, HandComputedExample) {
  // Points on a line at 0, 0.1, 0.9, 1.0 (distances scaled by 1/2 in points_distance).
  const auto d = points_distance({{0, 0}, {0.1, 0}, {0.9, 0}, {1.0, 0}});
  // a = 0.05, b = (0.45 + 0.5) / 2 = 0.475 for the outer points; for inner points a = 0.05, b = (0.4 + 0.45) / 2.
  const double outer = (0.475 - 0.05) / 0.475;
  const double inner = (0.425 - 0.05) / 0.425;
  EXPECT_NEAR(silhouette({0, 0, 1, 1}, d), (2 * outer + 2 * inner) / 4, 1e-12);
  EXPECT_EQ(silhouette({0, 0, 0, 0}, d), 0.0);
  EXPECT_EQ(silhouette({0, 1, 2, 3}, d), 0.0);
}

TEST(Silhouette, MatchesDefinitionOnRandomPartitions) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 3 + trial % 8;
    const auto d = random_distance(n, rng);
    std::vector<std::size_t> labels(n);
    for (auto& l : labels) l = std::uniform_int_distribution<std::size_t>(0, 3)(rng);
    EXPECT_NEAR(silhouette(labels, d), silhouette_oracle(labels, d), 1e-12);
  }
}

TEST(Agglomerate, AverageLinkageMatchesNaiveRecomputation) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 2 + trial % 9;
    const auto d = random_distance(n, rng);
    const auto tree = agglomerate(d, Linkage::average);
    const auto naive = naive_average_linkage(d);
    ASSERT_EQ(tree.merges.size(), naive.size());
    for (std::size_t m = 0; m < naive.size(); ++m) {
      EXPECT_NEAR(tree.merges[m].height, naive[m].height, 1e-12);
      EXPECT_EQ(partition_of(tree.labels_after(m + 1)), naive[m].partition);
    }
  }
}

TEST(Agglomerate, AverageLinkageHeightsAreMonotone) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const auto tree = agglomerate(random_distance(12, rng));
    for (std::size_t m = 1; m < tree.merges.size(); ++m) EXPECT_GE(tree.merges[m].height, tree.merges[m - 1].height - 1e-12);
  }
}

TEST(Agglomerate, TiesBreakByLexicographicIds) {
  DistanceMatrix d({"c", "a", "b", "d"});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j) d.set(i, j, 0.5);
  const auto tree = agglomerate(d);
  // First merge joins a and b (slots 1, 2), then that cluster (min id a) with c.
  EXPECT_EQ(tree.merges[0].left, 1u);
  EXPECT_EQ(tree.merges[0].right, 2u);
  EXPECT_EQ(partition_of(tree.labels_after(2)), (std::vector<std::vector<std::size_t>>{{0, 1, 2}, {3}}));
}

TEST(Hierarchical, ThresholdCutIsStrict) {
  const auto d = points_distance({{0, 0}, {0.2, 0}, {1.0, 0}, {1.4, 0}});
  // Merge heights: 0.1 (a,b), 0.2 (c,d), then the rest.
  EXPECT_EQ(hierarchical_cluster(d, CutRule::at(0.1)).clusters.size(), 4u);
  EXPECT_EQ(hierarchical_cluster(d, CutRule::at(0.1000001)).clusters.size(), 3u);
  EXPECT_EQ(hierarchical_cluster(d, CutRule::at(0.3)).clusters, (std::vector<std::vector<std::string>>{{"pa", "pb"}, {"pc", "pd"}}));
  EXPECT_EQ(hierarchical_cluster(d, CutRule::at(2.0)).clusters.size(), 1u);
}

TEST(Hierarchical, AutoCutMaximizesSilhouetteOverAllCuts) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 3 + trial % 9;
    const auto d = random_distance(n, rng);
    const auto tree = agglomerate(d);
    double best = -1.0;
    for (std::size_t m = 0; m <= tree.merges.size(); ++m) best = std::max(best, silhouette_oracle(tree.labels_after(m), d));
    const auto c = hierarchical_cluster(d);
    ASSERT_TRUE(c.silhouette.has_value());
    EXPECT_NEAR(*c.silhouette, best, 1e-12);
  }
}

TEST(Hierarchical, ClustersAreCanonical) {
  const auto d = points_distance({{1.0, 0}, {0, 0}, {1.05, 0}, {0.05, 0}});
  const auto c = hierarchical_cluster(d);
  EXPECT_EQ(c.clusters, (std::vector<std::vector<std::string>>{{"pa", "pc"}, {"pb", "pd"}}));
  EXPECT_EQ(c.cluster_of("pd"), 1u);
  EXPECT_EQ(error_kind([&] { c.cluster_of("zz"); }), ErrorKind::unknown_id);
}

TEST(KMeans, FindsOptimalTwoPartitionOnSeparatedData) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> noise(0.0, 0.03);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 4 + trial % 7;
    std::vector<std::vector<double>> pts(n);
    for (std::size_t i = 0; i < n; ++i) pts[i] = {(i % 2 ? 0.8 : 0.2) + noise(rng), 0.5 + noise(rng)};
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t mask = 1; mask + 1 < (1u << n); ++mask) {
      std::vector<std::size_t> labels(n);
      for (std::size_t i = 0; i < n; ++i) labels[i] = (mask >> i) & 1u;
      best = std::min(best, sse_of(pts, labels, 2));
    }
    const auto res = kmeans(pts, 2, static_cast<std::uint64_t>(trial));
    EXPECT_NEAR(sse_of(pts, res.assignment, 2), best, 1e-12);
  }
}

TEST(KMeans, SseNeverIncreasesAndRunIsDeterministic) {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<double>> pts(30, std::vector<double>(4));
    for (auto& p : pts)
      for (auto& v : p) v = u(rng);
    const auto a = kmeans(pts, 1 + trial % 6, 42);
    for (std::size_t i = 1; i < a.sse_history.size(); ++i) EXPECT_LE(a.sse_history[i], a.sse_history[i - 1] + 1e-12);
    EXPECT_LE(a.iterations, 100u);
    const auto b = kmeans(pts, 1 + trial % 6, 42);
    EXPECT_EQ(a.assignment, b.assignment);
  }
}

TEST(KMeans, DuplicatePointsAndBadK) {
  const std::vector<std::vector<double>> same(5, std::vector<double>{0.3, 0.3});
  const auto res = kmeans(same, 3, 1);
  EXPECT_EQ(res.sse_history.back(), 0.0);
  EXPECT_EQ(error_kind([&] { kmeans(same, 0, 1); }), ErrorKind::config);
  EXPECT_EQ(error_kind([&] { kmeans(same, 6, 1); }), ErrorKind::config);
}

TEST(KMeans, ImputesMissingWithColumnMean) {
  const auto m = make_matrix({{0.2, NAN}, {0.4, 0.6}, {0.6, 0.8}});
  const auto v = imputed_vectors(m);
  EXPECT_DOUBLE_EQ(v[0][1], 0.7);
  const auto c = kmeans_cluster(m, 2, 0);
  std::size_t members = 0;
  for (const auto& cl : c.clusters) members += cl.size();
  EXPECT_EQ(members, 3u);
}

TEST(Representative, HighestAverageThenSmallestId) {
  const auto m = make_matrix({{0.5, 0.5}, {0.6, 0.4}, {0.7, 0.1}, {0.2, 0.2}});
  ModelClustering c;
  c.clusters = {{"m0", "m1", "m2"}, {"m3"}};
  // m0 and m1 both average 0.5.
  EXPECT_EQ(select_representative(c, m), (std::vector<std::string>{"m0", "m3"}));
}

TEST(ClusteringJson, RoundTripAndValidation) {
  ModelClustering c;
  c.method = ClusterMethod::kmeans;
  c.clusters = {{"a", "b"}, {"c"}};
  c.representatives = {"b", "c"};
  c.silhouette = 0.25;
  const auto back = clustering_from_json(clustering_to_json(c));
  EXPECT_EQ(back.clusters, c.clusters);
  EXPECT_EQ(back.representatives, c.representatives);
  EXPECT_EQ(back.silhouette, c.silhouette);
  auto overlap = clustering_to_json(c);
  overlap["clusters"][1]["members"] = {"a"};
  overlap["clusters"][1]["representative"] = "a";
  EXPECT_EQ(error_kind([&] { clustering_from_json(overlap); }), ErrorKind::duplicate_id);
  EXPECT_EQ(error_kind([] { parse_cluster_method("spectral"); }), ErrorKind::config);
}

TEST(PlantedBlocks, HierarchicalAndKMeansRecoverBlocks) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ScenarioSpec spec;
    spec.blocks = {4, 3, 5};
    const auto b = generate_synthetic_scenario(spec, seed);
    std::set<std::vector<std::string>> planted;
    std::map<std::string, std::vector<std::string>> by_tag;
    for (const auto& m : b.repository.models()) by_tag[m.tags.front()].push_back(m.id);
    for (const auto& [tag, ids] : by_tag) planted.insert(ids);
    const auto dist = distance_matrix(model_vectors(b.matrix));
    const auto h = hierarchical_cluster(dist);
    EXPECT_EQ(std::set<std::vector<std::string>>(h.clusters.begin(), h.clusters.end()), planted) << "seed " << seed;
  }
}
