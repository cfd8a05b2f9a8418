#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "test_support.hpp"

using namespace twophase;
using tp_test::error_kind;

namespace {

PredictionDump dump_of(std::vector<std::vector<double>> probs, std::vector<int> labels) {
  PredictionDump d;
  d.target_dataset_id = "t";
  d.source_label_count = probs.front().size();
  d.probs = std::move(probs);
  d.labels = std::move(labels);
  return d;
}

// Brute-force evaluation: for each row, sum over z of P(y_i, z) / P(z) * theta_iz,
// with P(y, z) and P(z) recomputed from scratch by scanning all rows.
double leep_brute_force(const PredictionDump& d) {
  const auto n = static_cast<double>(d.rows());
  double total = 0.0;
  for (std::size_t i = 0; i < d.rows(); ++i) {
    double eep = 0.0;
    for (std::size_t z = 0; z < d.source_label_count; ++z) {
      double joint = 0.0, marginal = 0.0;
      for (std::size_t r = 0; r < d.rows(); ++r) {
        marginal += d.probs[r][z] / n;
        if (d.labels[r] == d.labels[i]) joint += d.probs[r][z] / n;
      }
      if (marginal > 0.0) eep += joint / marginal * d.probs[i][z];
    }
    total += std::log(eep);
  }
  return total / n;
}

PredictionDump random_dump(std::mt19937_64& rng, std::size_t rows, std::size_t z, int y) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::vector<std::vector<double>> probs(rows, std::vector<double>(z));
  std::vector<int> labels(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (auto& p : probs[i]) s += (p = u(rng));
    for (auto& p : probs[i]) p /= s;
    labels[i] = static_cast<int>(i % static_cast<std::size_t>(y));
  }
  return dump_of(probs, labels);
}

}  // namespace

TEST(Leep, WorkedExample) {
  const auto d = dump_of({{0.9, 0.1}, {0.8, 0.2}, {0.2, 0.8}, {0.1, 0.9}}, {0, 0, 1, 1});
  // Joint table: P(0,0)=0.425 P(0,1)=0.075 P(1,0)=0.075 P(1,1)=0.425, marginals 0.5.
  const auto joint = empirical_joint(d);
  EXPECT_NEAR(joint[0][0], 0.425, 1e-12);
  EXPECT_NEAR(joint[1][0], 0.075, 1e-12);
  const double expected = (std::log(0.78) + std::log(0.71)) / 2.0;
  EXPECT_NEAR(leep_score(d), expected, 1e-12);
  EXPECT_NEAR(leep_brute_force(d), expected, 1e-12);
  EXPECT_NEAR(leep_score(d), -0.29551, 1e-4);
}

TEST(Leep, PerfectOneHotIsZero) {
  const auto d = dump_of({{0, 1, 0}, {1, 0, 0}, {0, 0, 1}, {0, 1, 0}}, {1, 0, 2, 1});
  EXPECT_EQ(leep_score(d), 0.0);
}

TEST(Leep, UniformPredictorGivesNegativeLabelEntropy) {
  std::vector<std::vector<double>> probs(7, std::vector<double>(5, 0.2));
  const auto d = dump_of(probs, {0, 0, 0, 1, 1, 2, 2});
  const double h = 3.0 / 7 * std::log(3.0 / 7) + 2 * (2.0 / 7 * std::log(2.0 / 7));
  EXPECT_NEAR(leep_score(d), h, 1e-12);
}

TEST(Leep, MatchesBruteForceOnRandomDumps) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const auto d = random_dump(rng, 5 + static_cast<std::size_t>(trial % 20), 2 + static_cast<std::size_t>(trial % 5), 1 + trial % 4);
    const double s = leep_score(d);
    EXPECT_NEAR(s, leep_brute_force(d), 1e-12);
    EXPECT_LE(s, 0.0);
  }
}

TEST(Leep, InvariantUnderColumnPermutationAndRowDuplication) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const auto d = random_dump(rng, 12, 4, 3);
    const double base = leep_score(d);
    std::vector<std::size_t> perm(4);
    std::iota(perm.begin(), perm.end(), 0u);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto permuted = d;
    for (std::size_t i = 0; i < d.rows(); ++i)
      for (std::size_t z = 0; z < 4; ++z) permuted.probs[i][z] = d.probs[i][perm[z]];
    EXPECT_NEAR(leep_score(permuted), base, 1e-12);

    auto tripled = d;
    for (int k = 0; k < 2; ++k) {
      tripled.probs.insert(tripled.probs.end(), d.probs.begin(), d.probs.end());
      tripled.labels.insert(tripled.labels.end(), d.labels.begin(), d.labels.end());
    }
    EXPECT_NEAR(leep_score(tripled), base, 1e-12);

    // Relabeling the target classes is also harmless.
    auto relabeled = d;
    for (auto& y : relabeled.labels) y = 2 - y;
    EXPECT_NEAR(leep_score(relabeled), base, 1e-12);
  }
}

TEST(Leep, MoreInformativeDumpsScoreHigher) {
  double prev = -std::numeric_limits<double>::infinity();
  for (double q : {0.0, 0.2, 0.4, 0.6, 0.8, 0.95}) {
    const double s = leep_score(synthetic_dump("t", q, 300, 4, 3, 5));
    EXPECT_GT(s, prev - 0.02) << "q=" << q;
    prev = s;
  }
  EXPECT_GT(leep_score(synthetic_dump("t", 0.9, 300, 4, 3, 5)), leep_score(synthetic_dump("t", 0.1, 300, 4, 3, 5)));
}

TEST(Leep, FloorClampsRowLikelihoods) {
  // Every row feeds its own joint cell, so valid dumps never reach a zero likelihood; the floor
  // still bounds each row from below when configured.
  const auto d = dump_of({{0.9, 0.1}, {0.8, 0.2}, {0.2, 0.8}, {0.1, 0.9}}, {0, 0, 1, 1});
  EXPECT_NEAR(leep_score(d, LeepOptions{0.9}), std::log(0.9), 1e-12);
  EXPECT_NEAR(leep_score(d, LeepOptions{0.75}), (std::log(0.78) + std::log(0.75)) / 2.0, 1e-12);
  PredictionDump empty = dump_of({{1.0}}, {0});
  empty.probs.clear();
  empty.labels.clear();
  EXPECT_EQ(error_kind([&] { leep_score(empty); }), ErrorKind::no_data);
}

TEST(Normalize, MinMaxAndDegenerate) {
  const auto n = normalize_scores({{"a", -1.0, 0}, {"b", -0.5, 0}, {"c", 0.0, 0}});
  EXPECT_DOUBLE_EQ(n[0].normalized, 0.0);
  EXPECT_DOUBLE_EQ(n[1].normalized, 0.5);
  EXPECT_DOUBLE_EQ(n[2].normalized, 1.0);
  const auto same = normalize_scores({{"a", -0.3, 0}, {"b", -0.3, 0}});
  EXPECT_EQ(same[0].normalized, 1.0);
  EXPECT_EQ(same[1].normalized, 1.0);
  EXPECT_EQ(error_kind([] { normalize_scores({}); }), ErrorKind::no_data);
  EXPECT_EQ(proxy_scores_csv(n).substr(0, 27), "model_id,raw_leep,normalize");
}
