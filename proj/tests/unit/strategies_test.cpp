#include <cmath>
#include <numeric>

#include "activetest/strategies.hpp"
#include "test_util.hpp"

using namespace activetest;
using activetest::testing::code_of;

namespace {

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

std::size_t argmax_in(const std::vector<double>& s, const std::vector<std::size_t>& pool) {
  std::size_t best = pool.front();
  for (auto i : pool) {
    if (s[i] > s[best]) best = i;
  }
  return best;
}

}  // namespace

TEST(Names, RoundTrip) {
  for (auto k : {StrategyKind::kRandom, StrategyKind::kStratifiedRandom, StrategyKind::kCoverage,
                 StrategyKind::kUncertaintyMi, StrategyKind::kUncertaintyGp,
                 StrategyKind::kSurrogateRf, StrategyKind::kSurrogateSvm,
                 StrategyKind::kAgreement}) {
    EXPECT_EQ(parse_strategy(to_string(k)), k);
  }
  EXPECT_EQ(code_of([] { parse_strategy("bald"); }), ErrorCode::kInvalidArgument);
}

TEST(Random, ConstantScoresAndUniformSelection) {
  EXPECT_EQ(random_scores(5), std::vector<double>(5, 1.0));
  EXPECT_EQ(random_scores(1), std::vector<double>(1, 1.0));
  const auto s = random_scores(5);
  for (double eps : {0.0, 0.1, 1.0}) {
    for (double p : selection_distribution(s, iota(5), eps)) EXPECT_DOUBLE_EQ(p, 0.2);
  }
  EXPECT_DOUBLE_EQ(weighting_probability(s, iota(5), 3, 0.1), 0.2);
}

TEST(Stratified, Quotas) {
  EXPECT_EQ(stratified_quota(std::vector<std::int64_t>{0, 1, 0, 1}, 2, 10),
            (std::vector<std::size_t>{5, 5}));
  EXPECT_EQ(stratified_quota(std::vector<std::int64_t>{0, 0, 0, 1}, 2, 8),
            (std::vector<std::size_t>{6, 2}));
  EXPECT_EQ(stratified_quota(std::vector<std::int64_t>{0, 1}, 2, 0),
            (std::vector<std::size_t>{0, 0}));
  // Equal remainders go to the lower class index.
  EXPECT_EQ(stratified_quota(std::vector<std::int64_t>{0, 1, 2}, 3, 2),
            (std::vector<std::size_t>{1, 1, 0}));
}

TEST(Coverage, OneDimensionalSequence) {
  const EmbeddingStore e(3, 1, {0, 1, 10});
  std::vector<std::size_t> order{0};
  std::vector<std::size_t> pool{1, 2};
  auto s = coverage_scores(e, 0);
  EXPECT_DOUBLE_EQ(s[1], 1.0);
  EXPECT_DOUBLE_EQ(s[2], 10.0);
  while (!pool.empty()) {
    s = coverage_scores(e, order.back());
    const auto pick = argmax_in(s, pool);
    order.push_back(pick);
    pool.erase(std::find(pool.begin(), pool.end(), pick));
  }
  EXPECT_EQ(order, (std::vector<std::size_t>{0, 2, 1}));
}

TEST(Coverage, ThreeFourFive) {
  const EmbeddingStore e(2, 2, {0, 0, 3, 4});
  EXPECT_NEAR(coverage_scores(e, 0)[1], 5.0, 1e-12);
}

TEST(Coverage, IdenticalPointsGiveUniformSelection) {
  const EmbeddingStore e(4, 2, std::vector<float>(8, 1.5f));
  const auto s = coverage_scores(e, 0);
  for (double v : s) EXPECT_EQ(v, 0.0);
  const std::vector<std::size_t> pool{1, 2, 3};
  for (double p : selection_distribution(s, pool, 0.1)) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
}

TEST(Mi, AntipodalPasses) {
  PassProbabilities p{2, 1, 2, {1, 0, 0, 1}};
  EXPECT_NEAR(mi_scores(p)[0], std::log(2.0), 1e-9);
}

TEST(Mi, IdenticalPassesZero) {
  PassProbabilities p{3, 2, 2, {0.3, 0.7, 0.9, 0.1, 0.3, 0.7, 0.9, 0.1, 0.3, 0.7, 0.9, 0.1}};
  for (double v : mi_scores(p)) EXPECT_NEAR(v, 0.0, 1e-12);
  PassProbabilities u{2, 1, 4, std::vector<double>(8, 0.25)};
  EXPECT_NEAR(mi_scores(u)[0], 0.0, 1e-12);
}

TEST(Mi, RejectsUnnormalized) {
  PassProbabilities p{1, 1, 2, {0.5, 0.6}};
  EXPECT_EQ(code_of([&] { mi_scores(p); }), ErrorCode::kValidation);
}

TEST(Gp, TwoPassTwoDim) {
  std::vector<EmbeddingStore> passes{EmbeddingStore(1, 2, {0, 0}), EmbeddingStore(1, 2, {2, 2})};
  EXPECT_NEAR(gp_scores(passes)[0], 4.0, 1e-9);
}

TEST(Gp, OneDim) {
  std::vector<EmbeddingStore> passes{EmbeddingStore(1, 1, {0}), EmbeddingStore(1, 1, {2})};
  EXPECT_NEAR(gp_scores(passes)[0], 1.0, 1e-12);
}

TEST(Gp, IdenticalAndTooFewPasses) {
  std::vector<EmbeddingStore> same{EmbeddingStore(2, 1, {3, 4}), EmbeddingStore(2, 1, {3, 4})};
  for (double v : gp_scores(same)) EXPECT_EQ(v, 0.0);
  std::vector<EmbeddingStore> one{EmbeddingStore(2, 1, {3, 4})};
  EXPECT_EQ(code_of([&] { gp_scores(one); }), ErrorCode::kInvalidArgument);
}

TEST(Entropy, Examples) {
  const std::vector<std::vector<double>> d{{0.5, 0.5}, {1, 0}, {0.25, 0.25, 0.25, 0.25}};
  const auto s = entropy_scores(d);
  EXPECT_NEAR(s[0], std::log(2.0), 1e-15);
  EXPECT_EQ(s[1], 0.0);
  EXPECT_NEAR(s[2], std::log(4.0), 1e-15);
}

TEST(Dropout, PassesAreSeededAndDiffer) {
  const EmbeddingStore base(3, 4, std::vector<float>(12, 1.0f));
  const auto a = dropout_passes(base, 5, 0.5, 9);
  const auto b = dropout_passes(base, 5, 0.5, 9);
  ASSERT_EQ(a.size(), 5u);
  for (std::size_t t = 0; t < a.size(); ++t) EXPECT_EQ(a[t].values(), b[t].values());
  EXPECT_NE(a[0].values(), a[1].values());
  for (float v : a[0].values()) EXPECT_TRUE(v == 0.0f || v == 2.0f);
}

TEST(LinearProbe, RowsAreDistributions) {
  const EmbeddingStore base(4, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1, 1, 1, 1});
  const auto passes = dropout_passes(base, 3, 0.2, 4);
  const auto p = linear_probe_probabilities(passes, 3, 17);
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t i = 0; i < 4; ++i) {
      const auto row = p.at(t, i);
      EXPECT_NEAR(std::accumulate(row.begin(), row.end(), 0.0), 1.0, 1e-12);
    }
  }
}

TEST(Selection, FloorMixing) {
  const std::vector<double> s{0, 1, 3};
  const auto p = selection_distribution(s, iota(3), 0.1);
  EXPECT_NEAR(p[0], 0.1 / 3, 1e-15);
  EXPECT_NEAR(p[1], 0.9 * 0.25 + 0.1 / 3, 1e-15);
  EXPECT_NEAR(p[2], 0.9 * 0.75 + 0.1 / 3, 1e-15);
}

TEST(Selection, SumsToOneProperty) {
  std::vector<double> s(50);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::fmod(i * 0.37, 1.3);
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < s.size(); i += 3) pool.push_back(i);
  for (double eps : {0.0, 0.05, 0.5}) {
    const auto p = selection_distribution(s, pool, eps);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
    double full = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) full += weighting_probability(s, iota(50), i, eps);
    EXPECT_NEAR(full, 1.0, 1e-12);
  }
}
