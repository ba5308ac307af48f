#include <algorithm>
#include <cmath>

#include "activetest/harness.hpp"
#include "activetest/rng.hpp"
#include "test_util.hpp"

using namespace activetest;
using activetest::testing::code_of;
using activetest::testing::TempDir;

TEST(EstimationError, Examples) {
  EXPECT_EQ(estimation_error(0.90, 0.90), 0.0);
  EXPECT_NEAR(estimation_error(0.90, 0.85), 0.05, 1e-15);
  EXPECT_NEAR(estimation_error(0.5, 1.2), 0.7, 1e-15);
}

TEST(Auecc, Examples) {
  EXPECT_NEAR(auecc(std::vector<double>{0.4, 0.2, 0.1, 0.1}), 0.2, 1e-15);
  EXPECT_EQ(auecc(std::vector<double>{0, 0, 0}), 0.0);
  EXPECT_DOUBLE_EQ(auecc(std::vector<double>{0.3}), 0.3);
}

TEST(MaeVsOptimal, Examples) {
  auto m = mae_vs_optimal({{"A", {0.2, 0.2}}, {"B", {0.1, 0.3}}});
  EXPECT_NEAR(m["A"], 0.05, 1e-15);
  EXPECT_NEAR(m["B"], 0.05, 1e-15);
  m = mae_vs_optimal({{"A", {0.1, 0.1}}, {"B", {0.3, 0.2}}});
  EXPECT_EQ(m["A"], 0.0);
  m = mae_vs_optimal({{"A", {0.4, 0.1}}, {"B", {0.4, 0.1}}});
  EXPECT_EQ(m["A"], 0.0);
  EXPECT_EQ(m["B"], 0.0);
}

TEST(Minority, HandExample) {
  // 20 minority items (class 1) among 100; 10 selected, 3 of them minority.
  std::vector<std::int64_t> labels(100, 0);
  for (std::size_t i = 0; i < 20; ++i) labels[i] = 1;
  std::vector<std::size_t> sel{0, 1, 2, 50, 51, 52, 53, 54, 55, 56};
  const auto m = minority_metrics(sel, labels, 2);
  EXPECT_EQ(m.minority_class, 1);
  EXPECT_NEAR(m.precision, 0.3, 1e-15);
  EXPECT_NEAR(m.recall, 0.15, 1e-15);
  EXPECT_NEAR(m.f1, 0.2, 1e-15);
}

TEST(Minority, ExactAndDisjoint) {
  const std::vector<std::int64_t> labels{0, 1, 0, 0, 1, 0};
  EXPECT_EQ(minority_metrics(std::vector<std::size_t>{1, 4}, labels, 2).f1, 1.0);
  const auto none = minority_metrics(std::vector<std::size_t>{0, 2}, labels, 2);
  EXPECT_EQ(none.precision, 0.0);
  EXPECT_EQ(none.recall, 0.0);
  EXPECT_EQ(none.f1, 0.0);
}

TEST(Minority, TiesGoToLowestIndex) {
  const std::vector<std::int64_t> labels{0, 1, 2, 2};
  EXPECT_EQ(minority_class(labels, 3), 0);
}

TEST(Synth, PerfectPredictor) {
  SynthSpec s;
  s.n = 100;
  s.predictor_accuracy = {1.0, 1.0};
  const auto ds = make_synthetic(s);
  EXPECT_EQ(full_metric(ds, MetricKind::parse("accuracy")), 1.0);
}

TEST(Synth, PlantedAccuracyConcentrates) {
  SynthSpec s;
  s.n = 100000;
  s.dim = 2;
  s.tokens_min = 1;
  s.tokens_max = 1;
  s.predictor_accuracy = {0.8, 0.8};
  const auto ds = make_synthetic(s);
  EXPECT_NEAR(full_metric(ds, MetricKind::parse("accuracy")), 0.8, 0.005);
}

TEST(Synth, ImbalancedMinority) {
  SynthSpec s;
  s.n = 1000;
  s.class_priors = {0.97, 0.03};
  const auto ds = make_synthetic(s);
  std::vector<std::int64_t> labels;
  for (const auto& r : ds.samples) labels.push_back(std::get<std::int64_t>(ds.labels->at(r.id)));
  EXPECT_EQ(minority_class(labels, 2), 1);
  EXPECT_EQ(std::count(labels.begin(), labels.end(), 1), 30);
}

TEST(Synth, WriteAndReload) {
  TempDir dir;
  SynthSpec s;
  s.n = 40;
  s.passes = 2;
  s.languages = {{"en", 0.5}, {"fr", 0.5}};
  const auto ds = make_synthetic(s);
  const auto back = load_dataset(write_dataset(ds, dir.path()));
  EXPECT_EQ(back.size(), 40u);
  EXPECT_EQ(back.embeddings.values(), ds.embeddings.values());
  ASSERT_TRUE(back.tokens.has_value());
  EXPECT_EQ(back.passes.size(), 2u);
  EXPECT_EQ(back.samples[3].language, ds.samples[3].language);
}

TEST(Synth, Summarization) {
  SynthSpec s;
  s.task = Task::kSummarization;
  s.n = 30;
  s.class_priors = {1.0};
  s.predictor_accuracy = {0.7};
  s.token_noise = {1.0};
  const auto ds = make_synthetic(s);
  const double r = full_metric(ds, MetricKind::parse("rouge-1"));
  EXPECT_GT(r, 0.5);
  EXPECT_LT(r, 0.95);
}

TEST(Synth, RejectsBadSpec) {
  SynthSpec s;
  s.class_priors = {0.5, 0.6};
  EXPECT_EQ(code_of([&] { s.validate(); }), ErrorCode::kValidation);
}

TEST(Sweep, GridCounts) {
  SynthSpec s;
  s.n = 200;
  s.dim = 4;
  const auto ds = std::make_shared<Dataset>(make_synthetic(s));
  SweepConfig c;
  c.strategies = {StrategyKind::kRandom, StrategyKind::kCoverage};
  c.budgets = {10, 20, 30};
  c.seeds = {0, 1};
  c.base.stop.enabled = false;
  const auto r = sweep(ds, c);
  EXPECT_EQ(r.rows.size(), 12u);
  ASSERT_EQ(r.curves.size(), 2u);
  for (const auto& [name, curve] : r.curves) EXPECT_EQ(curve.mean.size(), 3u);
  EXPECT_EQ(r.mae.size(), 2u);
}

TEST(Sweep, RandomErrorShrinksWithBudget) {
  SynthSpec s;
  s.n = 1000;
  s.dim = 4;
  const auto ds = std::make_shared<Dataset>(make_synthetic(s));
  SweepConfig c;
  c.strategies = {StrategyKind::kRandom};
  c.budgets = {20, 400};
  for (std::uint64_t k = 0; k < 40; ++k) c.seeds.push_back(k);
  c.base.stop.enabled = false;
  const auto result = sweep(ds, c);
  const auto& curve = result.curves.at("random");
  EXPECT_LT(curve.mean[1], curve.mean[0]);
}

TEST(Sweep, ParallelMatchesSerial) {
  SynthSpec s;
  s.n = 150;
  s.dim = 4;
  const auto ds = std::make_shared<Dataset>(make_synthetic(s));
  SweepConfig c;
  c.strategies = {StrategyKind::kRandom, StrategyKind::kAgreement};
  c.budgets = {10, 30};
  c.seeds = {0, 1, 2};
  c.base.stop.enabled = false;
  const auto serial = format_rows_csv(sweep(ds, c).rows, false);
  c.threads = 4;
  EXPECT_EQ(format_rows_csv(sweep(ds, c).rows, false), serial);
}

TEST(Report, CsvRoundTrip) {
  SweepRow r;
  r.dataset = "d";
  r.strategy = "random";
  r.metric = "accuracy";
  r.budget = 10;
  r.seed = 3;
  r.estimation_error = 0.0123456789012345;
  r.gap = -0.5;
  r.cost_spent = 0.2;
  r.stopped_at = 7;
  r.wall_time_ms = 1.5;
  SweepRow q = r;
  q.stopped_at.reset();
  const auto text = format_rows_csv({r, q});
  const auto back = parse_rows_csv(text);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].stopped_at, std::optional<std::size_t>(7));
  EXPECT_FALSE(back[1].stopped_at.has_value());
  EXPECT_NEAR(back[0].estimation_error, r.estimation_error, 1e-12);
  EXPECT_EQ(format_rows_csv(back), text);
  EXPECT_EQ(code_of([] { parse_rows_csv("a,b\n"); }), ErrorCode::kValidation);
}

TEST(Report, BudgetGrid) {
  EXPECT_EQ(default_budget_grid(100, 4), (std::vector<std::size_t>{25, 50, 75, 100}));
  EXPECT_EQ(default_budget_grid(3, 10), (std::vector<std::size_t>{1, 2, 3}));
}
