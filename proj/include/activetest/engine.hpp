#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "activetest/data_model.hpp"
#include "activetest/estimators.hpp"
#include "activetest/metrics.hpp"
#include "activetest/rng.hpp"
#include "activetest/strategies.hpp"

namespace activetest {

enum class BudgetMode { kCount, kCost };
enum class SelectionMode { kProportional, kGreedy };

struct StopRule {
  double tau = 0.01;
  std::size_t b_min = 25;
  bool enabled = true;
};

/// stop = enabled && step >= b_min && |gap| < tau.
bool should_stop(const StopRule& rule, std::size_t step, double gap);

struct RunConfig {
  StrategyKind strategy = StrategyKind::kRandom;
  double budget = 100;
  BudgetMode budget_mode = BudgetMode::kCount;
  StopRule stop;
  double epsilon = 0.1;
  std::uint64_t seed = 0;
  MetricKind metric;
  std::optional<std::map<std::string, double>> language_prior;
  std::size_t surrogate_retrain_every = 1;
  SelectionMode selection = SelectionMode::kProportional;
  CostModel costs;
  std::size_t mc_passes = 10;
  double dropout_rate = 0.1;
  std::uint64_t attention_seed = 0;

  /// Parses the run-config JSON object; throws Error(kInvalidArgument) on
  /// unknown strategy/metric strings or out-of-range values.
  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;
};

/// Result of one selection step.
struct Selection {
  std::size_t index = 0;
  std::string id;
  double q = 0.0;       // recorded weighting probability (full-set normalization)
  double q_pool = 0.0;  // history-conditional probability of this draw
  double cost = 0.0;
  std::optional<std::string> language;
};

struct ActiveState {
  std::vector<std::size_t> selected;  // X_A, in selection order
  std::vector<double> q;
  std::vector<double> q_pool;
  std::vector<Label> labels;          // Y_A
  std::vector<double> values;         // per-sample metric values
  double cost_spent = 0.0;
  std::size_t step = 0;
  std::optional<Selection> pending;
};

struct StopDecision {
  bool stop = false;
  double gap = 0.0;
};

struct TraceRow {
  std::size_t step = 0;
  std::string id;
  std::size_t index = 0;
  double q = 0.0;
  double q_pool = 0.0;
  double cost = 0.0;
  double raw = 0.0;
  double unbiased = 0.0;
  double gap = 0.0;
  bool stop = false;
};

/// Why a run ended.
enum class EndReason { kStopped, kBudget, kPoolEmpty };
std::string to_string(EndReason reason);

class Strategy;

/// Sequential selection/annotation loop over one dataset. Not thread-safe;
/// one writer per engine.
class Engine {
 public:
  /// `oracle_labels` supplies full-set label information (true-instance
  /// counts for recall); pass nullptr in interactive mode.
  Engine(std::shared_ptr<const Dataset> dataset, RunConfig config,
         const std::map<std::string, Label>* oracle_labels);
  ~Engine();
  Engine(Engine&&) noexcept;
  Engine& operator=(Engine&&) noexcept;

  /// Selects the next sample and holds it pending until annotate().
  /// Throws kBudgetExhausted or kEmpty when nothing can be selected.
  const Selection& step();

  void annotate(const std::string& id, const Label& label);

  /// Report for the current annotated set; throws kEmpty before any label.
  EstimateReport estimate() const;
  StopDecision check_stop() const;
  bool has_estimate() const { return !state_.selected.empty(); }

  const ActiveState& state() const { return state_; }
  const RunConfig& config() const { return config_; }
  const Dataset& dataset() const { return *dataset_; }
  std::size_t pool_size() const { return dataset_->size() - state_.selected.size() - (state_.pending ? 1 : 0); }
  bool budget_allows_more() const;

  static constexpr const char* kWeightingRegime = "iid-proxy";

 private:
  double resolve(std::size_t index) const;
  std::pair<double, double> raw_and_unbiased() const;
  std::vector<WeightedObservation> weighted_observations() const;
  bool stop_for(double gap) const;
  std::vector<std::size_t> pool_indices(const std::string* language) const;

  std::shared_ptr<const Dataset> dataset_;
  RunConfig config_;
  ActiveState state_;
  Rng rng_;
  std::unique_ptr<Strategy> strategy_;
  std::vector<bool> taken_;
  std::map<std::string, std::size_t> index_of_;
  std::vector<std::int64_t> predicted_instances_;
  std::optional<std::vector<std::int64_t>> true_instances_;
  std::map<std::string, std::vector<std::size_t>> by_language_;
};

/// Samples a language from the prior restricted to languages whose pool is
/// non-empty. Returns the tag and its renormalized probability.
std::pair<std::string, double> draw_language(const std::map<std::string, double>& prior,
                                             const std::map<std::string, std::size_t>& pool_sizes,
                                             Rng& rng);

struct RunResult {
  ActiveState state;
  std::vector<TraceRow> trace;
  std::optional<EstimateReport> report;
  EndReason end = EndReason::kBudget;
  std::optional<std::size_t> stopped_at;
};

/// Oracle-mode loop: select, reveal, annotate, check stop.
RunResult run(std::shared_ptr<const Dataset> dataset, const RunConfig& config,
              LabelOracle& oracle);

/// Full-set metric M(X_F) from the dataset's labels.
double full_metric(const Dataset& dataset, MetricKind kind);

}  // namespace activetest
