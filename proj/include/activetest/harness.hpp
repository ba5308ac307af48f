#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "activetest/data_model.hpp"
#include "activetest/engine.hpp"

namespace activetest {

/// |M(X_F) - M_hat(X_A)|, applied to the raw (unclamped) estimate.
double estimation_error(double full_metric, double estimate);

/// Area under an error curve on an equally spaced grid, normalized by the
/// budget span: the mean of the errors.
double auecc(std::span<const double> errors);

/// MAE of each curve from the pointwise minimum across curves.
std::map<std::string, double> mae_vs_optimal(const std::map<std::string, std::vector<double>>& curves);

struct MinorityMetrics {
  std::int64_t minority_class = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Class with the fewest instances; ties go to the lowest index.
std::int64_t minority_class(std::span<const std::int64_t> labels, std::size_t class_count);

/// Binary retrieval scores of the selection against minority membership.
MinorityMetrics minority_metrics(std::span<const std::size_t> selected,
                                 std::span<const std::int64_t> labels, std::size_t class_count);

struct SynthSpec {
  std::string name = "synthetic";
  Task task = Task::kClassification;
  std::size_t n = 1000;
  std::vector<double> class_priors{0.5, 0.5};
  std::vector<double> predictor_accuracy{0.85, 0.85};  // per class
  std::size_t dim = 16;
  double center_scale = 3.0;
  double cluster_spread = 1.0;
  /// Mispredicted items sit this fraction of the way toward the predicted
  /// class center.
  double confusion_pull = 0.5;
  std::size_t tokens_min = 4;
  std::size_t tokens_max = 16;
  std::vector<double> token_noise{1.0, 1.0};  // per class
  std::size_t passes = 0;                     // per-pass containers to emit
  double pass_noise = 0.1;
  std::map<std::string, double> languages;    // tag -> fraction
  std::uint64_t seed = 0;

  static SynthSpec from_json(const nlohmann::json& j);
  void validate() const;
};

/// Builds a labeled synthetic dataset in memory. Class counts follow the
/// priors exactly (largest remainder); predictions are flipped per class.
Dataset make_synthetic(const SynthSpec& spec);

/// Writes the dataset files and a manifest; returns the manifest path.
std::filesystem::path write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

struct SweepConfig {
  std::string dataset_name;
  std::vector<StrategyKind> strategies;
  std::vector<std::size_t> budgets;
  std::vector<std::uint64_t> seeds;
  RunConfig base;
  std::size_t threads = 1;

  static SweepConfig from_json(const nlohmann::json& j);
};

/// Default grid: `points` evenly spaced budgets ending at `max_budget`.
std::vector<std::size_t> default_budget_grid(std::size_t max_budget, std::size_t points = 10);

struct SweepRow {
  std::string dataset;
  std::string strategy;
  std::string metric;
  std::size_t budget = 0;
  std::uint64_t seed = 0;
  double estimation_error = 0.0;
  double gap = 0.0;
  double cost_spent = 0.0;
  std::optional<std::size_t> stopped_at;
  double wall_time_ms = 0.0;
  std::optional<MinorityMetrics> minority;
};

struct RunCurve {
  std::vector<std::size_t> budgets;
  std::vector<double> mean;
  std::vector<double> stddev;
  std::vector<std::vector<double>> per_seed;  // [budget][seed]
};

struct SweepResult {
  std::vector<SweepRow> rows;  // strategy-major, then budget, then seed
  std::map<std::string, RunCurve> curves;
  std::map<std::string, double> auecc;
  std::map<std::string, double> mae;
  std::map<std::string, double> wall_time_ms;
};

SweepResult sweep(std::shared_ptr<const Dataset> dataset, const SweepConfig& config);

/// Aggregates rows into curves and summaries (shared by sweep and report).
SweepResult summarize(std::vector<SweepRow> rows);

inline constexpr const char* kReportHeader =
    "dataset,strategy,metric,budget,seed,estimation_error,gap,cost_spent,stopped_at,wall_time_ms";

std::string format_rows_csv(const std::vector<SweepRow>& rows, bool include_wall_time = true);
std::vector<SweepRow> parse_rows_csv(const std::string& text);
nlohmann::json summary_json(const SweepResult& result);

/// Writes runs.csv, minority.csv (classification only) and summary.json.
void write_sweep_outputs(const SweepResult& result, const std::filesystem::path& dir);

}  // namespace activetest
