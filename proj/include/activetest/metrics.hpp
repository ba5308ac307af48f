#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "activetest/data_model.hpp"

namespace activetest {

struct MetricKind {
  enum class Kind { kAccuracy, kMacroPrecision, kMacroRecall, kMacroF1, kRougeN };
  Kind kind = Kind::kAccuracy;
  int order = 1;  // ROUGE-N order; unused otherwise

  static MetricKind parse(const std::string& name);
  std::string name() const;
  bool is_generation() const { return kind == Kind::kRougeN; }
  /// F1 has no unbiased importance-weighted form.
  bool has_unbiased_estimator() const { return kind != Kind::kMacroF1; }

  friend bool operator==(const MetricKind&, const MetricKind&) = default;
};

/// Per-class counts over a scored set. PI = predicted instances, TI = true instances.
struct ConfusionCounts {
  std::vector<std::int64_t> tp;
  std::vector<std::int64_t> pi;
  std::vector<std::int64_t> ti;

  static ConfusionCounts from(std::span<const std::int64_t> predictions,
                              std::span<const std::int64_t> labels, std::size_t class_count);
};

double per_sample_accuracy(std::int64_t prediction, std::int64_t label, std::size_t class_count);

/// Lowercase, split on whitespace, strip surrounding ASCII punctuation.
std::vector<std::string> rouge_tokenize(std::string_view text);

/// Clipped n-gram recall of the prediction against the reference.
double rouge_n(std::string_view prediction, std::string_view reference, int n);

// Macro averages, computed per class first. Classes with a zero denominator
// contribute 0.
double macro_precision(const ConfusionCounts& c);
double macro_recall(const ConfusionCounts& c);
double macro_f1(const ConfusionCounts& c);

double full_set_metric(MetricKind kind, std::span<const std::int64_t> predictions,
                       std::span<const std::int64_t> labels, std::size_t class_count);
double full_set_metric(MetricKind kind, std::span<const std::string> predictions,
                       std::span<const std::string> references);

/// Per-sample metric value used by the estimators: accuracy indicator for
/// classification metrics, ROUGE-N for generation.
double per_sample_value(MetricKind kind, const Prediction& prediction, const Label& label,
                        std::size_t class_count);

}  // namespace activetest
