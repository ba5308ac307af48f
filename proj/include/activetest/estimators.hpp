#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace activetest {

/// One annotated draw: metric value and the probability it was drawn with.
/// The importance weight is 1 / (N q).
struct WeightedObservation {
  double value = 0.0;
  double q = 0.0;
};

/// One annotated draw for precision/recall estimation.
struct ClassObservation {
  std::int64_t prediction = 0;
  std::int64_t label = 0;
  double q = 0.0;
};

struct EstimateReport {
  double raw = 0.0;        // unweighted estimate
  double unbiased = 0.0;   // importance-weighted estimate, never clamped
  double gap = 0.0;        // raw - unbiased
  std::size_t budget_count = 0;
  double budget_cost = 0.0;
  std::optional<double> variance;  // sigma^2 / B when B >= 2
  bool stop = false;
  bool out_of_range = false;  // unbiased outside [0, 1]
};

double m_random(std::span<const double> values);

/// (1/B) sum m_i / (N q_i).
double ipw_estimate(std::span<const WeightedObservation> obs, std::size_t population);

/// Same contract as ipw_estimate; per-sample values are ROUGE-N scores.
double unbiased_rouge(std::span<const WeightedObservation> obs, std::size_t population);

/// Macro precision with importance-weighted true positives and full-set
/// predicted-instance counts. TP_c is estimated as (1/B) sum 1[hit_c] / q_i.
double unbiased_precision(std::span<const ClassObservation> obs, std::size_t population,
                          std::span<const std::int64_t> predicted_instances);
double unbiased_recall(std::span<const ClassObservation> obs, std::size_t population,
                       std::span<const std::int64_t> true_instances);

/// Unweighted counterparts: the same estimators evaluated with q_i = 1/N.
double random_precision(std::span<const ClassObservation> obs, std::size_t population,
                        std::span<const std::int64_t> predicted_instances);
double random_recall(std::span<const ClassObservation> obs, std::size_t population,
                     std::span<const std::int64_t> true_instances);

/// Plug-in Var(M_hat) = sigma^2 / B, population variance of the per-draw
/// terms m_i / (N q_i). Requires B >= 2.
double variance_estimate(std::span<const WeightedObservation> obs, std::size_t population);

// Reference risk estimators for sequential without-replacement sampling,
// evaluated on accuracy values. q[m] is the proposal of the m-th draw.
// Neither is bounded to [0, 1].
double pure_accuracy(std::span<const double> accuracy, std::size_t population,
                     std::span<const double> q);
double lure_accuracy(std::span<const double> accuracy, std::size_t population,
                     std::span<const double> q);

struct RateBound {
  double value = 0.0;
  double bias_term = 0.0;       // sqrt(N)/n * ||q||_2 * sigma_M, zero for uniform q
  double deviation_term = 0.0;  // (b - a) / (q_min * sqrt(2n))
  bool sum_mismatch = false;    // |sum q - n| > 1e-6
};

/// Upper bound on E|M_random - M_hat| for a fixed-size design of n draws
/// with inclusion probabilities q (sum q = n) and metric values in [a, b].
RateBound rate_bound(std::size_t n, std::size_t population, std::span<const double> q,
                     double sigma_m, double a, double b);

/// Inclusion probabilities q_i = n u_i / U for uncertainty scores u.
std::vector<double> uncertainty_inclusion(std::span<const double> u, std::size_t n);

}  // namespace activetest
