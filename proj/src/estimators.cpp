#include "activetest/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "activetest/error.hpp"

namespace activetest {

namespace {

void check_q(double q) {
  if (!(q > 0.0) || !std::isfinite(q)) {
    throw Error(ErrorCode::kInvalidArgument, "proposal probability must be positive");
  }
}

void check_population(std::size_t population) {
  if (population == 0) throw Error(ErrorCode::kInvalidArgument, "population size must be positive");
}

double class_estimate(std::span<const ClassObservation> obs, std::size_t population,
                      std::span<const std::int64_t> denominators, bool uniform) {
  check_population(population);
  if (obs.empty()) throw Error(ErrorCode::kEmpty, "no annotated samples");
  const std::size_t classes = denominators.size();
  if (classes == 0) throw Error(ErrorCode::kInvalidArgument, "no classes");
  const double n = static_cast<double>(population);
  const double b = static_cast<double>(obs.size());
  std::vector<double> tp(classes, 0.0);
  for (const auto& o : obs) {
    if (!uniform) check_q(o.q);
    if (o.prediction < 0 || o.label < 0 || static_cast<std::size_t>(o.prediction) >= classes ||
        static_cast<std::size_t>(o.label) >= classes) {
      throw Error(ErrorCode::kOutOfRange, "class index outside [0, class_count)");
    }
    if (o.prediction != o.label) continue;
    const double q = uniform ? 1.0 / n : o.q;
    tp[o.label] += 1.0 / (b * q);
  }
  double sum = 0.0;
  for (std::size_t c = 0; c < classes; ++c) {
    if (denominators[c] > 0) sum += tp[c] / static_cast<double>(denominators[c]);
  }
  return sum / static_cast<double>(classes);
}

}  // namespace

double m_random(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::kEmpty, "mean of an empty set");
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double ipw_estimate(std::span<const WeightedObservation> obs, std::size_t population) {
  check_population(population);
  if (obs.empty()) throw Error(ErrorCode::kEmpty, "no annotated samples");
  const double n = static_cast<double>(population);
  double sum = 0.0;
  for (const auto& o : obs) {
    check_q(o.q);
    sum += o.value / (n * o.q);
  }
  return sum / static_cast<double>(obs.size());
}

double unbiased_rouge(std::span<const WeightedObservation> obs, std::size_t population) {
  return ipw_estimate(obs, population);
}

double unbiased_precision(std::span<const ClassObservation> obs, std::size_t population,
                          std::span<const std::int64_t> predicted_instances) {
  return class_estimate(obs, population, predicted_instances, false);
}

double unbiased_recall(std::span<const ClassObservation> obs, std::size_t population,
                       std::span<const std::int64_t> true_instances) {
  return class_estimate(obs, population, true_instances, false);
}

double random_precision(std::span<const ClassObservation> obs, std::size_t population,
                        std::span<const std::int64_t> predicted_instances) {
  return class_estimate(obs, population, predicted_instances, true);
}

double random_recall(std::span<const ClassObservation> obs, std::size_t population,
                     std::span<const std::int64_t> true_instances) {
  return class_estimate(obs, population, true_instances, true);
}

double variance_estimate(std::span<const WeightedObservation> obs, std::size_t population) {
  check_population(population);
  if (obs.size() < 2) throw Error(ErrorCode::kInvalidArgument, "variance needs at least 2 draws");
  const double n = static_cast<double>(population);
  const double b = static_cast<double>(obs.size());
  double mean = 0.0;
  for (const auto& o : obs) {
    check_q(o.q);
    mean += o.value / (n * o.q);
  }
  mean /= b;
  double ss = 0.0;
  for (const auto& o : obs) {
    const double d = o.value / (n * o.q) - mean;
    ss += d * d;
  }
  return (ss / b) / b;
}

double pure_accuracy(std::span<const double> accuracy, std::size_t population,
                     std::span<const double> q) {
  check_population(population);
  if (accuracy.size() != q.size()) {
    throw Error(ErrorCode::kCountMismatch, "accuracy and q differ in length");
  }
  if (accuracy.empty()) throw Error(ErrorCode::kEmpty, "no draws");
  const double n = static_cast<double>(population);
  const double m_total = static_cast<double>(accuracy.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < accuracy.size(); ++k) {
    check_q(q[k]);
    const double m = static_cast<double>(k + 1);
    const double w = 1.0 / (n * q[k]);
    sum += (w + (m_total - m) / n) * accuracy[k];
  }
  return sum / m_total;
}

double lure_accuracy(std::span<const double> accuracy, std::size_t population,
                     std::span<const double> q) {
  check_population(population);
  if (accuracy.size() != q.size()) {
    throw Error(ErrorCode::kCountMismatch, "accuracy and q differ in length");
  }
  if (accuracy.empty()) throw Error(ErrorCode::kEmpty, "no draws");
  if (accuracy.size() > population) {
    throw Error(ErrorCode::kInvalidArgument, "more draws than population items");
  }
  const double n = static_cast<double>(population);
  const double m_total = static_cast<double>(accuracy.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < accuracy.size(); ++k) {
    check_q(q[k]);
    const double m = static_cast<double>(k + 1);
    double v = 1.0;
    // (N - M) = 0 makes the correction vanish, including the m = N term.
    if (m_total < n) v += (n - m_total) / (n - m) * (1.0 / ((n - m + 1.0) * q[k]) - 1.0);
    sum += v * accuracy[k];
  }
  return sum / m_total;
}

RateBound rate_bound(std::size_t n, std::size_t population, std::span<const double> q,
                     double sigma_m, double a, double b) {
  check_population(population);
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "budget n must be positive");
  if (q.empty()) throw Error(ErrorCode::kEmpty, "empty inclusion vector");
  if (b < a) throw Error(ErrorCode::kInvalidArgument, "metric range needs a <= b");
  double q_min = q.front();
  double q_max = q.front();
  double sum = 0.0;
  double sq = 0.0;
  for (double v : q) {
    q_min = std::min(q_min, v);
    q_max = std::max(q_max, v);
    sum += v;
    sq += v * v;
  }
  if (!(q_min > 0.0)) throw Error(ErrorCode::kInvalidArgument, "q_min must be positive");
  if (q_max > 1.0 + 1e-12) {
    throw Error(ErrorCode::kInvalidArgument, "inclusion probabilities must lie in (0, 1]");
  }

  RateBound out;
  const double dn = static_cast<double>(n);
  out.sum_mismatch = std::abs(sum - dn) > 1e-6;
  if (out.sum_mismatch) {
    std::cerr << "warning: inclusion probabilities sum to " << sum << ", expected " << n << '\n';
  }
  // The bias of the unweighted mean is sum q_i (M_i - M) / n, which vanishes
  // when q is constant.
  const bool uniform = (q_max - q_min) <= 1e-12 * q_max;
  out.bias_term =
      uniform ? 0.0 : std::sqrt(static_cast<double>(population)) / dn * std::sqrt(sq) * sigma_m;
  out.deviation_term = (b - a) / (q_min * std::sqrt(2.0 * dn));
  out.value = out.bias_term + out.deviation_term;
  return out;
}

std::vector<double> uncertainty_inclusion(std::span<const double> u, std::size_t n) {
  double total = 0.0;
  for (double v : u) {
    if (!(v > 0.0)) throw Error(ErrorCode::kInvalidArgument, "uncertainty scores must be positive");
    total += v;
  }
  std::vector<double> q(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) q[i] = static_cast<double>(n) * u[i] / total;
  return q;
}

}  // namespace activetest
