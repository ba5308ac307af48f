#include "activetest/estimcheck.hpp"

#include <cmath>
#include <cstdio>
#include <functional>

#include "activetest/estimators.hpp"
#include "activetest/rng.hpp"

namespace activetest {

namespace {

std::string fmt(const char* pattern, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, pattern, a, b);
  return buf;
}

// Calls visit(indices, probability) for every ordered B-tuple of i.i.d. draws.
void enumerate_draws(const std::vector<double>& q, std::size_t budget,
                     const std::function<void(const std::vector<std::size_t>&, double)>& visit) {
  std::vector<std::size_t> idx(budget, 0);
  while (true) {
    double p = 1.0;
    for (auto i : idx) p *= q[i];
    visit(idx, p);
    std::size_t k = 0;
    while (k < budget && ++idx[k] == q.size()) idx[k++] = 0;
    if (k == budget) return;
  }
}

}  // namespace

std::vector<CheckResult> run_estimator_checks() {
  std::vector<CheckResult> out;
  const std::vector<double> m{1.0, 0.0, 1.0, 1.0, 0.0, 1.0};
  const std::vector<double> q{0.05, 0.30, 0.10, 0.15, 0.25, 0.15};
  const std::size_t n = m.size();
  double truth = 0.0;
  for (double v : m) truth += v / static_cast<double>(n);

  for (std::size_t b = 1; b <= 3; ++b) {
    double expected = 0.0;
    enumerate_draws(q, b, [&](const std::vector<std::size_t>& idx, double p) {
      std::vector<WeightedObservation> obs;
      for (auto i : idx) obs.push_back({m[i], q[i]});
      expected += p * ipw_estimate(obs, n);
    });
    out.push_back({"ipw unbiased by enumeration, B=" + std::to_string(b),
                   std::abs(expected - truth) <= 1e-12,
                   fmt("E=%.15g truth=%.15g", expected, truth)});
  }

  {
    // Two classes; predictions and labels fixed per item.
    const std::vector<std::int64_t> pred{0, 0, 1, 1, 0, 1};
    const std::vector<std::int64_t> label{0, 1, 1, 0, 0, 1};
    const std::vector<std::int64_t> pi{3, 3};
    const std::vector<std::int64_t> ti{3, 3};
    double true_p = 0.0;
    double true_r = 0.0;
    for (std::int64_t c = 0; c < 2; ++c) {
      double tp = 0.0;
      for (std::size_t i = 0; i < n; ++i) tp += (pred[i] == c && label[i] == c) ? 1.0 : 0.0;
      true_p += tp / static_cast<double>(pi[c]) / 2.0;
      true_r += tp / static_cast<double>(ti[c]) / 2.0;
    }
    double ep = 0.0;
    double er = 0.0;
    enumerate_draws(q, 2, [&](const std::vector<std::size_t>& idx, double p) {
      std::vector<ClassObservation> obs;
      for (auto i : idx) obs.push_back({pred[i], label[i], q[i]});
      ep += p * unbiased_precision(obs, n, pi);
      er += p * unbiased_recall(obs, n, ti);
    });
    out.push_back({"macro precision unbiased by enumeration", std::abs(ep - true_p) <= 1e-12,
                   fmt("E=%.15g truth=%.15g", ep, true_p)});
    out.push_back({"macro recall unbiased by enumeration", std::abs(er - true_r) <= 1e-12,
                   fmt("E=%.15g truth=%.15g", er, true_r)});
  }

  {
    Rng rng(7);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t pop = 10 + rng.index(500);
      const std::size_t b = 1 + rng.index(50);
      std::vector<WeightedObservation> obs;
      std::vector<double> values;
      for (std::size_t k = 0; k < b; ++k) {
        values.push_back(rng.uniform());
        obs.push_back({values.back(), 1.0 / static_cast<double>(pop)});
      }
      worst = std::max(worst, std::abs(ipw_estimate(obs, pop) - m_random(values)));
    }
    out.push_back({"uniform q collapses to the plain mean", worst <= 1e-12,
                   fmt("max deviation %.3g (limit %.0g)", worst, 1e-12)});
  }

  {
    const std::size_t pop = 500;
    const std::size_t draws = 450;
    const std::vector<double> acc(draws, 1.0);
    const std::vector<double> uq(draws, 1.0 / pop);
    const double pure = pure_accuracy(acc, pop, uq);
    const double closed = 1.0 + static_cast<double>(draws - 1) / (2.0 * pop);
    out.push_back({"PURE closed form for all-correct uniform draws",
                   std::abs(pure - closed) <= 1e-12, fmt("PURE=%.15g closed=%.15g", pure, closed)});
  }

  {
    std::vector<double> uq(1000, 100.0 / 1000.0);
    const auto bound = rate_bound(100, 1000, uq, 0.0, 0.0, 1.0);
    const double closed = 1000.0 / (std::sqrt(2.0) * std::pow(100.0, 1.5));
    out.push_back({"rate bound uniform closed form", std::abs(bound.value - closed) <= 1e-12,
                   fmt("bound=%.15g closed=%.15g", bound.value, closed)});
  }
  return out;
}

}  // namespace activetest
