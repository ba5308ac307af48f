#include "activetest/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "activetest/error.hpp"
#include "activetest/rng.hpp"

namespace activetest {

StrategyKind parse_strategy(const std::string& name) {
  if (name == "random") return StrategyKind::kRandom;
  if (name == "stratified") return StrategyKind::kStratifiedRandom;
  if (name == "coverage") return StrategyKind::kCoverage;
  if (name == "uncertainty-mi") return StrategyKind::kUncertaintyMi;
  if (name == "uncertainty-gp") return StrategyKind::kUncertaintyGp;
  if (name == "surrogate-rf") return StrategyKind::kSurrogateRf;
  if (name == "surrogate-svm") return StrategyKind::kSurrogateSvm;
  if (name == "agreement") return StrategyKind::kAgreement;
  throw Error(ErrorCode::kInvalidArgument, "unknown strategy '" + name + "'");
}

std::string to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kRandom: return "random";
    case StrategyKind::kStratifiedRandom: return "stratified";
    case StrategyKind::kCoverage: return "coverage";
    case StrategyKind::kUncertaintyMi: return "uncertainty-mi";
    case StrategyKind::kUncertaintyGp: return "uncertainty-gp";
    case StrategyKind::kSurrogateRf: return "surrogate-rf";
    case StrategyKind::kSurrogateSvm: return "surrogate-svm";
    case StrategyKind::kAgreement: return "agreement";
  }
  return "random";
}

std::vector<double> random_scores(std::size_t pool_size) {
  if (pool_size == 0) throw Error(ErrorCode::kEmpty, "empty pool");
  return std::vector<double>(pool_size, 1.0);
}

std::vector<std::size_t> stratified_quota(std::span<const std::int64_t> labels,
                                          std::size_t class_count, std::size_t budget) {
  if (labels.empty()) throw Error(ErrorCode::kEmpty, "stratified quotas need full labels");
  std::vector<std::size_t> freq(class_count, 0);
  for (auto y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= class_count) {
      throw Error(ErrorCode::kOutOfRange, "label outside the class range");
    }
    ++freq[y];
  }
  const double n = static_cast<double>(labels.size());
  std::vector<std::size_t> quota(class_count, 0);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < class_count; ++c) {
    const double exact = static_cast<double>(budget) * static_cast<double>(freq[c]) / n;
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += quota[c];
    remainders.emplace_back(exact - std::floor(exact), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < budget && k < remainders.size(); ++k, ++assigned) {
    ++quota[remainders[k].second];
  }
  return quota;
}

std::vector<double> coverage_scores(const EmbeddingStore& embeddings,
                                    std::optional<std::size_t> last_selected) {
  const std::size_t n = embeddings.n();
  if (!last_selected) return std::vector<double>(n, 1.0);
  if (*last_selected >= n) throw Error(ErrorCode::kOutOfRange, "last selected index out of range");
  const auto anchor = embeddings.row(*last_selected);
  std::vector<double> scores(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto row = embeddings.row(j);
    double d2 = 0.0;
    for (std::size_t k = 0; k < embeddings.d(); ++k) {
      const double d = static_cast<double>(row[k]) - static_cast<double>(anchor[k]);
      d2 += d * d;
    }
    scores[j] = std::sqrt(d2);
  }
  return scores;
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

std::vector<double> mi_scores(const PassProbabilities& passes) {
  if (passes.passes == 0) throw Error(ErrorCode::kEmpty, "no stochastic passes");
  if (passes.values.size() != passes.passes * passes.n * passes.classes) {
    throw Error(ErrorCode::kCountMismatch, "pass probability tensor has the wrong size");
  }
  std::vector<double> scores(passes.n);
  std::vector<double> mean(passes.classes);
  const double t_count = static_cast<double>(passes.passes);
  for (std::size_t i = 0; i < passes.n; ++i) {
    std::fill(mean.begin(), mean.end(), 0.0);
    double mean_entropy = 0.0;
    for (std::size_t t = 0; t < passes.passes; ++t) {
      const auto p = passes.at(t, i);
      double sum = 0.0;
      for (std::size_t c = 0; c < passes.classes; ++c) {
        if (!(p[c] >= 0.0) || !std::isfinite(p[c])) {
          throw Error(ErrorCode::kValidation, "malformed class distribution");
        }
        sum += p[c];
        mean[c] += p[c] / t_count;
      }
      if (std::abs(sum - 1.0) > 1e-6) {
        throw Error(ErrorCode::kValidation, "class distribution does not sum to 1");
      }
      mean_entropy += entropy(p) / t_count;
    }
    scores[i] = std::max(0.0, entropy(mean) - mean_entropy);
  }
  return scores;
}

std::vector<double> gp_scores(std::span<const EmbeddingStore> passes) {
  if (passes.size() < 2) throw Error(ErrorCode::kInvalidArgument, "GP scores need T >= 2 passes");
  const std::size_t n = passes.front().n();
  const std::size_t d = passes.front().d();
  for (const auto& p : passes) {
    if (p.n() != n || p.d() != d) throw Error(ErrorCode::kCountMismatch, "passes differ in shape");
  }
  const double t_count = static_cast<double>(passes.size());
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    double std_sum = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      double mean = 0.0;
      for (const auto& p : passes) mean += p.row(i)[k];
      mean /= t_count;
      double var = 0.0;
      for (const auto& p : passes) {
        const double dv = p.row(i)[k] - mean;
        var += dv * dv;
      }
      std_sum += std::sqrt(var / t_count);
    }
    scores[i] = std_sum * std_sum;
  }
  return scores;
}

std::vector<double> entropy_scores(const std::vector<std::vector<double>>& distributions) {
  std::vector<double> scores;
  scores.reserve(distributions.size());
  for (const auto& p : distributions) scores.push_back(entropy(p));
  return scores;
}

std::vector<EmbeddingStore> dropout_passes(const EmbeddingStore& base, std::size_t passes,
                                           double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw Error(ErrorCode::kInvalidArgument, "dropout rate in [0,1)");
  Rng rng(seed);
  const float keep_scale = static_cast<float>(1.0 / (1.0 - rate));
  std::vector<EmbeddingStore> out;
  out.reserve(passes);
  for (std::size_t t = 0; t < passes; ++t) {
    std::vector<float> v = base.values();
    for (auto& x : v) x = rng.bernoulli(rate) ? 0.0f : x * keep_scale;
    out.emplace_back(base.n(), base.d(), std::move(v));
  }
  return out;
}

PassProbabilities linear_probe_probabilities(std::span<const EmbeddingStore> passes,
                                             std::size_t class_count, std::uint64_t seed) {
  if (passes.empty()) throw Error(ErrorCode::kEmpty, "no passes");
  if (class_count == 0) throw Error(ErrorCode::kInvalidArgument, "probe needs classes");
  const std::size_t n = passes.front().n();
  const std::size_t d = passes.front().d();
  Rng rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<double> w(d * class_count);
  for (auto& v : w) v = rng.normal(0.0, scale);

  PassProbabilities out;
  out.passes = passes.size();
  out.n = n;
  out.classes = class_count;
  out.values.resize(out.passes * n * class_count);
  std::vector<double> logits(class_count);
  for (std::size_t t = 0; t < passes.size(); ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = passes[t].row(i);
      double max_logit = -1e300;
      for (std::size_t c = 0; c < class_count; ++c) {
        double z = 0.0;
        for (std::size_t k = 0; k < d; ++k) z += row[k] * w[k * class_count + c];
        logits[c] = z;
        max_logit = std::max(max_logit, z);
      }
      double sum = 0.0;
      for (auto& z : logits) {
        z = std::exp(z - max_logit);
        sum += z;
      }
      double* dst = out.values.data() + (t * n + i) * class_count;
      for (std::size_t c = 0; c < class_count; ++c) dst[c] = logits[c] / sum;
    }
  }
  return out;
}

std::vector<double> selection_distribution(std::span<const double> scores,
                                           std::span<const std::size_t> pool, double epsilon) {
  if (pool.empty()) throw Error(ErrorCode::kEmpty, "empty pool");
  double total = 0.0;
  for (auto i : pool) {
    if (!(scores[i] >= 0.0) || !std::isfinite(scores[i])) {
      throw Error(ErrorCode::kValidation, "scores must be finite and nonnegative");
    }
    total += scores[i];
  }
  const double uniform = 1.0 / static_cast<double>(pool.size());
  std::vector<double> probs(pool.size(), uniform);
  if (total <= 0.0) return probs;
  for (std::size_t k = 0; k < pool.size(); ++k) {
    probs[k] = (1.0 - epsilon) * scores[pool[k]] / total + epsilon * uniform;
  }
  return probs;
}

double weighting_probability(std::span<const double> scores,
                             std::span<const std::size_t> population, std::size_t index,
                             double epsilon) {
  if (population.empty()) throw Error(ErrorCode::kEmpty, "empty population");
  double total = 0.0;
  double lo = scores[population.front()];
  double hi = lo;
  for (auto i : population) {
    total += scores[i];
    lo = std::min(lo, scores[i]);
    hi = std::max(hi, scores[i]);
  }
  const double uniform = 1.0 / static_cast<double>(population.size());
  // Constant scores give exactly 1/|population|.
  if (total <= 0.0 || lo == hi) return uniform;
  return (1.0 - epsilon) * scores[index] / total + epsilon * uniform;
}

}  // namespace activetest
