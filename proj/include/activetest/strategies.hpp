#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "activetest/data_model.hpp"

namespace activetest {

enum class StrategyKind {
  kRandom,
  kStratifiedRandom,
  kCoverage,
  kUncertaintyMi,
  kUncertaintyGp,
  kSurrogateRf,
  kSurrogateSvm,
  kAgreement,
};

/// Config strings: "random", "stratified", "coverage", "uncertainty-mi",
/// "uncertainty-gp", "surrogate-rf", "surrogate-svm", "agreement".
StrategyKind parse_strategy(const std::string& name);
std::string to_string(StrategyKind kind);

/// T stochastic passes of n class distributions over C classes.
struct PassProbabilities {
  std::size_t passes = 0;
  std::size_t n = 0;
  std::size_t classes = 0;
  std::vector<double> values;  // passes x n x classes

  std::span<const double> at(std::size_t t, std::size_t i) const {
    return {values.data() + (t * n + i) * classes, classes};
  }
};

std::vector<double> random_scores(std::size_t pool_size);

/// Per-class sample quotas proportional to class frequency, rounded by
/// largest remainder (ties to the lower class index). Sums to budget.
std::vector<std::size_t> stratified_quota(std::span<const std::int64_t> labels,
                                          std::size_t class_count, std::size_t budget);

/// Euclidean distance of every point to the last selected point; all ones
/// when nothing has been selected yet.
std::vector<double> coverage_scores(const EmbeddingStore& embeddings,
                                    std::optional<std::size_t> last_selected);

/// Natural-log Shannon entropy.
double entropy(std::span<const double> p);

/// H(mean_t p_t) - mean_t H(p_t), clipped at 0.
std::vector<double> mi_scores(const PassProbabilities& passes);

/// (sum_d std_t e_{t,i,d})^2 with population std. Needs T >= 2.
std::vector<double> gp_scores(std::span<const EmbeddingStore> passes);

std::vector<double> entropy_scores(const std::vector<std::vector<double>>& distributions);

/// Inverted Bernoulli dropout applied T times to a deterministic embedding.
std::vector<EmbeddingStore> dropout_passes(const EmbeddingStore& base, std::size_t passes,
                                           double rate, std::uint64_t seed);

/// Seeded random linear probe with softmax head, evaluated on every pass.
PassProbabilities linear_probe_probabilities(std::span<const EmbeddingStore> passes,
                                             std::size_t class_count, std::uint64_t seed);

/// Selection distribution over a pool: (1 - eps) * normalized scores + eps * uniform.
/// Degenerates to uniform when every pool score is zero.
std::vector<double> selection_distribution(std::span<const double> scores,
                                           std::span<const std::size_t> pool, double epsilon);

/// Recorded weighting probability of item `index`: its score over the sum
/// of scores across `population`, floor-mixed with eps / |population|.
double weighting_probability(std::span<const double> scores,
                             std::span<const std::size_t> population, std::size_t index,
                             double epsilon);

}  // namespace activetest
