#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "activetest/data_model.hpp"

namespace activetest {

/// Stacked per-head attention matrices: heads x rows x cols, row-major.
struct HeadWeights {
  std::size_t heads = 0;
  std::size_t tokens = 0;  // T (rows == cols)
  std::size_t valid = 0;   // leading positions that are real tokens
  std::vector<double> values;

  double at(std::size_t h, std::size_t r, std::size_t c) const {
    return values[(h * tokens + r) * tokens + c];
  }
};

/// Frozen multi-head self-attention scorer. Only the query/key projections
/// matter for the weights; there is no value projection.
class AttentionLayer {
 public:
  static constexpr std::size_t kDefaultHeads = 8;
  static constexpr std::size_t kMaxTokens = 512;

  /// Seeded projections drawn uniformly from [-1/sqrt(d), 1/sqrt(d)], where d
  /// is the input width padded up to a multiple of the head count.
  static AttentionLayer seeded(std::size_t input_dim, std::uint64_t seed,
                               std::size_t heads = kDefaultHeads);

  std::size_t heads() const { return heads_; }
  std::size_t input_dim() const { return input_dim_; }
  std::size_t model_dim() const { return model_dim_; }
  std::size_t head_dim() const { return model_dim_ / heads_; }

  /// softmax(Q K^T / sqrt(head_dim)) per head over T tokens of width
  /// input_dim. Keys at positions >= valid are masked out.
  HeadWeights weights(std::span<const float> tokens, std::size_t count,
                      std::size_t valid) const;
  HeadWeights weights(std::span<const float> tokens, std::size_t count) const {
    return weights(tokens, count, count);
  }

 private:
  std::size_t heads_ = 0;
  std::size_t input_dim_ = 0;
  std::size_t model_dim_ = 0;
  // Per head, model_dim x head_dim, row-major.
  std::vector<std::vector<double>> wq_;
  std::vector<std::vector<double>> wk_;
};

/// Mean over valid (t, t') entries of the across-head population variance.
double agreement_score(const HeadWeights& w);

/// Scores every sample in the store; sequences longer than kMaxTokens are
/// truncated.
std::vector<double> agreement_scores(const AttentionLayer& layer,
                                     const TokenEmbeddingStore& store);

}  // namespace activetest
