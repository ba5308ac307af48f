#include "activetest/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "activetest/error.hpp"
#include "activetest/rng.hpp"

namespace activetest {

AttentionLayer AttentionLayer::seeded(std::size_t input_dim, std::uint64_t seed,
                                      std::size_t heads) {
  if (input_dim == 0 || heads == 0) {
    throw Error(ErrorCode::kInvalidArgument, "attention layer needs positive width and heads");
  }
  AttentionLayer layer;
  layer.heads_ = heads;
  layer.input_dim_ = input_dim;
  layer.model_dim_ = (input_dim + heads - 1) / heads * heads;
  const std::size_t hd = layer.head_dim();
  const double bound = 1.0 / std::sqrt(static_cast<double>(layer.model_dim_));
  Rng rng(seed);
  layer.wq_.resize(heads);
  layer.wk_.resize(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    layer.wq_[h].resize(layer.model_dim_ * hd);
    layer.wk_[h].resize(layer.model_dim_ * hd);
    for (auto& v : layer.wq_[h]) v = rng.uniform(-bound, bound);
    for (auto& v : layer.wk_[h]) v = rng.uniform(-bound, bound);
  }
  return layer;
}

HeadWeights AttentionLayer::weights(std::span<const float> tokens, std::size_t count,
                                    std::size_t valid) const {
  if (count == 0 || valid == 0 || valid > count) {
    throw Error(ErrorCode::kInvalidArgument, "attention needs 1 <= valid <= T");
  }
  if (tokens.size() < count * input_dim_) {
    throw Error(ErrorCode::kCountMismatch, "token block smaller than T x d");
  }
  for (std::size_t i = 0; i < count * input_dim_; ++i) {
    if (!std::isfinite(tokens[i])) throw Error(ErrorCode::kNonFinite, "non-finite token value");
  }
  const std::size_t hd = head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  HeadWeights out;
  out.heads = heads_;
  out.tokens = count;
  out.valid = valid;
  out.values.assign(heads_ * count * count, 0.0);

  std::vector<double> q(count * hd);
  std::vector<double> k(count * hd);
  std::vector<double> logits(count);
  for (std::size_t h = 0; h < heads_; ++h) {
    // Padded input columns are zero, so only the first input_dim rows of the
    // projections contribute.
    std::fill(q.begin(), q.end(), 0.0);
    std::fill(k.begin(), k.end(), 0.0);
    for (std::size_t t = 0; t < count; ++t) {
      const float* x = tokens.data() + t * input_dim_;
      for (std::size_t j = 0; j < input_dim_; ++j) {
        const double xj = x[j];
        if (xj == 0.0) continue;
        const double* wq = wq_[h].data() + j * hd;
        const double* wk = wk_[h].data() + j * hd;
        for (std::size_t c = 0; c < hd; ++c) {
          q[t * hd + c] += xj * wq[c];
          k[t * hd + c] += xj * wk[c];
        }
      }
    }
    for (std::size_t r = 0; r < count; ++r) {
      double max_logit = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < valid; ++c) {
        double dot = 0.0;
        for (std::size_t e = 0; e < hd; ++e) dot += q[r * hd + e] * k[c * hd + e];
        logits[c] = dot * scale;
        max_logit = std::max(max_logit, logits[c]);
      }
      double z = 0.0;
      for (std::size_t c = 0; c < valid; ++c) {
        logits[c] = std::exp(logits[c] - max_logit);
        z += logits[c];
      }
      double* row = out.values.data() + (h * count + r) * count;
      for (std::size_t c = 0; c < valid; ++c) row[c] = logits[c] / z;
    }
  }
  return out;
}

double agreement_score(const HeadWeights& w) {
  if (w.heads == 0 || w.valid == 0) return 0.0;
  const double heads = static_cast<double>(w.heads);
  double total = 0.0;
  for (std::size_t r = 0; r < w.valid; ++r) {
    for (std::size_t c = 0; c < w.valid; ++c) {
      double mean = 0.0;
      for (std::size_t h = 0; h < w.heads; ++h) mean += w.at(h, r, c);
      mean /= heads;
      double var = 0.0;
      for (std::size_t h = 0; h < w.heads; ++h) {
        const double d = w.at(h, r, c) - mean;
        var += d * d;
      }
      total += var / heads;
    }
  }
  return total / static_cast<double>(w.valid * w.valid);
}

std::vector<double> agreement_scores(const AttentionLayer& layer,
                                     const TokenEmbeddingStore& store) {
  if (store.d() != layer.input_dim()) {
    throw Error(ErrorCode::kCountMismatch, "token width does not match the attention layer");
  }
  std::vector<double> scores(store.n());
  for (std::size_t i = 0; i < store.n(); ++i) {
    const std::size_t t = std::min(store.token_count(i), AttentionLayer::kMaxTokens);
    scores[i] = agreement_score(layer.weights(store.tokens(i), t));
  }
  return scores;
}

}  // namespace activetest
