#include "activetest/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "activetest/error.hpp"
#include "activetest/rng.hpp"

namespace activetest {

namespace {

void check_training_set(const FeatureMatrix& x, std::span<const std::int64_t> labels,
                        std::size_t class_count) {
  if (x.rows == 0 || labels.empty()) throw Error(ErrorCode::kEmpty, "empty training set");
  if (labels.size() != x.rows || x.values.size() < x.rows * x.cols) {
    throw Error(ErrorCode::kCountMismatch, "training rows and labels differ");
  }
  for (auto y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= class_count) {
      throw Error(ErrorCode::kOutOfRange, "training label outside the class range");
    }
  }
}

double gini(std::span<const std::size_t> counts, std::size_t total) {
  if (total == 0) return 0.0;
  double s = 0.0;
  for (auto c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    s += p * p;
  }
  return 1.0 - s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Random forest

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& x, std::span<const std::int64_t> labels,
              std::size_t class_count, const ForestParams& params, Rng& rng)
      : x_(x), labels_(labels), classes_(class_count), params_(params), rng_(rng) {
    mtry_ = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(x.cols)))));
  }

  ForestModel::Tree build(std::vector<std::size_t> sample) {
    tree_.clear();
    grow(sample, 0);
    return std::move(tree_);
  }

 private:
  std::uint32_t grow(std::vector<std::size_t>& idx, std::size_t depth) {
    const auto node_id = static_cast<std::uint32_t>(tree_.size());
    tree_.emplace_back();

    std::vector<std::size_t> counts(classes_, 0);
    for (auto i : idx) ++counts[labels_[i]];
    const auto majority = static_cast<std::int64_t>(
        std::max_element(counts.begin(), counts.end()) - counts.begin());
    tree_[node_id].label = majority;

    const std::size_t total = idx.size();
    const double parent = gini(counts, total);
    if (parent <= 0.0 || depth >= params_.max_depth || total < 2 * params_.min_leaf) {
      return node_id;
    }

    // Visit features in random order; keep looking past mtry until a usable
    // split turns up.
    std::vector<std::size_t> features(x_.cols);
    std::iota(features.begin(), features.end(), 0);
    for (std::size_t k = 0; k + 1 < features.size(); ++k) {
      std::swap(features[k], features[k + rng_.index(features.size() - k)]);
    }

    double best = parent - 1e-12;
    int best_feature = -1;
    float best_threshold = 0.0f;
    std::vector<std::pair<float, std::int64_t>> column(total);
    std::vector<std::size_t> left(classes_);
    std::vector<std::size_t> right(classes_);
    for (std::size_t fi = 0; fi < features.size(); ++fi) {
      if (fi >= mtry_ && best_feature >= 0) break;
      const std::size_t f = features[fi];
      for (std::size_t k = 0; k < total; ++k) column[k] = {x_.row(idx[k])[f], labels_[idx[k]]};
      std::sort(column.begin(), column.end());
      std::fill(left.begin(), left.end(), 0);
      right = counts;
      for (std::size_t k = 0; k + 1 < total; ++k) {
        ++left[column[k].second];
        --right[column[k].second];
        if (column[k].first == column[k + 1].first) continue;
        const std::size_t nl = k + 1;
        const std::size_t nr = total - nl;
        if (nl < params_.min_leaf || nr < params_.min_leaf) continue;
        const double impurity = (static_cast<double>(nl) * gini(left, nl) +
                                 static_cast<double>(nr) * gini(right, nr)) /
                                static_cast<double>(total);
        if (impurity < best) {
          best = impurity;
          best_feature = static_cast<int>(f);
          best_threshold = 0.5f * (column[k].first + column[k + 1].first);
          // Midpoint can round onto the upper value for adjacent floats.
          if (!(best_threshold < column[k + 1].first)) best_threshold = column[k].first;
        }
      }
    }
    if (best_feature < 0) return node_id;

    std::vector<std::size_t> lo;
    std::vector<std::size_t> hi;
    for (auto i : idx) {
      (x_.row(i)[best_feature] <= best_threshold ? lo : hi).push_back(i);
    }
    idx.clear();
    idx.shrink_to_fit();
    tree_[node_id].feature = best_feature;
    tree_[node_id].threshold = best_threshold;
    const auto l = grow(lo, depth + 1);
    const auto r = grow(hi, depth + 1);
    tree_[node_id].left = l;
    tree_[node_id].right = r;
    return node_id;
  }

  const FeatureMatrix& x_;
  std::span<const std::int64_t> labels_;
  std::size_t classes_;
  ForestParams params_;
  Rng& rng_;
  std::size_t mtry_ = 1;
  ForestModel::Tree tree_;
};

ForestModel ForestModel::train(const FeatureMatrix& x, std::span<const std::int64_t> labels,
                               std::size_t class_count, std::uint64_t seed,
                               const ForestParams& params) {
  check_training_set(x, labels, class_count);
  if (params.trees == 0) throw Error(ErrorCode::kInvalidArgument, "forest needs trees");
  ForestModel model;
  model.class_count_ = class_count;
  model.trees_.reserve(params.trees);
  Rng master(seed);
  for (std::size_t t = 0; t < params.trees; ++t) {
    Rng rng(master.fork_seed());
    std::vector<std::size_t> sample(x.rows);
    for (auto& s : sample) s = rng.index(x.rows);
    TreeBuilder builder(x, labels, class_count, params, rng);
    model.trees_.push_back(builder.build(std::move(sample)));
  }
  return model;
}

std::int64_t ForestModel::vote(const Tree& tree, std::span<const float> x) const {
  std::uint32_t node = 0;
  while (tree[node].feature >= 0) {
    node = x[tree[node].feature] <= tree[node].threshold ? tree[node].left : tree[node].right;
  }
  return tree[node].label;
}

std::vector<double> ForestModel::predict_proba(std::span<const float> x) const {
  std::vector<double> p(class_count_, 1.0);
  for (const auto& tree : trees_) p[vote(tree, x)] += 1.0;
  const double z = static_cast<double>(trees_.size() + class_count_);
  for (auto& v : p) v /= z;
  return p;
}

// ---------------------------------------------------------------------------
// SMO

SmoResult solve_smo(std::span<const double> kernel, std::span<const int> y, double c,
                    double tolerance, std::size_t max_iterations) {
  const std::size_t n = y.size();
  if (kernel.size() != n * n) throw Error(ErrorCode::kCountMismatch, "kernel must be n x n");
  constexpr double kTau = 1e-12;
  auto k = [&](std::size_t i, std::size_t j) { return kernel[i * n + j]; };
  auto q = [&](std::size_t i, std::size_t j) { return y[i] * y[j] * k(i, j); };

  SmoResult out;
  out.alpha.assign(n, 0.0);
  std::vector<double> grad(n, -1.0);
  auto& alpha = out.alpha;
  auto is_upper = [&](std::size_t t) { return alpha[t] >= c; };
  auto is_lower = [&](std::size_t t) { return alpha[t] <= 0.0; };

  for (; out.iterations < max_iterations; ++out.iterations) {
    // Maximal violating pair with second-order choice of j.
    double gmax = -std::numeric_limits<double>::infinity();
    std::ptrdiff_t i_sel = -1;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] == 1) {
        if (!is_upper(t) && -grad[t] >= gmax) {
          gmax = -grad[t];
          i_sel = static_cast<std::ptrdiff_t>(t);
        }
      } else if (!is_lower(t) && grad[t] >= gmax) {
        gmax = grad[t];
        i_sel = static_cast<std::ptrdiff_t>(t);
      }
    }
    if (i_sel < 0) break;
    const auto i = static_cast<std::size_t>(i_sel);

    double gmax2 = -std::numeric_limits<double>::infinity();
    double obj_min = std::numeric_limits<double>::infinity();
    std::ptrdiff_t j_sel = -1;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] == 1) {
        if (is_lower(t)) continue;
        const double diff = gmax + grad[t];
        gmax2 = std::max(gmax2, grad[t]);
        if (diff > 0.0) {
          double quad = k(i, i) + k(t, t) - 2.0 * y[i] * q(i, t);
          if (quad <= 0.0) quad = kTau;
          const double obj = -(diff * diff) / quad;
          if (obj <= obj_min) {
            obj_min = obj;
            j_sel = static_cast<std::ptrdiff_t>(t);
          }
        }
      } else {
        if (is_upper(t)) continue;
        const double diff = gmax - grad[t];
        gmax2 = std::max(gmax2, -grad[t]);
        if (diff > 0.0) {
          double quad = k(i, i) + k(t, t) + 2.0 * y[i] * q(i, t);
          if (quad <= 0.0) quad = kTau;
          const double obj = -(diff * diff) / quad;
          if (obj <= obj_min) {
            obj_min = obj;
            j_sel = static_cast<std::ptrdiff_t>(t);
          }
        }
      }
    }
    if (gmax + gmax2 < tolerance || j_sel < 0) break;
    const auto j = static_cast<std::size_t>(j_sel);

    const double old_ai = alpha[i];
    const double old_aj = alpha[j];
    if (y[i] != y[j]) {
      double quad = k(i, i) + k(j, j) + 2.0 * q(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = c - diff;
        }
      } else if (alpha[j] > c) {
        alpha[j] = c;
        alpha[i] = c + diff;
      }
    } else {
      double quad = k(i, i) + k(j, j) - 2.0 * q(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = sum - c;
        }
      } else if (alpha[j] < 0.0) {
        alpha[j] = 0.0;
        alpha[i] = sum;
      }
      if (sum > c) {
        if (alpha[j] > c) {
          alpha[j] = c;
          alpha[i] = sum - c;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = sum;
      }
    }
    const double dai = alpha[i] - old_ai;
    const double daj = alpha[j] - old_aj;
    for (std::size_t t = 0; t < n; ++t) grad[t] += q(i, t) * dai + q(j, t) * daj;
  }

  // rho from free vectors, else midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  std::size_t free_count = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (is_upper(t)) {
      if (y[t] == -1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (is_lower(t)) {
      if (y[t] == 1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++free_count;
      sum_free += yg;
    }
  }
  const double rho = free_count > 0 ? sum_free / static_cast<double>(free_count) : (ub + lb) / 2.0;
  out.bias = -rho;
  return out;
}

std::pair<double, double> fit_sigmoid(std::span<const double> decision, std::span<const int> y) {
  const std::size_t n = decision.size();
  double prior1 = 0.0;
  double prior0 = 0.0;
  for (int v : y) (v > 0 ? prior1 : prior0) += 1.0;
  const double hi = (prior1 + 1.0) / (prior1 + 2.0);
  const double lo = 1.0 / (prior0 + 2.0);
  std::vector<double> target(n);
  for (std::size_t i = 0; i < n; ++i) target[i] = y[i] > 0 ? hi : lo;

  double a = 0.0;
  double b = std::log((prior0 + 1.0) / (prior1 + 1.0));
  auto objective = [&](double na, double nb) {
    double f = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = decision[i] * na + nb;
      f += z >= 0.0 ? target[i] * z + std::log1p(std::exp(-z))
                    : (target[i] - 1.0) * z + std::log1p(std::exp(z));
    }
    return f;
  };
  double fval = objective(a, b);
  constexpr double kSigma = 1e-12;
  for (int iter = 0; iter < 100; ++iter) {
    double h11 = kSigma, h22 = kSigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = decision[i] * a + b;
      double p, q;
      if (z >= 0.0) {
        p = std::exp(-z) / (1.0 + std::exp(-z));
        q = 1.0 / (1.0 + std::exp(-z));
      } else {
        p = 1.0 / (1.0 + std::exp(z));
        q = std::exp(z) / (1.0 + std::exp(z));
      }
      const double d2 = p * q;
      h11 += decision[i] * decision[i] * d2;
      h22 += d2;
      h21 += decision[i] * d2;
      const double d1 = target[i] - p;
      g1 += decision[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < 1e-5 && std::abs(g2) < 1e-5) break;
    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;
    double step = 1.0;
    while (step >= 1e-10) {
      const double na = a + step * da;
      const double nb = b + step * db;
      const double nf = objective(na, nb);
      if (nf < fval + 1e-4 * step * gd) {
        a = na;
        b = nb;
        fval = nf;
        break;
      }
      step /= 2.0;
    }
    if (step < 1e-10) break;
  }
  return {a, b};
}

// ---------------------------------------------------------------------------
// Kernel SVM

double KernelSvmModel::kernel(std::span<const float> a, std::span<const float> b) const {
  double d2 = 0.0;
  for (std::size_t k = 0; k < dim_; ++k) {
    const double d = static_cast<double>(a[k]) - static_cast<double>(b[k]);
    d2 += d * d;
  }
  return std::exp(-gamma_ * d2);
}

KernelSvmModel KernelSvmModel::train(const FeatureMatrix& x, std::span<const std::int64_t> labels,
                                     std::size_t class_count, std::uint64_t /*seed*/,
                                     const SvmParams& params) {
  check_training_set(x, labels, class_count);
  std::vector<std::size_t> per_class(class_count, 0);
  for (auto y : labels) ++per_class[y];
  const auto present = std::count_if(per_class.begin(), per_class.end(),
                                     [](std::size_t c) { return c > 0; });
  if (present < 2) {
    throw Error(ErrorCode::kDegenerateModel, "SVM surrogate needs at least two classes");
  }

  KernelSvmModel model;
  model.class_count_ = class_count;
  model.dim_ = x.cols;
  model.gamma_ = params.gamma > 0.0 ? params.gamma : 1.0 / static_cast<double>(x.cols);
  model.rows_.assign(x.values.begin(), x.values.begin() + x.rows * x.cols);

  const std::size_t n = x.rows;
  std::vector<double> gram(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    gram[i * n + i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      gram[i * n + j] = gram[j * n + i] = model.kernel(x.row(i), x.row(j));
    }
  }

  model.machines_.resize(class_count);
  std::vector<int> y(n);
  std::vector<double> dec(n);
  for (std::size_t c = 0; c < class_count; ++c) {
    if (per_class[c] == 0) continue;
    for (std::size_t i = 0; i < n; ++i) y[i] = labels[i] == static_cast<std::int64_t>(c) ? 1 : -1;
    const auto smo = solve_smo(gram, y, params.c, params.tolerance, params.max_iterations);
    Binary& m = model.machines_[c];
    m.present = true;
    m.bias = smo.bias;
    for (std::size_t i = 0; i < n; ++i) {
      if (smo.alpha[i] > 0.0) {
        m.support.push_back(i);
        m.coef.push_back(smo.alpha[i] * y[i]);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      double f = m.bias;
      for (std::size_t s = 0; s < m.support.size(); ++s) f += m.coef[s] * gram[m.support[s] * n + i];
      dec[i] = f;
    }
    std::tie(m.sigmoid_a, m.sigmoid_b) = fit_sigmoid(dec, y);
  }
  return model;
}

double KernelSvmModel::decision(std::size_t c, std::span<const float> x) const {
  const Binary& m = machines_.at(c);
  if (!m.present) throw Error(ErrorCode::kDegenerateModel, "class absent from SVM training set");
  double f = m.bias;
  for (std::size_t s = 0; s < m.support.size(); ++s) {
    const std::span<const float> row(rows_.data() + m.support[s] * dim_, dim_);
    f += m.coef[s] * kernel(row, x);
  }
  return f;
}

std::vector<double> KernelSvmModel::predict_proba(std::span<const float> x) const {
  if (x.size() != dim_) throw Error(ErrorCode::kCountMismatch, "query width mismatch");
  std::vector<double> p(class_count_, 0.0);
  double z = 0.0;
  for (std::size_t c = 0; c < class_count_; ++c) {
    if (!machines_[c].present) continue;
    const double t = decision(c, x) * machines_[c].sigmoid_a + machines_[c].sigmoid_b;
    p[c] = t >= 0.0 ? std::exp(-t) / (1.0 + std::exp(-t)) : 1.0 / (1.0 + std::exp(t));
    z += p[c];
  }
  for (auto& v : p) v /= z;
  return p;
}

}  // namespace activetest
