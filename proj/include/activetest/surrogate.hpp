#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace activetest {

/// Row-major training matrix view.
struct FeatureMatrix {
  std::span<const float> values;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::span<const float> row(std::size_t i) const { return values.subspan(i * cols, cols); }
};

struct ForestParams {
  std::size_t trees = 300;
  std::size_t max_depth = 16;
  std::size_t min_leaf = 1;
};

/// Bagged Gini trees with sqrt(d) feature subsampling per split. Class
/// probabilities are Laplace-smoothed vote fractions: (votes_c + 1) / (T + C).
class ForestModel {
 public:
  static ForestModel train(const FeatureMatrix& x, std::span<const std::int64_t> labels,
                           std::size_t class_count, std::uint64_t seed,
                           const ForestParams& params = {});

  std::vector<double> predict_proba(std::span<const float> x) const;
  std::size_t class_count() const { return class_count_; }
  std::size_t tree_count() const { return trees_.size(); }

 private:
  struct Node {
    // Leaf when feature < 0.
    int feature = -1;
    float threshold = 0.0f;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    std::int64_t label = 0;
  };
  using Tree = std::vector<Node>;

  std::int64_t vote(const Tree& tree, std::span<const float> x) const;

  std::size_t class_count_ = 0;
  std::vector<Tree> trees_;

  friend class TreeBuilder;
};

struct SvmParams {
  double c = 1.0;
  double gamma = 0.0;  // 0 selects 1/d
  double tolerance = 1e-3;
  std::size_t max_iterations = 100000;
};

/// One-vs-rest RBF-kernel SVMs trained with SMO, each calibrated with a
/// sigmoid fitted on its training decision values.
class KernelSvmModel {
 public:
  static KernelSvmModel train(const FeatureMatrix& x, std::span<const std::int64_t> labels,
                              std::size_t class_count, std::uint64_t seed,
                              const SvmParams& params = {});

  std::vector<double> predict_proba(std::span<const float> x) const;
  /// Raw decision value of the binary problem for class c.
  double decision(std::size_t c, std::span<const float> x) const;
  std::size_t class_count() const { return class_count_; }

 private:
  struct Binary {
    bool present = false;
    std::vector<std::size_t> support;  // indices into the stored training rows
    std::vector<double> coef;          // alpha_i * y_i
    double bias = 0.0;
    double sigmoid_a = 0.0;
    double sigmoid_b = 0.0;
  };

  double kernel(std::span<const float> a, std::span<const float> b) const;

  std::size_t class_count_ = 0;
  std::size_t dim_ = 0;
  double gamma_ = 0.0;
  std::vector<float> rows_;
  std::vector<Binary> machines_;
};

/// Dual solver for one binary problem: min 1/2 a'Qa - e'a, 0 <= a <= C,
/// y'a = 0, with Q_ij = y_i y_j K_ij. Returns alphas and the bias b so that
/// f(x) = sum a_i y_i K(x_i, x) + b.
struct SmoResult {
  std::vector<double> alpha;
  double bias = 0.0;
  std::size_t iterations = 0;
};
SmoResult solve_smo(std::span<const double> kernel, std::span<const int> y, double c,
                    double tolerance, std::size_t max_iterations);

/// Platt-style sigmoid fit: P(y=1|f) = 1 / (1 + exp(a f + b)).
std::pair<double, double> fit_sigmoid(std::span<const double> decision, std::span<const int> y);

}  // namespace activetest
