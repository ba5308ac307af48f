#include <cmath>
#include <numeric>

#include "activetest/rng.hpp"
#include "activetest/surrogate.hpp"
#include "test_util.hpp"

using namespace activetest;
using activetest::testing::code_of;

namespace {

struct Data {
  std::vector<float> x;
  std::vector<std::int64_t> y;
  std::size_t cols = 1;
  FeatureMatrix matrix() const { return {x, y.size(), cols}; }
};

Data clusters_1d(std::size_t per_side, std::uint64_t seed) {
  Rng rng(seed);
  Data d;
  for (std::size_t i = 0; i < per_side; ++i) {
    d.x.push_back(static_cast<float>(-10 + rng.normal(0, 0.5)));
    d.y.push_back(0);
    d.x.push_back(static_cast<float>(10 + rng.normal(0, 0.5)));
    d.y.push_back(1);
  }
  return d;
}

double rbf(double a, double b, double gamma) { return std::exp(-gamma * (a - b) * (a - b)); }

// Solves A x = b in place by Gaussian elimination with partial pivoting.
bool solve_linear(std::vector<std::vector<double>> a, std::vector<double> b, std::vector<double>& x) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    }
    if (std::abs(a[piv][col]) < 1e-14) return false;
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (std::size_t k = col; k < n; ++k) a[r][k] -= f * a[col][k];
      b[r] -= f * b[col];
    }
  }
  x.resize(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[i] / a[i][i];
  return true;
}

// Exact dual optimum of a tiny SVM by enumerating which multipliers sit at
// 0, at C, or strictly between.
std::vector<double> brute_force_dual(const std::vector<double>& k, const std::vector<int>& y,
                                     double c) {
  const std::size_t n = y.size();
  auto q = [&](std::size_t i, std::size_t j) { return y[i] * y[j] * k[i * n + j]; };
  double best_obj = -1e300;
  std::vector<double> best;
  std::size_t combos = 1;
  for (std::size_t i = 0; i < n; ++i) combos *= 3;
  for (std::size_t code = 0; code < combos; ++code) {
    std::vector<int> status(n);
    std::size_t t = code;
    for (std::size_t i = 0; i < n; ++i, t /= 3) status[i] = static_cast<int>(t % 3);
    std::vector<std::size_t> free;
    std::vector<double> alpha(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (status[i] == 1) alpha[i] = c;
      if (status[i] == 2) free.push_back(i);
    }
    if (!free.empty()) {
      const std::size_t m = free.size();
      std::vector<std::vector<double>> a(m + 1, std::vector<double>(m + 1, 0.0));
      std::vector<double> rhs(m + 1, 0.0);
      for (std::size_t r = 0; r < m; ++r) {
        const auto i = free[r];
        for (std::size_t s = 0; s < m; ++s) a[r][s] = q(i, free[s]);
        a[r][m] = y[i];
        rhs[r] = 1.0;
        for (std::size_t j = 0; j < n; ++j) {
          if (status[j] == 1) rhs[r] -= q(i, j) * c;
        }
        a[m][r] = y[i];
      }
      for (std::size_t j = 0; j < n; ++j) {
        if (status[j] == 1) rhs[m] -= y[j] * c;
      }
      std::vector<double> sol;
      if (!solve_linear(a, rhs, sol)) continue;
      bool ok = true;
      for (std::size_t r = 0; r < m; ++r) {
        if (sol[r] < -1e-12 || sol[r] > c + 1e-12) ok = false;
        alpha[free[r]] = sol[r];
      }
      if (!ok) continue;
    }
    double eq = 0.0;
    for (std::size_t i = 0; i < n; ++i) eq += y[i] * alpha[i];
    if (std::abs(eq) > 1e-9) continue;
    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      obj += alpha[i];
      for (std::size_t j = 0; j < n; ++j) obj -= 0.5 * alpha[i] * alpha[j] * q(i, j);
    }
    if (obj > best_obj) {
      best_obj = obj;
      best = alpha;
    }
  }
  return best;
}

}  // namespace

TEST(Forest, SinglePointSmoothing) {
  const std::vector<float> x{0.3f, 0.1f};
  const std::vector<std::int64_t> y{1};
  const auto m = ForestModel::train({x, 1, 2}, y, 3, 7);
  EXPECT_EQ(m.tree_count(), 300u);
  const auto p = m.predict_proba(std::vector<float>{5.0f, -5.0f});
  EXPECT_NEAR(p[1], 301.0 / 303.0, 1e-15);
  EXPECT_NEAR(p[0], 1.0 / 303.0, 1e-15);
  EXPECT_NEAR(p[2], 1.0 / 303.0, 1e-15);
}

TEST(Forest, SeparatedClusters) {
  const auto d = clusters_1d(20, 1);
  const auto m = ForestModel::train(d.matrix(), d.y, 2, 3);
  const auto p = m.predict_proba(std::vector<float>{10.0f});
  EXPECT_GT(p[1], p[0]);
  const auto n = m.predict_proba(std::vector<float>{-10.0f});
  EXPECT_GT(n[0], n[1]);
}

TEST(Forest, Deterministic) {
  const auto d = clusters_1d(15, 2);
  ForestParams small;
  small.trees = 40;
  const auto a = ForestModel::train(d.matrix(), d.y, 2, 99, small);
  const auto b = ForestModel::train(d.matrix(), d.y, 2, 99, small);
  for (float q : {-12.0f, -1.0f, 0.0f, 0.5f, 11.0f}) {
    EXPECT_EQ(a.predict_proba(std::vector<float>{q}), b.predict_proba(std::vector<float>{q}));
  }
}

TEST(Forest, ProbabilitiesSumToOne) {
  Rng rng(3);
  Data d;
  d.cols = 3;
  for (int i = 0; i < 60; ++i) {
    for (int k = 0; k < 3; ++k) d.x.push_back(static_cast<float>(rng.normal()));
    d.y.push_back(static_cast<std::int64_t>(rng.index(4)));
  }
  ForestParams small;
  small.trees = 25;
  const auto m = ForestModel::train(d.matrix(), d.y, 4, 5, small);
  const auto p = m.predict_proba(std::vector<float>{0.1f, 0.2f, -0.3f});
  EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
}

TEST(Smo, MatchesExactSmallQp) {
  const std::vector<double> xs{-2.0, -0.5, 0.4, 2.0};
  const std::vector<int> y{-1, 1, -1, 1};
  const double gamma = 1.0;
  std::vector<double> k(16);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) k[i * 4 + j] = rbf(xs[i], xs[j], gamma);
  }
  for (double c : {0.5, 1.0, 10.0}) {
    const auto exact = brute_force_dual(k, y, c);
    const auto smo = solve_smo(k, y, c, 1e-10, 100000);
    ASSERT_EQ(exact.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(smo.alpha[i], exact[i], 1e-6) << "C=" << c;
  }
}

TEST(Smo, SeparableDataKkt) {
  const std::vector<double> xs{-3, -2, -1.5, 1.5, 2, 3};
  const std::vector<int> y{-1, -1, -1, 1, 1, 1};
  std::vector<double> k(36);
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 6; ++j) k[i * 6 + j] = rbf(xs[i], xs[j], 1.0);
  }
  const auto r = solve_smo(k, y, 1.0, 1e-3, 100000);
  double eq = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    eq += r.alpha[i] * y[i];
    double f = r.bias;
    for (std::size_t j = 0; j < 6; ++j) f += r.alpha[j] * y[j] * k[i * 6 + j];
    EXPECT_GT(f * y[i], 0.0);
  }
  EXPECT_NEAR(eq, 0.0, 1e-12);
}

TEST(Sigmoid, SymmetricDataHasZeroOffset) {
  const std::vector<double> f{-2, -1, 1, 2};
  const std::vector<int> y{-1, -1, 1, 1};
  const auto [a, b] = fit_sigmoid(f, y);
  EXPECT_LT(a, 0.0);
  EXPECT_NEAR(b, 0.0, 1e-9);
}

TEST(Svm, FarInsideClass) {
  const std::vector<float> x{-3, -2, 2, 3};
  const std::vector<std::int64_t> y{0, 0, 1, 1};
  const auto m = KernelSvmModel::train({x, 4, 1}, y, 2, 0);
  const auto p = m.predict_proba(std::vector<float>{2.5f});
  EXPECT_GT(p[1], p[0]);
  const auto q = m.predict_proba(std::vector<float>{-2.5f});
  EXPECT_GT(q[0], q[1]);
}

TEST(Svm, SymmetricMidpoint) {
  const std::vector<float> x{-1, 1};
  const std::vector<std::int64_t> y{0, 1};
  const auto m = KernelSvmModel::train({x, 2, 1}, y, 2, 0);
  const auto p = m.predict_proba(std::vector<float>{0.0f});
  EXPECT_NEAR(p[0], 0.5, 1e-6);
  EXPECT_NEAR(p[1], 0.5, 1e-6);
}

TEST(Svm, DeterministicAndNormalized) {
  const auto d = clusters_1d(10, 4);
  const auto a = KernelSvmModel::train(d.matrix(), d.y, 3, 1);
  const auto b = KernelSvmModel::train(d.matrix(), d.y, 3, 1);
  const auto pa = a.predict_proba(std::vector<float>{1.0f});
  EXPECT_EQ(pa, b.predict_proba(std::vector<float>{1.0f}));
  EXPECT_NEAR(std::accumulate(pa.begin(), pa.end(), 0.0), 1.0, 1e-12);
  EXPECT_EQ(pa[2], 0.0);  // class 2 never seen
}

TEST(Svm, SingleClassIsDegenerate) {
  const std::vector<float> x{1, 2};
  const std::vector<std::int64_t> y{1, 1};
  EXPECT_EQ(code_of([&] { KernelSvmModel::train({x, 2, 1}, y, 2, 0); }),
            ErrorCode::kDegenerateModel);
}
