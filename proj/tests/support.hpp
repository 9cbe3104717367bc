#pragma once

// Independent reference computations and random generators for the tests.
// Nothing here calls into the library's numerical code paths.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace testsupport {

struct Gen {
  std::mt19937_64 eng;
  explicit Gen(std::uint64_t seed) : eng(seed) {}

  double uniform(double lo = -1.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(eng); }
  double normal(double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(eng); }
  long integer(long lo, long hi) { return std::uniform_int_distribution<long>(lo, hi)(eng); }
  bool coin() { return integer(0, 1) == 1; }

  Eigen::VectorXd vector(long d, double lo = -1.0, double hi = 1.0) {
    Eigen::VectorXd v(d);
    for (long i = 0; i < d; ++i) v(i) = uniform(lo, hi);
    return v;
  }

  /// Random PSD matrix A A^T / cols, optionally rank-deficient.
  Eigen::MatrixXd psd(long n, long rank) {
    Eigen::MatrixXd a(n, rank);
    for (long i = 0; i < n; ++i) {
      for (long j = 0; j < rank; ++j) a(i, j) = normal();
    }
    Eigen::MatrixXd k = a * a.transpose() / static_cast<double>(std::max(1L, rank));
    return 0.5 * (k + k.transpose());
  }
};

/// argmin_theta sum_s (y_s - theta'x_s)^2 + lambda ||theta||^2 + (x'theta)^2,
/// evaluated at x, by a dense LDLT solve of the normal equations.
inline double awv_dense(const std::vector<Eigen::VectorXd>& xs, const std::vector<double>& ys,
                        const Eigen::VectorXd& x, double lambda) {
  const long d = x.size();
  Eigen::MatrixXd a = lambda * Eigen::MatrixXd::Identity(d, d) + x * x.transpose();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    a += xs[i] * xs[i].transpose();
    b += ys[i] * xs[i];
  }
  return x.dot(a.ldlt().solve(b));
}

/// k_x^T (K_ext + lambda I)^{-1} (y, 0) by a dense solve; `k` is any
/// callable k(a, b).
template <typename K>
double kernel_awv_dense(const std::vector<Eigen::VectorXd>& xs, const std::vector<double>& ys,
                        const Eigen::VectorXd& x, double lambda, K&& k) {
  const long t = static_cast<long>(xs.size()) + 1;
  std::vector<Eigen::VectorXd> pts = xs;
  pts.push_back(x);
  Eigen::MatrixXd gram(t, t);
  for (long i = 0; i < t; ++i) {
    for (long j = 0; j < t; ++j) gram(i, j) = k(pts[i], pts[j]);
  }
  Eigen::VectorXd yt = Eigen::VectorXd::Zero(t);
  for (long i = 0; i + 1 < t; ++i) yt(i) = ys[static_cast<std::size_t>(i)];
  const Eigen::MatrixXd reg = gram + lambda * Eigen::MatrixXd::Identity(t, t);
  return gram.col(t - 1).dot(reg.fullPivLu().solve(yt));
}

/// sum_i mu_i / (mu_i + lambda) over the eigenvalues of K.
inline double effective_dimension_eigen(const Eigen::MatrixXd& k, double lambda) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k, Eigen::EigenvaluesOnly);
  double s = 0.0;
  for (long i = 0; i < es.eigenvalues().size(); ++i) {
    const double mu = std::max(0.0, es.eigenvalues()(i));
    s += mu / (mu + lambda);
  }
  return s;
}

inline double gaussian(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double bw) {
  return std::exp(-(a - b).squaredNorm() / (2.0 * bw * bw));
}

inline int floor_log2(unsigned long t) {
  int k = -1;
  while (t) {
    t >>= 1;
    ++k;
  }
  return k;
}

inline int ceil_log2(unsigned long t) {
  int k = 0;
  while ((1UL << k) < t) ++k;
  return k;
}

}  // namespace testsupport
