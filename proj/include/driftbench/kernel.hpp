#pragma once

// Kernel functions, the Kernel-AWV forecaster in representer form, effective
// dimension and the regularisation schedule for restarted kernel experts.

#include "driftbench/core.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace driftbench {

struct LinearKernel {};

/// exp(-||x - x'||^2 / (2 bandwidth^2))
struct GaussianKernel {
  double bandwidth = 1.0;
};

/// (x'x' + offset)^degree
struct PolynomialKernel {
  int degree = 2;
  double offset = 1.0;
};

using KernelFunction = std::variant<LinearKernel, GaussianKernel, PolynomialKernel>;

inline void validate_kernel(const KernelFunction& k) {
  if (const auto* g = std::get_if<GaussianKernel>(&k); g && !(g->bandwidth > 0)) {
    throw std::domain_error("gaussian kernel: bandwidth must be positive");
  }
  if (const auto* p = std::get_if<PolynomialKernel>(&k); p && (p->degree < 1 || p->offset < 0)) {
    throw std::domain_error("polynomial kernel: need degree >= 1 and offset >= 0");
  }
}

inline std::string kernel_name(const KernelFunction& k) {
  return std::visit(
      [](const auto& kk) -> std::string {
        using K = std::decay_t<decltype(kk)>;
        if constexpr (std::is_same_v<K, LinearKernel>) return "linear";
        if constexpr (std::is_same_v<K, GaussianKernel>) return "gaussian";
        if constexpr (std::is_same_v<K, PolynomialKernel>) return "polynomial";
      },
      k);
}

template <typename DerivedA, typename DerivedB>
auto kernel_eval(const KernelFunction& k, const Eigen::MatrixBase<DerivedA>& x,
                 const Eigen::MatrixBase<DerivedB>& xp) -> typename DerivedA::Scalar {
  using Scalar = typename DerivedA::Scalar;
  if (x.size() != xp.size()) throw std::invalid_argument("kernel_eval: dimension mismatch");
  return std::visit(
      [&](const auto& kk) -> Scalar {
        using K = std::decay_t<decltype(kk)>;
        if constexpr (std::is_same_v<K, LinearKernel>) {
          return x.dot(xp);
        } else if constexpr (std::is_same_v<K, GaussianKernel>) {
          const Scalar bw = static_cast<Scalar>(kk.bandwidth);
          return std::exp(-(x - xp).squaredNorm() / (Scalar(2) * bw * bw));
        } else {
          return std::pow(x.dot(xp) + static_cast<Scalar>(kk.offset), kk.degree);
        }
      },
      k);
}

/// Gram matrix over the columns of `points`.
template <typename Scalar>
MatrixX<Scalar> kernel_matrix(const KernelFunction& k, const MatrixX<Scalar>& points) {
  const auto n = points.cols();
  MatrixX<Scalar> K(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      K(i, j) = K(j, i) = kernel_eval(k, points.col(i), points.col(j));
    }
  }
  return K;
}

/// kappa^2 = max_t k(x_t, x_t) over the columns of `points`.
template <typename Scalar>
Scalar kernel_sup_diag(const KernelFunction& k, const MatrixX<Scalar>& points) {
  Scalar best = 0;
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    best = std::max(best, kernel_eval(k, points.col(i), points.col(i)));
  }
  return best;
}

/// Pivot threshold below which the incremental factorization is jittered.
inline constexpr double kPivotFloor = 1e-10;

/// Kernel-AWV state: the inputs and outputs since birth together with an
/// incrementally extended lower Cholesky factor L of (K + lambda I) and
/// w = L^{-1} y. Each round costs one triangular solve, O(t^2).
template <typename Scalar = double>
class KernelAwvState {
 public:
  KernelAwvState(KernelFunction kernel, Scalar lambda) : kernel_(std::move(kernel)), lambda_(lambda) {
    validate_kernel(kernel_);
    if (!(lambda > 0)) throw std::domain_error("Kernel-AWV: lambda must be positive");
  }

  Eigen::Index size() const { return static_cast<Eigen::Index>(xs_.size()); }
  Scalar lambda() const { return lambda_; }
  const KernelFunction& kernel() const { return kernel_; }
  const std::vector<VectorX<Scalar>>& inputs() const { return xs_; }
  const std::vector<Scalar>& outputs() const { return ys_; }
  long jitter_events() const { return jitter_events_; }
  /// Total jitter added to each diagonal entry of K + lambda I.
  VectorX<Scalar> diagonal_jitter() const {
    return Eigen::Map<const VectorX<Scalar>>(jitter_.data(), size());
  }

  /// The lower-triangular factor of (K + lambda I) over the stored inputs.
  MatrixX<Scalar> factor() const { return chol_.topLeftCorner(size(), size()).template triangularView<Eigen::Lower>(); }

  /// Representer-form minimiser of the AWV objective evaluated at x:
  /// k_x^T (K_ext + lambda I)^{-1} (y, 0), where K_ext includes x. With
  /// l = L^{-1} k and s the Schur pivot k(x,x) + lambda - l'l this equals
  /// lambda (l'w) / s.
  Scalar predict(const VectorX<Scalar>& x) const {
    if (xs_.empty()) return Scalar(0);
    const Column& c = column_for(x);
    return lambda_ * c.l.dot(w_.head(size())) / c.pivot_sq;
  }

  void observe(const VectorX<Scalar>& x, Scalar y) {
    const Eigen::Index t = size();
    kappa_sq_ = std::max(kappa_sq_, kernel_eval(kernel_, x, x));
    Column c = column_for(x);
    Scalar jitter = 0;
    if (!(c.pivot_sq > Scalar(kPivotFloor))) {
      jitter = Scalar(1e-8) * std::max(kappa_sq_, Scalar(1e-300));
      while (!(c.pivot_sq + jitter > Scalar(kPivotFloor))) jitter *= 10;
      ++jitter_events_;
    }
    reserve(t + 1);
    chol_.row(t).head(t) = c.l.transpose();
    const Scalar diag = std::sqrt(c.pivot_sq + jitter);
    chol_(t, t) = diag;
    w_(t) = (y - c.l.dot(w_.head(t))) / diag;
    xs_.push_back(x);
    ys_.push_back(y);
    jitter_.push_back(jitter);
    cache_valid_ = false;
  }

 private:
  struct Column {
    VectorX<Scalar> l;
    Scalar pivot_sq = 0;
  };

  // predict and observe at the same round share one triangular solve
  const Column& column_for(const VectorX<Scalar>& x) const {
    if (cache_valid_ && cache_x_.size() == x.size() && cache_x_ == x) return cache_;
    const Eigen::Index t = size();
    VectorX<Scalar> k(t);
    for (Eigen::Index i = 0; i < t; ++i) k(i) = kernel_eval(kernel_, xs_[i], x);
    if (t > 0) chol_.topLeftCorner(t, t).template triangularView<Eigen::Lower>().solveInPlace(k);
    cache_.pivot_sq = kernel_eval(kernel_, x, x) + lambda_ - k.squaredNorm();
    cache_.l = std::move(k);
    cache_x_ = x;
    cache_valid_ = true;
    return cache_;
  }

  void reserve(Eigen::Index needed) {
    if (chol_.rows() >= needed) return;
    const Eigen::Index cap = std::max<Eigen::Index>(16, 2 * chol_.rows());
    MatrixX<Scalar> grown = MatrixX<Scalar>::Zero(cap, cap);
    grown.topLeftCorner(chol_.rows(), chol_.cols()) = chol_;
    chol_ = std::move(grown);
    VectorX<Scalar> w = VectorX<Scalar>::Zero(cap);
    w.head(w_.size()) = w_;
    w_ = std::move(w);
  }

  KernelFunction kernel_;
  Scalar lambda_;
  Scalar kappa_sq_ = Scalar(0);
  std::vector<VectorX<Scalar>> xs_;
  std::vector<Scalar> ys_;
  std::vector<Scalar> jitter_;
  MatrixX<Scalar> chol_;
  VectorX<Scalar> w_;
  long jitter_events_ = 0;

  mutable Column cache_;
  mutable VectorX<Scalar> cache_x_;
  mutable bool cache_valid_ = false;
};

template <typename Scalar>
Scalar kernel_awv_predict(const KernelAwvState<Scalar>& s, const VectorX<Scalar>& x) {
  return s.predict(x);
}

template <typename Scalar>
KernelAwvState<Scalar> kernel_awv_observe(KernelAwvState<Scalar> s, const VectorX<Scalar>& x, Scalar y) {
  s.observe(x, y);
  return s;
}

template <typename ScalarT = double>
class KernelAwv {
 public:
  using Scalar = ScalarT;

  KernelAwv(KernelFunction kernel, Scalar lambda) : state_(std::move(kernel), lambda) {}

  Scalar predict(const VectorX<Scalar>& x) const { return state_.predict(x); }
  void observe(const VectorX<Scalar>& x, Scalar y) { state_.observe(x, y); }
  const KernelAwvState<Scalar>& state() const { return state_; }

 private:
  KernelAwvState<Scalar> state_;
};

static_assert(Subroutine<KernelAwv<double>>);

/// Tr(K (K + lambda I)^{-1}) = n - lambda ||L^{-1}||_F^2 with L the Cholesky
/// factor of K + lambda I.
template <typename Derived>
auto effective_dimension(const Eigen::MatrixBase<Derived>& K, typename Derived::Scalar lambda)
    -> typename Derived::Scalar {
  using Scalar = typename Derived::Scalar;
  using Mat = MatrixX<Scalar>;
  if (K.rows() != K.cols()) throw std::domain_error("effective_dimension: matrix not square");
  if (!(lambda > 0)) throw std::domain_error("effective_dimension: lambda must be positive");
  const auto n = K.rows();
  if (n == 0) return Scalar(0);
  const Scalar scale = std::max(Scalar(1), K.cwiseAbs().maxCoeff());
  if ((K - K.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-10) * scale) {
    throw std::domain_error("effective_dimension: matrix not symmetric");
  }
  Eigen::LLT<Mat> psd(K + Scalar(1e-8) * Mat::Identity(n, n));
  if (psd.info() != Eigen::Success) {
    throw std::domain_error("effective_dimension: matrix not positive semi-definite");
  }
  Eigen::LLT<Mat> llt(K + lambda * Mat::Identity(n, n));
  Mat inv_l = Mat::Identity(n, n);
  llt.matrixL().solveInPlace(inv_l);
  const Scalar value = static_cast<Scalar>(n) - lambda * inv_l.squaredNorm();
  return std::max(Scalar(0), value);
}

/// (n/m)^{beta/(beta+1)}
inline double lambda_schedule(long n, long m, double beta) {
  if (!(beta > 0.0 && beta < 1.0)) throw std::domain_error("lambda_schedule: beta must lie in (0,1)");
  if (m < 1 || n < m) throw std::domain_error("lambda_schedule: need n >= m >= 1");
  return std::pow(static_cast<double>(n) / static_cast<double>(m), beta / (beta + 1.0));
}

/// Least-squares slope of log d_eff(lambda) against log lambda, negated: the
/// empirical capacity exponent. Reported, never assumed.
template <typename Scalar>
Scalar estimate_capacity_exponent(const MatrixX<Scalar>& K, const std::vector<Scalar>& lambdas) {
  std::vector<Scalar> lx;
  std::vector<Scalar> ly;
  for (Scalar lam : lambdas) {
    const Scalar de = effective_dimension(K, lam);
    if (de > 0) {
      lx.push_back(std::log(lam));
      ly.push_back(std::log(de));
    }
  }
  if (lx.size() < 2) return Scalar(0);
  const auto m = static_cast<Scalar>(lx.size());
  Scalar mx = 0, my = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= m;
  my /= m;
  Scalar sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxx > 0 ? -sxy / sxx : Scalar(0);
}

/// Whether d_eff(lambda) <= (n / lambda)^beta holds on every lambda given.
template <typename Scalar>
bool capacity_condition_holds(const MatrixX<Scalar>& K, const std::vector<Scalar>& lambdas,
                              Scalar beta) {
  const auto n = static_cast<Scalar>(K.rows());
  for (Scalar lam : lambdas) {
    if (effective_dimension(K, lam) > std::pow(n / lam, beta)) return false;
  }
  return true;
}

}  // namespace driftbench
