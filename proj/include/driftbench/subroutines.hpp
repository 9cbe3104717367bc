#pragma once

// Non-kernel subroutines for the meta-aggregation layer: restarted moving
// average, projected online gradient descent, Online Newton Step and the
// Vovk-Azoury-Warmuth online ridge forecaster.
//
// Each learner is a plain value. The `*_step` / `*_observe` free functions are
// the state transitions; the learner classes wrap them behind the Subroutine
// concept. Every learner predicts 0 before it has seen any data.

#include "driftbench/core.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace driftbench {

/// Denominator floor for the rank-one inverse updates.
inline constexpr double kShermanMorrisonFloor = 1e-12;

namespace detail {

template <typename Scalar>
void project_to_ball(VectorX<Scalar>& theta, Scalar radius) {
  const Scalar norm = theta.norm();
  if (norm > radius) theta *= radius / norm;
}

/// Projection of `point` onto {||v||_2 <= radius} in the norm ||v||_A.
///
/// The minimizer is (A + mu I)^{-1} A point with mu >= 0 the root of
/// ||theta(mu)|| = radius, found by bisection in the eigenbasis of A.
template <typename Scalar>
VectorX<Scalar> weighted_ball_projection(const MatrixX<Scalar>& A,
                                         const VectorX<Scalar>& point,
                                         Scalar radius) {
  if (point.norm() <= radius) return point;
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(A);
  const VectorX<Scalar> ev = eig.eigenvalues().cwiseMax(Scalar(0));
  const VectorX<Scalar> coords = eig.eigenvectors().transpose() * point;
  auto norm_at = [&](Scalar mu) {
    Scalar s = 0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
      const Scalar c = ev(i) / (ev(i) + mu) * coords(i);
      s += c * c;
    }
    return std::sqrt(s);
  };
  Scalar lo = 0;
  Scalar hi = std::max(ev.maxCoeff(), Scalar(1));
  while (norm_at(hi) > radius) hi *= 2;
  for (int it = 0; it < 200 && hi - lo > std::numeric_limits<Scalar>::epsilon() * hi;
       ++it) {
    const Scalar mid = (lo + hi) / 2;
    if (norm_at(mid) > radius) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  VectorX<Scalar> scaled(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) scaled(i) = ev(i) / (ev(i) + hi) * coords(i);
  VectorX<Scalar> theta = eig.eigenvectors() * scaled;
  // bisection lands on the feasible side; guard against rounding
  project_to_ball(theta, radius);
  return theta;
}

/// Replaces `inverse` by (gram + jitter I)^{-1} via a direct SPD solve.
template <typename Scalar>
void refactor_inverse(const MatrixX<Scalar>& gram, MatrixX<Scalar>& inverse) {
  const auto d = gram.rows();
  Scalar jitter = Scalar(1e-12) * std::max(Scalar(1), gram.diagonal().cwiseAbs().maxCoeff());
  for (;;) {
    Eigen::LLT<MatrixX<Scalar>> llt(gram + jitter * MatrixX<Scalar>::Identity(d, d));
    if (llt.info() == Eigen::Success) {
      inverse = llt.solve(MatrixX<Scalar>::Identity(d, d));
      return;
    }
    jitter *= 10;
  }
}

/// Sherman-Morrison update of `inverse` <- (inverse^{-1} + v v^T)^{-1}; `gram`
/// carries the forward matrix for the fallback path. Returns false when the
/// fallback fired.
template <typename Scalar>
bool rank_one_update(MatrixX<Scalar>& gram, MatrixX<Scalar>& inverse,
                     const VectorX<Scalar>& v) {
  gram.noalias() += v * v.transpose();
  const VectorX<Scalar> iv = inverse * v;
  const Scalar denom = Scalar(1) + v.dot(iv);
  if (!(denom > Scalar(kShermanMorrisonFloor)) || !std::isfinite(static_cast<double>(denom))) {
    refactor_inverse(gram, inverse);
    return false;
  }
  inverse.noalias() -= (iv * iv.transpose()) / denom;
  inverse = (inverse + inverse.transpose()) / Scalar(2);
  return true;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Moving average

template <typename Scalar = double>
struct MovingAverageState {
  long count = 0;
  Scalar sum = Scalar(0);
};

template <typename Scalar>
Scalar ma_predict(const MovingAverageState<Scalar>& s) {
  return s.count > 0 ? s.sum / static_cast<Scalar>(s.count) : Scalar(0);
}

template <typename Scalar>
MovingAverageState<Scalar> ma_observe(MovingAverageState<Scalar> s, Scalar y) {
  ++s.count;
  s.sum += y;
  return s;
}

/// Mean of the outputs seen since birth; ignores the inputs.
template <typename ScalarT = double>
class MovingAverage {
 public:
  using Scalar = ScalarT;

  Scalar predict(const VectorX<Scalar>&) const { return ma_predict(state_); }
  void observe(const VectorX<Scalar>&, Scalar y) { state_ = ma_observe(state_, y); }
  const MovingAverageState<Scalar>& state() const { return state_; }

 private:
  MovingAverageState<Scalar> state_;
};

// ---------------------------------------------------------------------------
// Projected online gradient descent

template <typename Scalar = double>
struct OgdState {
  VectorX<Scalar> theta;
  long round_since_birth = 0;  // steps taken so far
  Scalar radius = Scalar(1);
  Scalar grad_bound = Scalar(1);
};

template <typename Scalar>
OgdState<Scalar> make_ogd_state(Eigen::Index d, Scalar radius, Scalar grad_bound) {
  return {VectorX<Scalar>::Zero(d), 0, radius, grad_bound};
}

/// theta <- Proj_B(theta - B/(G sqrt(k)) * 2(x'theta - y)x), k = 1-based step.
template <typename Scalar>
OgdState<Scalar> ogd_step(OgdState<Scalar> s, const VectorX<Scalar>& x, Scalar y) {
  if (x.size() != s.theta.size()) throw std::invalid_argument("ogd_step: dimension mismatch");
  ++s.round_since_birth;
  const VectorX<Scalar> g = Scalar(2) * (x.dot(s.theta) - y) * x;
  const Scalar eta =
      s.radius / (s.grad_bound * std::sqrt(static_cast<Scalar>(s.round_since_birth)));
  s.theta -= eta * g;
  detail::project_to_ball(s.theta, s.radius);
  return s;
}

/// OGD learner. A non-positive configured gradient bound means "estimate
/// online": G becomes the running max of the observed gradient norms.
template <typename ScalarT = double>
class Ogd {
 public:
  using Scalar = ScalarT;

  Ogd(Eigen::Index d, Scalar radius, Scalar grad_bound = Scalar(0))
      : adaptive_(!(grad_bound > 0)),
        state_(make_ogd_state<Scalar>(d, radius, adaptive_ ? Scalar(1) : grad_bound)) {}

  Scalar predict(const VectorX<Scalar>& x) const { return x.dot(state_.theta); }

  void observe(const VectorX<Scalar>& x, Scalar y) {
    if (adaptive_) {
      const Scalar gnorm = Scalar(2) * std::abs(x.dot(state_.theta) - y) * x.norm();
      max_grad_ = std::max(max_grad_, gnorm);
      if (!(max_grad_ > 0)) {
        ++state_.round_since_birth;
        return;
      }
      state_.grad_bound = max_grad_;
    }
    state_ = ogd_step(std::move(state_), x, y);
  }

  const OgdState<Scalar>& state() const { return state_; }

 private:
  bool adaptive_;
  Scalar max_grad_ = Scalar(0);
  OgdState<Scalar> state_;
};

// ---------------------------------------------------------------------------
// Online Newton Step

template <typename Scalar = double>
struct OnsState {
  VectorX<Scalar> theta;
  MatrixX<Scalar> A;      // epsilon I + sum g g^T
  MatrixX<Scalar> A_inv;  // its inverse, maintained by rank-one updates
  Scalar gamma = Scalar(1);
  Scalar epsilon = Scalar(1);
  Scalar radius = Scalar(1);
  long fallbacks = 0;
};

template <typename Scalar>
OnsState<Scalar> make_ons_state(Eigen::Index d, Scalar gamma, Scalar epsilon, Scalar radius) {
  OnsState<Scalar> s;
  s.theta = VectorX<Scalar>::Zero(d);
  s.A = epsilon * MatrixX<Scalar>::Identity(d, d);
  s.A_inv = MatrixX<Scalar>::Identity(d, d) / epsilon;
  s.gamma = gamma;
  s.epsilon = epsilon;
  s.radius = radius;
  return s;
}

template <typename Scalar>
OnsState<Scalar> ons_step(OnsState<Scalar> s, const VectorX<Scalar>& x, Scalar y) {
  if (x.size() != s.theta.size()) throw std::invalid_argument("ons_step: dimension mismatch");
  const VectorX<Scalar> g = Scalar(2) * (x.dot(s.theta) - y) * x;
  if (g.isZero(Scalar(0))) return s;
  if (!detail::rank_one_update(s.A, s.A_inv, g)) ++s.fallbacks;
  const VectorX<Scalar> raw = s.theta - (s.A_inv * g) / s.gamma;
  s.theta = detail::weighted_ball_projection(s.A, raw, s.radius);
  return s;
}

/// ONS learner with online constants: G is the running max of ||g||,
/// D = 2B, alpha = 1/(2 r^2) with r = X B + Y from running maxima of ||x||
/// and |y|, gamma = min{1/(4GD), alpha}/2. epsilon = 1/(gamma^2 D^2) is fixed
/// at the first non-zero gradient, when A is initialised. A given gamma
/// replaces the rule for every round; a given epsilon replaces 1/(gamma D)^2.
template <typename ScalarT = double>
class Ons {
 public:
  using Scalar = ScalarT;

  Ons(Eigen::Index d, Scalar radius, std::optional<Scalar> gamma = {}, std::optional<Scalar> epsilon = {})
      : d_(d), radius_(radius), fixed_gamma_(gamma), fixed_epsilon_(epsilon) {
    if ((gamma && !(*gamma > 0)) || (epsilon && !(*epsilon > 0))) {
      throw std::domain_error("ons: gamma and epsilon must be positive");
    }
    state_.theta = VectorX<Scalar>::Zero(d);
    state_.radius = radius;
  }

  Scalar predict(const VectorX<Scalar>& x) const { return x.dot(state_.theta); }

  void observe(const VectorX<Scalar>& x, Scalar y) {
    using std::abs;
    max_x_ = std::max(max_x_, x.norm());
    max_y_ = std::max(max_y_, abs(y));
    const Scalar gnorm = Scalar(2) * abs(x.dot(state_.theta) - y) * x.norm();
    max_grad_ = std::max(max_grad_, gnorm);
    if (!(max_grad_ > 0)) return;

    const Scalar diameter = Scalar(2) * radius_;
    const Scalar range = max_x_ * radius_ + max_y_;
    const Scalar alpha = Scalar(1) / (Scalar(2) * range * range);
    const Scalar gamma = fixed_gamma_ ? *fixed_gamma_
                                      : std::min(Scalar(1) / (Scalar(4) * max_grad_ * diameter), alpha) / Scalar(2);
    if (!initialised_) {
      const Scalar eps = fixed_epsilon_ ? *fixed_epsilon_ : Scalar(1) / (gamma * gamma * diameter * diameter);
      state_ = make_ons_state<Scalar>(d_, gamma, eps, radius_);
      initialised_ = true;
    }
    state_.gamma = gamma;
    state_ = ons_step(std::move(state_), x, y);
  }

  const OnsState<Scalar>& state() const { return state_; }

 private:
  Eigen::Index d_;
  Scalar radius_;
  std::optional<Scalar> fixed_gamma_;
  std::optional<Scalar> fixed_epsilon_;
  bool initialised_ = false;
  Scalar max_grad_ = Scalar(0);
  Scalar max_x_ = Scalar(0);
  Scalar max_y_ = Scalar(0);
  OnsState<Scalar> state_;
};

// ---------------------------------------------------------------------------
// Vovk-Azoury-Warmuth forecaster

template <typename Scalar = double>
struct AwvState {
  MatrixX<Scalar> P;     // (lambda I + sum_{s<t} x_s x_s^T)^{-1}
  MatrixX<Scalar> gram;  // lambda I + sum_{s<t} x_s x_s^T
  VectorX<Scalar> b;     // sum_{s<t} y_s x_s
  Scalar lambda = Scalar(1);
  long fallbacks = 0;
};

template <typename Scalar>
AwvState<Scalar> make_awv_state(Eigen::Index d, Scalar lambda) {
  if (!(lambda > 0)) throw std::domain_error("AWV: lambda must be positive");
  AwvState<Scalar> s;
  s.P = MatrixX<Scalar>::Identity(d, d) / lambda;
  s.gram = lambda * MatrixX<Scalar>::Identity(d, d);
  s.b = VectorX<Scalar>::Zero(d);
  s.lambda = lambda;
  return s;
}

/// x^T (P^{-1} + x x^T)^{-1} b, which by Sherman-Morrison is
/// x^T P b / (1 + x^T P x). State is not touched.
template <typename Scalar>
Scalar awv_predict(const AwvState<Scalar>& s, const VectorX<Scalar>& x) {
  if (x.size() != s.b.size()) throw std::invalid_argument("awv_predict: dimension mismatch");
  const VectorX<Scalar> px = s.P * x;
  return px.dot(s.b) / (Scalar(1) + x.dot(px));
}

template <typename Scalar>
AwvState<Scalar> awv_observe(AwvState<Scalar> s, const VectorX<Scalar>& x, Scalar y) {
  if (x.size() != s.b.size()) throw std::invalid_argument("awv_observe: dimension mismatch");
  if (!detail::rank_one_update(s.gram, s.P, x)) ++s.fallbacks;
  s.b.noalias() += y * x;
  return s;
}

template <typename ScalarT = double>
class Awv {
 public:
  using Scalar = ScalarT;

  Awv(Eigen::Index d, Scalar lambda) : state_(make_awv_state<Scalar>(d, lambda)) {}

  Scalar predict(const VectorX<Scalar>& x) const { return awv_predict(state_, x); }
  void observe(const VectorX<Scalar>& x, Scalar y) { state_ = awv_observe(std::move(state_), x, y); }
  const AwvState<Scalar>& state() const { return state_; }

 private:
  AwvState<Scalar> state_;
};

static_assert(Subroutine<MovingAverage<double>>);
static_assert(Subroutine<Ogd<double>>);
static_assert(Subroutine<Ons<double>>);
static_assert(Subroutine<Awv<double>>);

}  // namespace driftbench
