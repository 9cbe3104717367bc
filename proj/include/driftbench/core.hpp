#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <optional>
#include <stdexcept>
#include <vector>

namespace driftbench {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using ConstVectorRef = Eigen::Ref<const VectorX<Scalar>>;

/// Raised when a configuration cannot be executed (maps to CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised on filesystem failures (maps to CLI exit code 3).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One round of a stream. `y_true` is evaluation-only: learners never see it.
struct Observation {
  long t = 0;
  Eigen::VectorXd x;
  double y = 0.0;
  std::optional<double> y_true;
};

using Stream = std::vector<Observation>;

/// Running max of |y| over the outputs revealed so far.
template <typename Scalar = double>
struct OutputBound {
  Scalar Y = Scalar(0);
};

template <typename Scalar>
Scalar square_loss(Scalar y_hat, Scalar y) {
  using std::isfinite;
  if (!isfinite(y_hat) || !isfinite(y)) {
    throw std::domain_error("square_loss: non-finite argument");
  }
  const Scalar r = y_hat - y;
  return r * r;
}

template <typename Scalar>
Scalar clip_to_bound(Scalar y_hat, const OutputBound<Scalar>& bound) {
  return std::clamp(y_hat, -bound.Y, bound.Y);
}

template <typename Scalar>
OutputBound<Scalar> update_output_bound(OutputBound<Scalar> bound, Scalar y) {
  using std::abs;
  bound.Y = std::max(bound.Y, abs(y));
  return bound;
}

/// A black-box online learner that can be restarted at any round.
///
/// `predict` must not mutate observable state; `observe` is the only state
/// transition. Predictions are made before the round's output is observed.
template <typename L>
concept Subroutine = requires(L learner, const L& clearner,
                              const VectorX<typename L::Scalar>& x,
                              typename L::Scalar y) {
  typename L::Scalar;
  { clearner.predict(x) } -> std::convertible_to<typename L::Scalar>;
  learner.observe(x, y);
};

}  // namespace driftbench
