#pragma once

// Follow-the-Leading-History meta-aggregation over restarted experts.
//
// Every round a fresh subroutine instance is born with prior weight 1/t; the
// carried weights of the surviving experts share the remaining 1 - 1/t. The
// prediction is the weighted mean of the (clipped) expert predictions and the
// weights are updated multiplicatively with exp(-eta * loss). Under binary
// pruning (IFLH) the expert born at t retires at t + 2^k, k the lowest set bit
// of t, so at most floor(log2 t) + 1 experts are alive at round t.

#include "driftbench/core.hpp"

#include <bit>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace driftbench {

enum class Pruning { none, binary };

inline constexpr long kNeverEnds = std::numeric_limits<long>::max();

/// t + 2^k with k the index of the lowest set bit of t.
constexpr long ending_time(long t) {
  if (t < 1) throw std::domain_error("ending_time: t must be >= 1");
  return t + (t & -t);
}

/// Upper bound floor(log2 t) + 1 on the number of live IFLH experts.
constexpr long max_active_experts(long t) {
  return static_cast<long>(std::bit_width(static_cast<unsigned long>(t)));
}

template <Subroutine L>
struct ExpertSlot {
  long birth = 0;
  long end = kNeverEnds;
  typename L::Scalar weight = 0;
  L learner;
};

template <Subroutine L>
struct ExpertPool {
  using Scalar = typename L::Scalar;

  std::vector<ExpertSlot<L>> slots;  // ordered by birth
  long round = 0;
  Pruning pruning = Pruning::binary;
  long weight_resets = 0;  // times the simplex had to be restored to uniform

  std::size_t size() const { return slots.size(); }

  Scalar weight_sum() const {
    Scalar s = 0;
    for (const auto& e : slots) s += e.weight;
    return s;
  }
};

template <Subroutine L>
using ExpertFactory = std::function<L(long birth)>;

namespace detail {

template <Subroutine L>
void reset_uniform(ExpertPool<L>& pool) {
  using Scalar = typename L::Scalar;
  for (auto& e : pool.slots) e.weight = Scalar(1) / static_cast<Scalar>(pool.slots.size());
  ++pool.weight_resets;
}

}  // namespace detail

/// Start of round t: retire experts whose ending time has come, give the
/// surviving ones a (1 - 1/t) share proportional to their carried weights and
/// add the newborn with weight 1/t. With no survivors the newborn takes the
/// whole mass.
template <Subroutine L>
void spawn_and_normalize(ExpertPool<L>& pool, long t, const ExpertFactory<L>& factory) {
  using Scalar = typename L::Scalar;
  if (pool.round != t - 1) throw std::logic_error("spawn_and_normalize: rounds must be consecutive");
  std::erase_if(pool.slots, [t](const ExpertSlot<L>& e) { return e.end <= t; });

  const Scalar newborn = Scalar(1) / static_cast<Scalar>(t);
  if (pool.slots.empty()) {
    pool.slots.push_back({t, pool.pruning == Pruning::binary ? ending_time(t) : kNeverEnds, Scalar(1), factory(t)});
    pool.round = t;
    return;
  }
  Scalar carried = pool.weight_sum();
  if (!(carried > 0) || !std::isfinite(static_cast<double>(carried))) {
    detail::reset_uniform(pool);
    carried = Scalar(1);
  }
  const Scalar scale = (Scalar(1) - newborn) / carried;
  for (auto& e : pool.slots) e.weight *= scale;
  pool.slots.push_back({t, pool.pruning == Pruning::binary ? ending_time(t) : kNeverEnds, newborn, factory(t)});
  pool.round = t;
}

template <typename Scalar>
struct MetaPrediction {
  Scalar y_hat = 0;
  std::vector<Scalar> expert_predictions;  // clipped, in slot order
};

template <Subroutine L>
MetaPrediction<typename L::Scalar> meta_predict(const ExpertPool<L>& pool,
                                                const VectorX<typename L::Scalar>& x,
                                                const OutputBound<typename L::Scalar>& bound) {
  using Scalar = typename L::Scalar;
  MetaPrediction<Scalar> out;
  out.expert_predictions.reserve(pool.slots.size());
  for (const auto& e : pool.slots) {
    const Scalar p = clip_to_bound(static_cast<Scalar>(e.learner.predict(x)), bound);
    out.expert_predictions.push_back(p);
    out.y_hat += e.weight * p;
  }
  return out;
}

/// Multiplies each weight by exp(-eta (y - pred_i)^2), renormalises, and lets
/// every expert observe (x, y). If all products underflow the update is redone
/// in log space.
template <Subroutine L>
void meta_update(ExpertPool<L>& pool, const VectorX<typename L::Scalar>& x, typename L::Scalar y,
                 const std::vector<typename L::Scalar>& predictions, typename L::Scalar eta) {
  using Scalar = typename L::Scalar;
  if (predictions.size() != pool.slots.size()) {
    throw std::invalid_argument("meta_update: one prediction per live expert required");
  }
  if (!(eta >= 0)) throw std::domain_error("meta_update: eta must be non-negative");

  std::vector<Scalar> losses(predictions.size());
  Scalar total = 0;
  for (std::size_t i = 0; i < pool.slots.size(); ++i) {
    const Scalar r = y - predictions[i];
    losses[i] = r * r;
    total += pool.slots[i].weight * std::exp(-eta * losses[i]);
  }
  const Scalar tiny = Scalar(1e-300);
  if (total > tiny && std::isfinite(static_cast<double>(total))) {
    for (std::size_t i = 0; i < pool.slots.size(); ++i) {
      pool.slots[i].weight = pool.slots[i].weight * std::exp(-eta * losses[i]) / total;
    }
  } else {
    std::vector<Scalar> logw(losses.size());
    Scalar best = -std::numeric_limits<Scalar>::infinity();
    for (std::size_t i = 0; i < pool.slots.size(); ++i) {
      logw[i] = std::log(pool.slots[i].weight) - eta * losses[i];
      best = std::max(best, logw[i]);
    }
    if (!std::isfinite(static_cast<double>(best))) {
      detail::reset_uniform(pool);
    } else {
      Scalar s = 0;
      for (std::size_t i = 0; i < logw.size(); ++i) s += std::exp(logw[i] - best);
      for (std::size_t i = 0; i < logw.size(); ++i) pool.slots[i].weight = std::exp(logw[i] - best) / s;
    }
  }

  for (auto& e : pool.slots) e.learner.observe(x, y);
}

/// 1/(8 (2Y)^2): the exp-concavity constant of the square loss when both the
/// output and the prediction lie in [-Y, Y]. Returns 1 while Y = 0.
template <typename Scalar>
Scalar learning_rate(const OutputBound<Scalar>& bound) {
  if (!(bound.Y > 0)) return Scalar(1);
  return Scalar(1) / (Scalar(32) * bound.Y * bound.Y);
}

/// Rounds [begin, end) served by the expert born at `begin`; end = tau(begin).
struct Segment {
  long begin = 0;
  long end = 0;
  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Chain of expert lifetimes covering [r, s]: t_1 = r, t_{j+1} = tau(t_j),
/// stopping once tau(t_p) > s. The lowest set bit at least doubles along the
/// chain, so there are at most ceil(log2(s - r + 1)) + 1 links.
inline std::vector<Segment> interval_cover(long r, long s) {
  if (r < 1 || s < r) throw std::domain_error("interval_cover: need 1 <= r <= s");
  std::vector<Segment> out;
  long t = r;
  for (;;) {
    const long tau = ending_time(t);
    out.push_back({t, tau});
    if (tau > s) break;
    t = tau;
  }
  return out;
}

/// ceil(log2(len)) + 1
inline long cover_length_bound(long len) {
  return static_cast<long>(std::bit_width(static_cast<unsigned long>(len - 1))) + 1;
}

struct MetaConfig {
  std::optional<double> eta;  // nullopt: recompute learning_rate every round
  Pruning pruning = Pruning::binary;
};

/// Per-round driver around an ExpertPool. Call predict(x) then observe(x, y).
template <Subroutine L>
class MetaLearner {
 public:
  using Scalar = typename L::Scalar;

  MetaLearner(MetaConfig config, ExpertFactory<L> factory)
      : config_(config), factory_(std::move(factory)) {
    if (config_.eta && !(*config_.eta > 0)) throw std::domain_error("MetaLearner: eta must be positive");
    pool_.pruning = config_.pruning;
  }

  const MetaPrediction<Scalar>& predict(const VectorX<Scalar>& x) {
    spawn_and_normalize(pool_, pool_.round + 1, factory_);
    last_ = meta_predict(pool_, x, bound_);
    return last_;
  }

  void observe(const VectorX<Scalar>& x, Scalar y) {
    bound_ = update_output_bound(bound_, y);
    last_eta_ = config_.eta ? static_cast<Scalar>(*config_.eta) : learning_rate(bound_);
    meta_update(pool_, x, y, last_.expert_predictions, last_eta_);
  }

  const ExpertPool<L>& pool() const { return pool_; }
  const OutputBound<Scalar>& bound() const { return bound_; }
  Scalar last_eta() const { return last_eta_; }

 private:
  MetaConfig config_;
  ExpertFactory<L> factory_;
  ExpertPool<L> pool_;
  OutputBound<Scalar> bound_;
  MetaPrediction<Scalar> last_;
  Scalar last_eta_ = 0;
};

}  // namespace driftbench
