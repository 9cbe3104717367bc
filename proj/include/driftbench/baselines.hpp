#pragma once

// Comparators and analysis oracles: the greedy restart partition, the
// hypothetical restarted-average forecasters, the optimal batch count, and
// online gradient descent with fixed restarts.

#include "driftbench/core.hpp"
#include "driftbench/datagen.hpp"
#include "driftbench/subroutines.hpp"

#include <variant>
#include <vector>

namespace driftbench {

/// Restart rounds 1 = t_1 < ... < t_{k+1} = n + 1. Segment i covers
/// [boundaries[i], boundaries[i+1] - 1].
struct RestartPartition {
  std::vector<long> boundaries;
  double budget = 0.0;

  long segments() const { return static_cast<long>(boundaries.size()) - 1; }
};

/// Left-to-right greedy scan over per-round increments (entry t-1 holds
/// ||theta_t - theta_{t-1}||): a segment grows while its internal variation
/// stays within total/m.
RestartPartition greedy_restart_partition(const std::vector<double>& increments, long m);
RestartPartition greedy_restart_partition(const ParameterPath& path, long m, Norm norm);
RestartPartition greedy_restart_partition(const DictionaryPath& path, long m);

/// max(1, round((n C^2 / (sigma^2 (2 + ln n)))^{1/3}))
long optimal_num_batches(long n, double tv, double sigma);

/// ceil(sqrt(n ln n) / (sigma tv)), at least 1.
long fixed_restart_batch_size(long n, double sigma, double tv);

/// Restarted mean of the observed outputs (0 at each segment start).
struct ScalarMeanOracle {};
/// x_t^T of the within-segment average of the true parameters.
struct LinearOracle {
  const ParameterPath* path = nullptr;
};
/// phi(x_t)^T of the within-segment average of the dictionary parameters.
struct KernelOracle {
  const DictionaryPath* path = nullptr;
};

using OracleMode = std::variant<ScalarMeanOracle, LinearOracle, KernelOracle>;

Eigen::VectorXd oracle_forecast(const Stream& stream, const RestartPartition& partition,
                                const OracleMode& mode);

/// Plain OGD reset to a fresh state at rounds 1, 1 + batch, 1 + 2 batch, ...
Eigen::VectorXd fixed_restart_ogd_run(const Stream& stream, long batch, double radius,
                                      double grad_bound = 0.0);

/// Rounds at which fixed_restart_ogd_run starts a fresh learner.
std::vector<long> restart_rounds(long n, long batch);

/// B^2 + C^2 + 2 n^{1/3} C^{2/3} sigma^{4/3} (2 + ln n)^{2/3}
double restarted_average_error_bound(long n, double radius, double tv, double sigma);

/// X^2 n (C/m)^2 + 4 X^2 B^2 m
double restart_approximation_bound(long n, double input_bound, double radius, double tv, long m);

}  // namespace driftbench
