#include "driftbench/baselines.hpp"

#include <algorithm>
#include <cmath>

namespace driftbench {

RestartPartition greedy_restart_partition(const std::vector<double>& increments, long m) {
  if (m < 1) throw std::domain_error("greedy_restart_partition: m must be >= 1");
  const long n = static_cast<long>(increments.size());
  if (n < 1) throw std::domain_error("greedy_restart_partition: empty path");
  double total = 0.0;
  for (long t = 1; t < n; ++t) total += increments[static_cast<std::size_t>(t)];

  RestartPartition p;
  p.budget = total / static_cast<double>(m);
  p.boundaries.push_back(1);
  double inside = 0.0;
  for (long t = 2; t <= n; ++t) {
    const double step = increments[static_cast<std::size_t>(t - 1)];
    if (inside + step <= p.budget) {
      inside += step;
    } else {
      p.boundaries.push_back(t);
      inside = 0.0;
    }
  }
  p.boundaries.push_back(n + 1);
  return p;
}

RestartPartition greedy_restart_partition(const ParameterPath& path, long m, Norm norm) {
  return greedy_restart_partition(path_increments(path, norm), m);
}

RestartPartition greedy_restart_partition(const DictionaryPath& path, long m) {
  return greedy_restart_partition(path.increments(), m);
}

long optimal_num_batches(long n, double tv, double sigma) {
  if (n < 1 || !(tv > 0) || !(sigma > 0)) {
    throw std::domain_error("optimal_num_batches: arguments must be positive");
  }
  const double nn = static_cast<double>(n);
  const double m = std::cbrt(nn * tv * tv / (sigma * sigma * (2.0 + std::log(nn))));
  return std::max(1L, std::lround(m));
}

long fixed_restart_batch_size(long n, double sigma, double tv) {
  if (n < 1 || !(sigma > 0) || !(tv > 0)) {
    throw std::domain_error("fixed_restart_batch_size: arguments must be positive");
  }
  const double nn = static_cast<double>(n);
  const double b = std::ceil(std::sqrt(nn * std::log(nn)) / (sigma * tv));
  if (!std::isfinite(b) || b < 1.0) return 1;
  return static_cast<long>(b);
}

Eigen::VectorXd oracle_forecast(const Stream& stream, const RestartPartition& partition,
                                const OracleMode& mode) {
  const long n = static_cast<long>(stream.size());
  if (partition.boundaries.size() < 2 || partition.boundaries.front() != 1 ||
      partition.boundaries.back() != n + 1) {
    throw ConfigError("oracle_forecast: partition does not cover the stream");
  }
  const bool needs_truth = !std::holds_alternative<ScalarMeanOracle>(mode);
  if (needs_truth) {
    for (const auto& o : stream) {
      if (!o.y_true) throw ConfigError("oracle_forecast: mode requires a generated stream with truth");
    }
  }
  if (const auto* lin = std::get_if<LinearOracle>(&mode); lin && (!lin->path || lin->path->n() != n)) {
    throw ConfigError("oracle_forecast: linear mode needs the stream's parameter path");
  }
  if (const auto* ker = std::get_if<KernelOracle>(&mode); ker && (!ker->path || ker->path->n() != n)) {
    throw ConfigError("oracle_forecast: kernel mode needs the stream's dictionary path");
  }

  Eigen::VectorXd preds(n);
  for (long seg = 0; seg < partition.segments(); ++seg) {
    const long begin = partition.boundaries[static_cast<std::size_t>(seg)];
    const long end = partition.boundaries[static_cast<std::size_t>(seg + 1)];  // exclusive
    std::visit(
        [&](const auto& m) {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, ScalarMeanOracle>) {
            double sum = 0.0;
            for (long t = begin; t < end; ++t) {
              const long k = t - begin;
              preds(t - 1) = k > 0 ? sum / static_cast<double>(k) : 0.0;
              sum += stream[static_cast<std::size_t>(t - 1)].y;
            }
          } else {
            const ParameterPath& coeffs = [&]() -> const ParameterPath& {
              if constexpr (std::is_same_v<M, LinearOracle>) {
                return *m.path;
              } else {
                return m.path->coefficients;
              }
            }();
            const Eigen::VectorXd mean =
                coeffs.thetas.middleCols(begin - 1, end - begin).rowwise().mean();
            for (long t = begin; t < end; ++t) {
              const auto& x = stream[static_cast<std::size_t>(t - 1)].x;
              if constexpr (std::is_same_v<M, LinearOracle>) {
                preds(t - 1) = x.dot(mean);
              } else {
                preds(t - 1) = m.path->value_with(mean, x);
              }
            }
          }
        },
        mode);
  }
  return preds;
}

std::vector<long> restart_rounds(long n, long batch) {
  if (batch < 1) throw std::domain_error("restart_rounds: batch must be >= 1");
  std::vector<long> out;
  for (long t = 1; t <= n; t += batch) out.push_back(t);
  return out;
}

Eigen::VectorXd fixed_restart_ogd_run(const Stream& stream, long batch, double radius, double grad_bound) {
  if (batch < 1) throw std::domain_error("fixed_restart_ogd_run: batch must be >= 1");
  const long n = static_cast<long>(stream.size());
  Eigen::VectorXd preds(n);
  if (n == 0) return preds;
  const auto d = stream.front().x.size();
  Ogd<double> learner(d, radius, grad_bound);
  for (long t = 1; t <= n; ++t) {
    if ((t - 1) % batch == 0) learner = Ogd<double>(d, radius, grad_bound);
    const auto& o = stream[static_cast<std::size_t>(t - 1)];
    preds(t - 1) = learner.predict(o.x);
    learner.observe(o.x, o.y);
  }
  return preds;
}

double restarted_average_error_bound(long n, double radius, double tv, double sigma) {
  const double nn = static_cast<double>(n);
  return radius * radius + tv * tv +
         2.0 * std::cbrt(nn) * std::pow(tv, 2.0 / 3.0) * std::pow(sigma, 4.0 / 3.0) *
             std::pow(2.0 + std::log(nn), 2.0 / 3.0);
}

double restart_approximation_bound(long n, double input_bound, double radius, double tv, long m) {
  const double x2 = input_bound * input_bound;
  const double per = tv / static_cast<double>(m);
  return x2 * static_cast<double>(n) * per * per + 4.0 * x2 * radius * radius * static_cast<double>(m);
}

}  // namespace driftbench
