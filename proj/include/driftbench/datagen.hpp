#pragma once

// Synthetic drifting streams: soft-shift random walks, hard-shift Rademacher
// chunks, dictionary-backed RKHS paths, input sampling and noise injection.

#include "driftbench/core.hpp"
#include "driftbench/kernel.hpp"

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace driftbench {

// ---------------------------------------------------------------------------
// Seeding

/// Disjoint sub-stream tags. Each consumer draws from its own generator so
/// that adding draws to one never perturbs another.
enum class SubStream : std::uint64_t {
  path = 1,
  inputs = 2,
  noise = 3,
  dictionary = 4,
  run = 5,
};

/// SplitMix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Counter-style derivation: the seed of sub-stream `tag`, element `index`.
constexpr std::uint64_t derive_seed(std::uint64_t master, SubStream tag, std::uint64_t index = 0) {
  return mix64(mix64(master ^ mix64(static_cast<std::uint64_t>(tag))) + mix64(index + 0x632BE59BD9B4E019ULL));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal(double stddev = 1.0) { return std::normal_distribution<double>(0.0, stddev)(engine_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double rademacher() { return (engine_() >> 63) ? 1.0 : -1.0; }

 private:
  std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Parameter paths

enum class Norm { l1, l2 };

/// theta_{1:n} stored column-wise (d x n) with its total variation and radius.
struct ParameterPath {
  Eigen::MatrixXd thetas;
  double tv_l1 = 0.0;
  double tv_l2 = 0.0;
  double radius_l1 = 0.0;  // max_t ||theta_t||_1
  double radius_l2 = 0.0;  // max_t ||theta_t||_2

  long n() const { return static_cast<long>(thetas.cols()); }
  long d() const { return static_cast<long>(thetas.rows()); }
  Eigen::VectorXd theta(long t) const { return thetas.col(t - 1); }  // 1-based round

  static ParameterPath from_thetas(Eigen::MatrixXd thetas);
  ParameterPath scaled(double factor) const;
};

/// sum_{t=2}^n ||theta_t - theta_{t-1}|| in the requested norm.
double total_variation(const ParameterPath& path, Norm norm);

/// Per-round increments: entry t-1 holds ||theta_t - theta_{t-1}||, entry 0 is 0.
std::vector<double> path_increments(const ParameterPath& path, Norm norm);

struct SoftShift {
  double alpha = 1.0;
};

struct HardShift {
  std::vector<long> starts;  // 1 = m_1 < m_2 < ...
};

using ShiftSpec = std::variant<SoftShift, HardShift>;

/// theta_1 = 0, theta_t = theta_{t-1} + eps_t with eps_t ~ N(0, t^{-alpha} I_d).
ParameterPath gen_soft_shifts(long n, long d, double alpha, std::uint64_t seed);

/// Piecewise-constant path; every coordinate redrawn +-1 at each chunk start.
/// A start at round 1 is implied when missing.
ParameterPath gen_hard_shifts(long n, long d, const std::vector<long>& starts, std::uint64_t seed);

ParameterPath gen_path(long n, long d, const ShiftSpec& shift, std::uint64_t seed);

/// Chunk starts {1} u {base^i : i = 1..max_i}, and {1} u {step i : i = 1..count}.
std::vector<long> power_starts(long base, int max_i);
std::vector<long> linear_starts(long step, int count);

// ---------------------------------------------------------------------------
// RKHS paths over a fixed dictionary

/// theta_t = sum_j c_{t,j} phi(a_j) for anchors a_j. RKHS norms and total
/// variation are exact through the anchor Gram matrix.
struct DictionaryPath {
  KernelFunction kernel;
  Eigen::MatrixXd anchors;  // d x J
  ParameterPath coefficients;  // J x n
  Eigen::MatrixXd gram;  // J x J
  double tv_rkhs = 0.0;
  double radius_rkhs = 0.0;

  long n() const { return coefficients.n(); }
  long d() const { return static_cast<long>(anchors.rows()); }
  /// phi(x)^T theta_t
  double value(long t, const Eigen::VectorXd& x) const;
  /// phi(x)^T (coefficient vector c in the dictionary)
  double value_with(const Eigen::VectorXd& c, const Eigen::VectorXd& x) const;
  double rkhs_norm(const Eigen::VectorXd& c) const;
  std::vector<double> increments() const;
};

/// Hard shifts on dictionary coefficients: each chunk draws c in
/// {-scale, +scale}^J; anchors are uniform on the input cube.
DictionaryPath gen_dictionary_hard_shifts(long n, long d, long anchors, KernelFunction kernel,
                                          const std::vector<long>& starts, double scale,
                                          std::uint64_t seed);

// ---------------------------------------------------------------------------
// Streams

enum class InputMode { constant_one, uniform_cube };

struct StreamSpec {
  long n = 0;
  long d = 1;
  double sigma = 1.0;
  InputMode input = InputMode::uniform_cube;
  std::uint64_t seed = 0;
};

void validate(const StreamSpec& spec);

/// y_t = x_t^T theta_t + Z_t with Z_t ~ N(0, sigma^2); y_true = x_t^T theta_t.
Stream gen_stream(const ParameterPath& path, const StreamSpec& spec);

/// y_t = phi(x_t)^T theta_t + Z_t for a dictionary path.
Stream gen_stream(const DictionaryPath& path, const StreamSpec& spec);

/// Copy of the stream with the evaluation-only truth removed.
Stream without_truth(const Stream& stream);

/// CSV with header `t,x_1..x_d,y,y_true`; y_true left empty when unknown.
void write_stream_csv(const Stream& stream, std::ostream& out);
void write_stream_csv(const Stream& stream, const std::string& path);
Stream read_stream_csv(std::istream& in);
Stream read_stream_csv(const std::string& path);

std::string format_double(double v);

}  // namespace driftbench
