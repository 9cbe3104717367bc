#pragma once

// Experiment orchestration: algorithm x data grids over repeated seeds,
// cumulative true error and bound curves, CSV/JSON persistence.

#include "driftbench/baselines.hpp"
#include "driftbench/datagen.hpp"
#include "driftbench/kernel.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace driftbench {

enum class SubroutineKind { moving_average, ogd, ons, awv, kernel_awv };

struct SubroutineSpec {
  SubroutineKind kind = SubroutineKind::awv;
  double lambda = 1.0;
  std::optional<double> beta;  // kernel: lambda from the (n/m)^{beta/(beta+1)} schedule
  long lambda_m = 0;           // m for the schedule; 0 = optimal_num_batches on the true TV
  double radius = 0.0;         // OGD/ONS ball; 0 = sqrt(d)
  double grad_bound = 0.0;     // OGD; 0 = running max of gradient norms
  std::optional<double> gamma;    // ONS; unset = min{1/(4GD), alpha}/2 from running maxima
  std::optional<double> epsilon;  // ONS; unset = 1/(gamma D)^2
  KernelFunction kernel = GaussianKernel{};
};

enum class AlgorithmKind { iflh, flh, plain, fixed_restart_ogd, oracle };

enum class OracleKind { scalar, linear, kernel };

struct AlgorithmSpec {
  std::string name;
  AlgorithmKind kind = AlgorithmKind::iflh;
  SubroutineSpec subroutine;
  OracleKind oracle = OracleKind::scalar;
  long oracle_m = 0;     // 0 = optimal_num_batches
  long batch = 0;        // fixed-restart OGD; 0 = fixed_restart_batch_size
  std::optional<double> eta;  // overrides the experiment-level eta
};

enum class ModelKind { linear, dictionary };

struct DictionarySpec {
  KernelFunction kernel = GaussianKernel{};
  long anchors = 5;
  double scale = 1.0;
};

struct DataSpec {
  StreamSpec stream;
  ShiftSpec shift = SoftShift{};
  ModelKind model = ModelKind::linear;
  DictionarySpec dictionary;
  double path_scale = 1.0;  // linear model: multiplies every theta_t
};

struct ExperimentConfig {
  std::string name = "experiment";
  DataSpec data;
  std::vector<AlgorithmSpec> algorithms;
  int runs = 1;
  std::uint64_t seed = 0;
  std::optional<double> eta;  // nullopt = auto
  double bound_constant = 1.0;
  std::string output_dir;
  int threads = 0;  // 0 = DRIFTBENCH_THREADS or hardware concurrency
};

/// Throws ConfigError on an unusable configuration.
void validate(const ExperimentConfig& config);

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& config);

struct ResultRow {
  std::string algorithm;
  int run = 0;
  std::uint64_t seed = 0;
  long t = 0;
  double y_hat = 0.0;
  double y = 0.0;
  double y_true = 0.0;
  double inst_err = 0.0;
  double cum_err = 0.0;
  double bound = 0.0;
  long active_experts = 0;
};

struct SummaryRow {
  std::string algorithm;
  long t = 0;
  double mean_cum_err = 0.0;
  double std_cum_err = 0.0;
  double bound = 0.0;
};

/// Resolved per-(algorithm, run) metadata echoed to config.json.
struct RunInfo {
  std::string algorithm;
  int run = 0;
  std::uint64_t seed = 0;
  double tv = 0.0;
  nlohmann::json resolved;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  std::vector<SummaryRow> summary;
  std::vector<RunInfo> runs;
  nlohmann::json resolved_config;

  /// Final cumulative error of each run of `algorithm`, in run order.
  std::vector<double> final_errors(const std::string& algorithm) const;
  /// Mean over runs of the final cumulative error.
  double mean_final_error(const std::string& algorithm) const;
  /// Mean over runs of the bound at t = n.
  double final_bound(const std::string& algorithm) const;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

/// The stream every algorithm sees in run `run` (with truth attached).
Stream generate_run_stream(const ExperimentConfig& config, int run);

/// Partial sums of (pred - truth)^2.
Eigen::VectorXd cumulative_true_error(const Eigen::VectorXd& preds, const Eigen::VectorXd& truths);

/// constant * d^{1/3} t^{1/3} tv^{2/3}
double bound_curve(long t, long d, double tv, double constant = 1.0);

/// Writes results.csv, summary.csv and config.json under `dir`.
void write_results(const ExperimentResult& result, const std::string& dir);

void write_results_csv(const std::vector<ResultRow>& rows, std::ostream& out);
void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& out);
std::vector<ResultRow> read_results_csv(std::istream& in);

/// Sub-seed of run r under a master seed; shared by every algorithm.
std::uint64_t run_seed(std::uint64_t master, int run);

/// Worker count: explicit request, else DRIFTBENCH_THREADS, else hardware.
int resolve_threads(int requested);

// ---------------------------------------------------------------------------
// Presets replicating the figure protocols.

struct Preset {
  std::string name;
  std::string description;
  std::vector<ExperimentConfig> experiments;  // each named; written to <out>/<preset>/<experiment>
};

std::vector<Preset> all_presets();
const Preset& find_preset(const std::string& name);

}  // namespace driftbench
