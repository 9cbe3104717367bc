#include "driftbench/harness.hpp"

#include <stdexcept>

namespace driftbench {

namespace {

constexpr std::uint64_t kPresetSeed = 20190601;

AlgorithmSpec meta_alg(const std::string& name, AlgorithmKind kind, SubroutineKind sub) {
  AlgorithmSpec a;
  a.name = name;
  a.kind = kind;
  a.subroutine.kind = sub;
  return a;
}

AlgorithmSpec oracle_alg(OracleKind mode) {
  AlgorithmSpec a;
  a.name = mode == OracleKind::scalar ? "oracle-scalar" : "oracle-linear";
  a.kind = AlgorithmKind::oracle;
  a.oracle = mode;
  return a;
}

AlgorithmSpec restart_ogd() {
  AlgorithmSpec a;
  a.name = "fixed-restart-ogd";
  a.kind = AlgorithmKind::fixed_restart_ogd;
  a.subroutine.kind = SubroutineKind::ogd;
  return a;
}

ExperimentConfig one_dim(const std::string& name, long n, ShiftSpec shift, int runs) {
  ExperimentConfig c;
  c.name = name;
  c.seed = kPresetSeed;
  c.runs = runs;
  c.data.stream = StreamSpec{n, 1, 1.0, InputMode::constant_one, 0};
  c.data.shift = std::move(shift);
  c.algorithms = {meta_alg("iflh-ma", AlgorithmKind::iflh, SubroutineKind::moving_average),
                  meta_alg("flh-ma", AlgorithmKind::flh, SubroutineKind::moving_average),
                  oracle_alg(OracleKind::scalar)};
  return c;
}

ExperimentConfig multi_dim(const std::string& name, long n, long d, ShiftSpec shift) {
  ExperimentConfig c;
  c.name = name;
  c.seed = kPresetSeed;
  c.runs = 10;
  c.data.stream = StreamSpec{n, d, 1.0, InputMode::uniform_cube, 0};
  c.data.shift = std::move(shift);
  c.algorithms = {meta_alg("iflh-ogd", AlgorithmKind::iflh, SubroutineKind::ogd),
                  meta_alg("iflh-ons", AlgorithmKind::iflh, SubroutineKind::ons),
                  meta_alg("iflh-awv", AlgorithmKind::iflh, SubroutineKind::awv), restart_ogd()};
  return c;
}

std::vector<ExperimentConfig> one_dim_family(int runs) {
  return {one_dim("soft-a0.3", 2048, SoftShift{0.3}, runs),
          one_dim("hard-pow2", 2048, HardShift{power_starts(2, 10)}, runs),
          one_dim("hard-100i", 1000, HardShift{linear_starts(100, 10)}, runs)};
}

std::vector<Preset> build_presets() {
  std::vector<Preset> out;
  out.push_back({"fig1", "1-d prediction traces (single run): soft a=0.3, hard 2^i, hard 100i",
                 one_dim_family(1)});
  out.push_back({"fig2", "1-d cumulative errors over 10 runs: soft a=0.3, hard 2^i, hard 100i",
                 one_dim_family(10)});
  out.push_back({"fig3", "d-dim soft shifts, (alpha, d) in {(1,2), (2,2), (2,10)}",
                 {multi_dim("soft-a1-d2", 4096, 2, SoftShift{1.0}),
                  multi_dim("soft-a2-d2", 4096, 2, SoftShift{2.0}),
                  multi_dim("soft-a2-d10", 4096, 10, SoftShift{2.0})}});
  out.push_back({"fig4", "d-dim hard shifts: 100i with d=10, 2^i (i<=14) with d in {2, 10}",
                 {multi_dim("hard-100i-d10", 10000, 10, HardShift{linear_starts(100, 10)}),
                  multi_dim("hard-pow2-d2", 32768, 2, HardShift{power_starts(2, 14)}),
                  multi_dim("hard-pow2-d10", 32768, 10, HardShift{power_starts(2, 14)})}});
  return out;
}

}  // namespace

std::vector<Preset> all_presets() { return build_presets(); }

const Preset& find_preset(const std::string& name) {
  static const std::vector<Preset> presets = build_presets();
  for (const auto& p : presets) {
    if (p.name == name) return p;
  }
  throw ConfigError("unknown preset '" + name + "'");
}

}  // namespace driftbench
