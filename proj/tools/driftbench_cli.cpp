#include "driftbench/harness.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>

namespace db = driftbench;

namespace {

struct InlineData {
  long n = 1000;
  long d = 1;
  double sigma = 1.0;
  std::string input = "auto";
  std::string shift = "soft";
  double alpha = 1.0;
  std::vector<long> starts;
  std::vector<std::string> algorithms{"iflh-awv", "oracle-scalar"};
};

struct Common {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<int> runs;
  std::string out;
  std::optional<double> bound_constant;
  bool quiet = false;
};

db::AlgorithmSpec algorithm_from_token(const std::string& token) {
  db::AlgorithmSpec a;
  a.name = token;
  if (token == "fixed-restart-ogd") {
    a.kind = db::AlgorithmKind::fixed_restart_ogd;
    a.subroutine.kind = db::SubroutineKind::ogd;
    return a;
  }
  const auto dash = token.find('-');
  if (dash == std::string::npos) throw db::ConfigError("algorithm '" + token + "' is not <kind>-<subroutine>");
  const std::string head = token.substr(0, dash);
  const std::string tail = token.substr(dash + 1);
  if (head == "oracle") {
    a.kind = db::AlgorithmKind::oracle;
    if (tail == "scalar") {
      a.oracle = db::OracleKind::scalar;
    } else if (tail == "linear") {
      a.oracle = db::OracleKind::linear;
    } else if (tail == "kernel") {
      a.oracle = db::OracleKind::kernel;
    } else {
      throw db::ConfigError("unknown oracle mode in '" + token + "'");
    }
    return a;
  }
  if (head == "iflh") {
    a.kind = db::AlgorithmKind::iflh;
  } else if (head == "flh") {
    a.kind = db::AlgorithmKind::flh;
  } else if (head == "plain") {
    a.kind = db::AlgorithmKind::plain;
  } else {
    throw db::ConfigError("unknown algorithm kind in '" + token + "'");
  }
  if (tail == "ma") {
    a.subroutine.kind = db::SubroutineKind::moving_average;
  } else if (tail == "ogd") {
    a.subroutine.kind = db::SubroutineKind::ogd;
  } else if (tail == "ons") {
    a.subroutine.kind = db::SubroutineKind::ons;
  } else if (tail == "awv") {
    a.subroutine.kind = db::SubroutineKind::awv;
  } else if (tail == "kernel-awv") {
    a.subroutine.kind = db::SubroutineKind::kernel_awv;
  } else {
    throw db::ConfigError("unknown subroutine in '" + token + "'");
  }
  return a;
}

db::ExperimentConfig inline_config(const InlineData& in) {
  db::ExperimentConfig c;
  c.name = "inline";
  c.data.stream.n = in.n;
  c.data.stream.d = in.d;
  c.data.stream.sigma = in.sigma;
  if (in.input == "constant-one" || (in.input == "auto" && in.d == 1)) {
    c.data.stream.input = db::InputMode::constant_one;
  } else if (in.input == "uniform-cube" || in.input == "auto") {
    c.data.stream.input = db::InputMode::uniform_cube;
  } else {
    throw db::ConfigError("unknown input mode '" + in.input + "'");
  }
  if (in.shift == "soft") {
    c.data.shift = db::SoftShift{in.alpha};
  } else if (in.shift == "hard") {
    c.data.shift = db::HardShift{in.starts.empty() ? std::vector<long>{1} : in.starts};
  } else {
    throw db::ConfigError("unknown shift kind '" + in.shift + "'");
  }
  for (const auto& tok : in.algorithms) c.algorithms.push_back(algorithm_from_token(tok));
  return c;
}

void apply_overrides(db::ExperimentConfig& c, const Common& common) {
  if (common.seed) c.seed = *common.seed;
  if (common.runs) c.runs = *common.runs;
  if (common.bound_constant) c.bound_constant = *common.bound_constant;
  if (!common.out.empty()) c.output_dir = common.out;
  db::validate(c);
}

void add_common(CLI::App* cmd, Common& common) {
  cmd->add_option("--seed", common.seed, "Master seed");
  cmd->add_option("--runs", common.runs, "Number of runs")->check(CLI::PositiveNumber);
  cmd->add_option("--out", common.out, "Output directory");
  cmd->add_option("--bound-constant", common.bound_constant, "Multiplier of the bound curve");
}

void add_inline(CLI::App* cmd, InlineData& in) {
  cmd->add_option("--n", in.n, "Horizon");
  cmd->add_option("--d", in.d, "Input dimension");
  cmd->add_option("--sigma", in.sigma, "Noise standard deviation");
  cmd->add_option("--input", in.input, "constant-one | uniform-cube | auto");
  cmd->add_option("--shift", in.shift, "soft | hard");
  cmd->add_option("--alpha", in.alpha, "Soft shift decay");
  cmd->add_option("--starts", in.starts, "Hard shift chunk starts")->delimiter(',');
  cmd->add_option("--algorithms", in.algorithms,
                  "Comma list, e.g. iflh-awv,flh-ma,fixed-restart-ogd,oracle-scalar")
      ->delimiter(',');
}

void report(const db::ExperimentResult& r, const db::ExperimentConfig& c, bool quiet) {
  if (quiet) return;
  std::cout << c.name << " (n=" << c.data.stream.n << ", d=" << c.data.stream.d << ", runs=" << c.runs << ")\n";
  for (const auto& a : c.algorithms) {
    std::cout << "  " << a.name << ": mean cum_err " << r.mean_final_error(a.name) << ", bound "
              << r.final_bound(a.name) << '\n';
  }
}

void run_and_write(db::ExperimentConfig c, const std::string& dir, bool quiet) {
  const auto result = db::run_experiment(c);
  if (!dir.empty()) db::write_results(result, dir);
  report(result, c, quiet);
  if (!quiet && !dir.empty()) std::cout << "  wrote " << dir << '\n';
}

void run_preset(const std::string& name, const Common& common) {
  const auto& preset = db::find_preset(name);
  const std::string root = common.out.empty() ? std::string("results") : common.out;
  for (auto c : preset.experiments) {
    Common sub = common;
    sub.out = (std::filesystem::path(root) / preset.name / c.name).string();
    apply_overrides(c, sub);
    run_and_write(c, sub.out, common.quiet);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"driftbench: online regression under drift"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("--quiet", quiet, "Suppress progress output");

  Common gen_opts, run_opts, preset_opts;
  InlineData gen_data, run_data;

  auto* gen = app.add_subcommand("generate", "Write a stream CSV");
  gen->add_option("--config", gen_opts.config, "Experiment config (JSON)");
  add_common(gen, gen_opts);
  add_inline(gen, gen_data);
  int gen_run = 0;
  gen->add_option("--run", gen_run, "Run index whose stream is written")->check(CLI::NonNegativeNumber);
  gen->get_option("--out")->description("Stream CSV path (stdout when omitted)");

  auto* run = app.add_subcommand("run", "Run an experiment");
  run->add_option("--config", run_opts.config, "Experiment config (JSON)");
  run->add_option("--preset", run_opts.preset, "Preset name");
  add_common(run, run_opts);
  add_inline(run, run_data);

  auto* bound = app.add_subcommand("bound", "Print d^{1/3} t^{1/3} tv^{2/3} (times the constant)");
  long b_t = 1000, b_d = 1, b_n = 0;
  double b_tv = 1.0, b_c = 1.0;
  bound->add_option("--t", b_t, "Round")->check(CLI::PositiveNumber);
  bound->add_option("--d", b_d, "Dimension")->check(CLI::PositiveNumber);
  bound->add_option("--tv", b_tv, "Total variation")->check(CLI::NonNegativeNumber);
  bound->add_option("--n", b_n, "Print the curve for t = 1..n instead");
  bound->add_option("--bound-constant", b_c, "Multiplier");

  auto* presets = app.add_subcommand("presets", "List or run the figure presets");
  presets->require_subcommand(1);
  presets->add_subcommand("list", "List presets");
  auto* prun = presets->add_subcommand("run", "Run one preset");
  std::string preset_name;
  prun->add_option("name", preset_name, "Preset name")->required();
  add_common(prun, preset_opts);

  for (auto* sub : {gen, run, bound, prun}) sub->add_flag("--quiet", quiet, "Suppress progress output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*gen) {
      db::ExperimentConfig c = gen_opts.config.empty() ? inline_config(gen_data) : db::load_config(gen_opts.config);
      if (gen_opts.seed) c.seed = *gen_opts.seed;
      const auto stream = db::generate_run_stream(c, gen_run);
      if (gen_opts.out.empty()) {
        db::write_stream_csv(stream, std::cout);
      } else {
        db::write_stream_csv(stream, gen_opts.out);
      }
    } else if (*run) {
      run_opts.quiet = quiet;
      if (!run_opts.preset.empty()) {
        run_preset(run_opts.preset, run_opts);
      } else {
        db::ExperimentConfig c = run_opts.config.empty() ? inline_config(run_data) : db::load_config(run_opts.config);
        apply_overrides(c, run_opts);
        run_and_write(c, c.output_dir, quiet);
      }
    } else if (*bound) {
      if (b_n > 0) {
        std::cout << "t,bound\n";
        for (long t = 1; t <= b_n; ++t) std::cout << t << ',' << db::format_double(db::bound_curve(t, b_d, b_tv, b_c)) << '\n';
      } else {
        std::cout << db::format_double(db::bound_curve(b_t, b_d, b_tv, b_c)) << '\n';
      }
    } else if (*presets) {
      if (*prun) {
        preset_opts.quiet = quiet;
        run_preset(preset_name, preset_opts);
      } else {
        for (const auto& p : db::all_presets()) {
          std::cout << p.name << "  " << p.description << '\n';
          for (const auto& e : p.experiments) std::cout << "    " << e.name << '\n';
        }
      }
    }
  } catch (const db::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const db::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return 3;
  } catch (const std::domain_error& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
