#include "driftbench/harness.hpp"

#include "driftbench/meta.hpp"
#include "driftbench/subroutines.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace driftbench {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config parsing

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

/// "auto" (or absent) -> 0, else a positive integer.
long auto_or_long(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return 0;
  const auto& v = j.at(key);
  if (v.is_string()) {
    if (v.get<std::string>() == "auto") return 0;
    throw ConfigError(std::string("config key '") + key + "' must be an integer or \"auto\"");
  }
  if (!v.is_number_integer() || v.get<long>() < 1) {
    throw ConfigError(std::string("config key '") + key + "' must be a positive integer or \"auto\"");
  }
  return v.get<long>();
}

std::optional<double> auto_or_double(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  const auto& v = j.at(key);
  if (v.is_string()) {
    if (v.get<std::string>() == "auto") return std::nullopt;
    throw ConfigError(std::string("config key '") + key + "' must be a number or \"auto\"");
  }
  if (!v.is_number()) throw ConfigError(std::string("config key '") + key + "' must be a number");
  return v.get<double>();
}

KernelFunction parse_kernel(const json& j) {
  const auto kind = get_or<std::string>(j, "kind", "gaussian");
  KernelFunction k;
  if (kind == "linear") {
    k = LinearKernel{};
  } else if (kind == "gaussian") {
    k = GaussianKernel{get_or<double>(j, "bandwidth", 1.0)};
  } else if (kind == "polynomial") {
    k = PolynomialKernel{get_or<int>(j, "degree", 2), get_or<double>(j, "offset", 1.0)};
  } else {
    throw ConfigError("unknown kernel kind '" + kind + "'");
  }
  try {
    validate_kernel(k);
  } catch (const std::domain_error& e) {
    throw ConfigError(e.what());
  }
  return k;
}

json kernel_json(const KernelFunction& k) {
  json j{{"kind", kernel_name(k)}};
  if (const auto* g = std::get_if<GaussianKernel>(&k)) j["bandwidth"] = g->bandwidth;
  if (const auto* p = std::get_if<PolynomialKernel>(&k)) {
    j["degree"] = p->degree;
    j["offset"] = p->offset;
  }
  return j;
}

const char* subroutine_name(SubroutineKind k) {
  switch (k) {
    case SubroutineKind::moving_average: return "ma";
    case SubroutineKind::ogd: return "ogd";
    case SubroutineKind::ons: return "ons";
    case SubroutineKind::awv: return "awv";
    case SubroutineKind::kernel_awv: return "kernel-awv";
  }
  return "?";
}

const char* algorithm_name(AlgorithmKind k) {
  switch (k) {
    case AlgorithmKind::iflh: return "iflh";
    case AlgorithmKind::flh: return "flh";
    case AlgorithmKind::plain: return "plain";
    case AlgorithmKind::fixed_restart_ogd: return "fixed-restart-ogd";
    case AlgorithmKind::oracle: return "oracle";
  }
  return "?";
}

const char* oracle_name(OracleKind k) {
  switch (k) {
    case OracleKind::scalar: return "scalar";
    case OracleKind::linear: return "linear";
    case OracleKind::kernel: return "kernel";
  }
  return "?";
}

SubroutineSpec parse_subroutine(const json& j) {
  SubroutineSpec s;
  const auto kind = get_or<std::string>(j, "kind", "awv");
  if (kind == "ma" || kind == "moving-average") {
    s.kind = SubroutineKind::moving_average;
  } else if (kind == "ogd") {
    s.kind = SubroutineKind::ogd;
  } else if (kind == "ons") {
    s.kind = SubroutineKind::ons;
  } else if (kind == "awv") {
    s.kind = SubroutineKind::awv;
  } else if (kind == "kernel-awv") {
    s.kind = SubroutineKind::kernel_awv;
  } else {
    throw ConfigError("unknown subroutine kind '" + kind + "'");
  }
  s.lambda = get_or<double>(j, "lambda", 1.0);
  s.beta = auto_or_double(j, "beta");
  s.lambda_m = auto_or_long(j, "lambda_m");
  s.radius = auto_or_double(j, "radius").value_or(0.0);
  s.grad_bound = auto_or_double(j, "grad_bound").value_or(0.0);
  s.gamma = auto_or_double(j, "gamma");
  s.epsilon = auto_or_double(j, "epsilon");
  if (j.contains("kernel")) s.kernel = parse_kernel(j.at("kernel"));
  return s;
}

json subroutine_json(const SubroutineSpec& s) {
  json j{{"kind", subroutine_name(s.kind)}};
  switch (s.kind) {
    case SubroutineKind::moving_average: break;
    case SubroutineKind::ogd:
      j["radius"] = s.radius > 0 ? json(s.radius) : json("auto");
      j["grad_bound"] = s.grad_bound > 0 ? json(s.grad_bound) : json("auto");
      break;
    case SubroutineKind::ons:
      j["radius"] = s.radius > 0 ? json(s.radius) : json("auto");
      j["gamma"] = s.gamma ? json(*s.gamma) : json("auto");
      j["epsilon"] = s.epsilon ? json(*s.epsilon) : json("auto");
      break;
    case SubroutineKind::awv: j["lambda"] = s.lambda; break;
    case SubroutineKind::kernel_awv:
      j["kernel"] = kernel_json(s.kernel);
      if (s.beta) {
        j["beta"] = *s.beta;
        j["lambda_m"] = s.lambda_m > 0 ? json(s.lambda_m) : json("auto");
      } else {
        j["lambda"] = s.lambda;
      }
      break;
  }
  return j;
}

AlgorithmSpec parse_algorithm(const json& j) {
  AlgorithmSpec a;
  a.name = get_or<std::string>(j, "name", "");
  const auto kind = get_or<std::string>(j, "kind", "iflh");
  if (kind == "iflh") {
    a.kind = AlgorithmKind::iflh;
  } else if (kind == "flh") {
    a.kind = AlgorithmKind::flh;
  } else if (kind == "plain") {
    a.kind = AlgorithmKind::plain;
  } else if (kind == "fixed-restart-ogd") {
    a.kind = AlgorithmKind::fixed_restart_ogd;
  } else if (kind == "oracle") {
    a.kind = AlgorithmKind::oracle;
  } else {
    throw ConfigError("unknown algorithm kind '" + kind + "'");
  }
  if (j.contains("subroutine")) a.subroutine = parse_subroutine(j.at("subroutine"));
  if (a.kind == AlgorithmKind::fixed_restart_ogd) a.subroutine.kind = SubroutineKind::ogd;
  const auto mode = get_or<std::string>(j, "mode", "scalar");
  if (mode == "scalar") {
    a.oracle = OracleKind::scalar;
  } else if (mode == "linear") {
    a.oracle = OracleKind::linear;
  } else if (mode == "kernel") {
    a.oracle = OracleKind::kernel;
  } else {
    throw ConfigError("unknown oracle mode '" + mode + "'");
  }
  a.oracle_m = auto_or_long(j, "m");
  a.batch = auto_or_long(j, "batch");
  a.eta = auto_or_double(j, "eta");
  if (a.name.empty()) {
    a.name = algorithm_name(a.kind);
    if (a.kind == AlgorithmKind::iflh || a.kind == AlgorithmKind::flh || a.kind == AlgorithmKind::plain) {
      a.name += std::string("-") + subroutine_name(a.subroutine.kind);
    } else if (a.kind == AlgorithmKind::oracle) {
      a.name += std::string("-") + oracle_name(a.oracle);
    }
  }
  return a;
}

json algorithm_json(const AlgorithmSpec& a) {
  json j{{"name", a.name}, {"kind", algorithm_name(a.kind)}};
  switch (a.kind) {
    case AlgorithmKind::iflh:
    case AlgorithmKind::flh:
    case AlgorithmKind::plain:
      j["subroutine"] = subroutine_json(a.subroutine);
      if (a.eta) j["eta"] = *a.eta;
      break;
    case AlgorithmKind::fixed_restart_ogd:
      j["batch"] = a.batch > 0 ? json(a.batch) : json("auto");
      j["subroutine"] = subroutine_json(a.subroutine);
      break;
    case AlgorithmKind::oracle:
      j["mode"] = oracle_name(a.oracle);
      j["m"] = a.oracle_m > 0 ? json(a.oracle_m) : json("auto");
      break;
  }
  return j;
}

ShiftSpec parse_shift(const json& j) {
  const auto kind = get_or<std::string>(j, "kind", "soft");
  if (kind == "soft") return SoftShift{get_or<double>(j, "alpha", 1.0)};
  if (kind != "hard") throw ConfigError("unknown shift kind '" + kind + "'");
  HardShift h;
  if (j.contains("starts")) {
    h.starts = get_or<std::vector<long>>(j, "starts", {});
  } else if (j.contains("power_base")) {
    h.starts = power_starts(get_or<long>(j, "power_base", 2), get_or<int>(j, "max_i", 10));
  } else if (j.contains("step")) {
    h.starts = linear_starts(get_or<long>(j, "step", 100), get_or<int>(j, "count", 10));
  } else {
    h.starts = {1};
  }
  return h;
}

json shift_json(const ShiftSpec& s) {
  if (const auto* soft = std::get_if<SoftShift>(&s)) return json{{"kind", "soft"}, {"alpha", soft->alpha}};
  return json{{"kind", "hard"}, {"starts", std::get<HardShift>(s).starts}};
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig c;
  c.name = get_or<std::string>(j, "name", "experiment");
  c.runs = get_or<int>(j, "runs", 1);
  c.seed = get_or<std::uint64_t>(j, "seed", 0);
  c.eta = auto_or_double(j, "eta");
  c.bound_constant = get_or<double>(j, "bound_constant", 1.0);
  c.output_dir = get_or<std::string>(j, "output_dir", "");
  c.threads = get_or<int>(j, "threads", 0);

  const json data = j.value("data", json::object());
  c.data.stream.n = get_or<long>(data, "n", 1000);
  c.data.stream.d = get_or<long>(data, "d", 1);
  c.data.stream.sigma = get_or<double>(data, "sigma", 1.0);
  const auto input = get_or<std::string>(data, "input", "uniform-cube");
  if (input == "uniform-cube") {
    c.data.stream.input = InputMode::uniform_cube;
  } else if (input == "constant-one") {
    c.data.stream.input = InputMode::constant_one;
  } else {
    throw ConfigError("unknown input mode '" + input + "'");
  }
  if (data.contains("shift")) c.data.shift = parse_shift(data.at("shift"));
  const auto model = get_or<std::string>(data, "model", "linear");
  if (model == "linear") {
    c.data.model = ModelKind::linear;
  } else if (model == "dictionary") {
    c.data.model = ModelKind::dictionary;
  } else {
    throw ConfigError("unknown model '" + model + "'");
  }
  c.data.path_scale = get_or<double>(data, "path_scale", 1.0);
  if (data.contains("dictionary")) {
    const auto& dj = data.at("dictionary");
    c.data.dictionary.anchors = get_or<long>(dj, "anchors", 5);
    c.data.dictionary.scale = get_or<double>(dj, "scale", 1.0);
    if (dj.contains("kernel")) c.data.dictionary.kernel = parse_kernel(dj.at("kernel"));
  }

  if (!j.contains("algorithms") || !j.at("algorithms").is_array()) {
    throw ConfigError("config needs an 'algorithms' array");
  }
  for (const auto& a : j.at("algorithms")) c.algorithms.push_back(parse_algorithm(a));
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return parse_config(j);
}

json to_json(const ExperimentConfig& c) {
  json data{{"n", c.data.stream.n},
            {"d", c.data.stream.d},
            {"sigma", c.data.stream.sigma},
            {"input", c.data.stream.input == InputMode::constant_one ? "constant-one" : "uniform-cube"},
            {"shift", shift_json(c.data.shift)},
            {"model", c.data.model == ModelKind::linear ? "linear" : "dictionary"}};
  if (c.data.model == ModelKind::linear) {
    data["path_scale"] = c.data.path_scale;
  } else {
    data["dictionary"] = {{"anchors", c.data.dictionary.anchors},
                          {"scale", c.data.dictionary.scale},
                          {"kernel", kernel_json(c.data.dictionary.kernel)}};
  }
  json algs = json::array();
  for (const auto& a : c.algorithms) algs.push_back(algorithm_json(a));
  return json{{"name", c.name},
              {"seed", c.seed},
              {"runs", c.runs},
              {"eta", c.eta ? json(*c.eta) : json("auto")},
              {"bound_constant", c.bound_constant},
              {"data", data},
              {"algorithms", algs}};
}

namespace {

void validate_data(const DataSpec& data) {
  validate(data.stream);
  if (data.model == ModelKind::dictionary && !std::holds_alternative<HardShift>(data.shift)) {
    throw ConfigError("dictionary model supports hard shifts only");
  }
  if (const auto* h = std::get_if<HardShift>(&data.shift)) {
    for (long s : h->starts) {
      if (s < 1 || s > data.stream.n) throw ConfigError("hard shift start outside [1, n]");
    }
  }
  if (const auto* s = std::get_if<SoftShift>(&data.shift); s && !(s->alpha > 0)) {
    throw ConfigError("soft shift alpha must be positive");
  }
  if (data.model == ModelKind::dictionary && data.dictionary.anchors < 1) {
    throw ConfigError("dictionary needs at least one anchor");
  }
}

}  // namespace

void validate(const ExperimentConfig& c) {
  validate_data(c.data);
  if (c.runs < 1) throw ConfigError("runs must be >= 1");
  if (c.algorithms.empty()) throw ConfigError("at least one algorithm is required");
  if (c.eta && !(*c.eta > 0)) throw ConfigError("eta must be positive or \"auto\"");
  if (!(c.bound_constant >= 0)) throw ConfigError("bound_constant must be >= 0");
  std::set<std::string> names;
  for (const auto& a : c.algorithms) {
    if (!names.insert(a.name).second) throw ConfigError("duplicate algorithm name '" + a.name + "'");
    if (a.eta && !(*a.eta > 0)) throw ConfigError(a.name + ": eta must be positive");
    const bool uses_sub = a.kind == AlgorithmKind::iflh || a.kind == AlgorithmKind::flh ||
                          a.kind == AlgorithmKind::plain;
    if (uses_sub && a.subroutine.kind == SubroutineKind::kernel_awv) {
      if (c.data.stream.input == InputMode::constant_one && c.data.stream.d > 1) {
        throw ConfigError(a.name + ": kernel subroutine with constant-one inputs in d > 1");
      }
      if (a.subroutine.beta && !(*a.subroutine.beta > 0 && *a.subroutine.beta < 1)) {
        throw ConfigError(a.name + ": beta must lie in (0, 1)");
      }
    }
    if ((a.subroutine.gamma && !(*a.subroutine.gamma > 0)) || (a.subroutine.epsilon && !(*a.subroutine.epsilon > 0))) {
      throw ConfigError(a.name + ": gamma and epsilon must be positive or \"auto\"");
    }
    if (uses_sub && a.subroutine.kind == SubroutineKind::awv && !(a.subroutine.lambda > 0)) {
      throw ConfigError(a.name + ": lambda must be positive");
    }
    if (a.kind == AlgorithmKind::oracle) {
      if (a.oracle == OracleKind::linear && c.data.model != ModelKind::linear) {
        throw ConfigError(a.name + ": linear oracle needs the linear data model");
      }
      if (a.oracle == OracleKind::kernel && c.data.model != ModelKind::dictionary) {
        throw ConfigError(a.name + ": kernel oracle needs the dictionary data model");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Metrics

Eigen::VectorXd cumulative_true_error(const Eigen::VectorXd& preds, const Eigen::VectorXd& truths) {
  if (preds.size() != truths.size()) throw std::domain_error("cumulative_true_error: length mismatch");
  Eigen::VectorXd out(preds.size());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < preds.size(); ++i) {
    const double r = preds(i) - truths(i);
    acc += r * r;
    out(i) = acc;
  }
  return out;
}

double bound_curve(long t, long d, double tv, double constant) {
  return constant * std::cbrt(static_cast<double>(d)) * std::cbrt(static_cast<double>(t)) *
         std::pow(tv, 2.0 / 3.0);
}

std::uint64_t run_seed(std::uint64_t master, int run) {
  return derive_seed(master, SubStream::run, static_cast<std::uint64_t>(run));
}

int resolve_threads(int requested) {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  if (requested > 0) return requested;
  if (const char* env = std::getenv("DRIFTBENCH_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return std::min(v, hw);
  }
  return hw;
}

// ---------------------------------------------------------------------------
// Running

namespace {

struct RunData {
  std::uint64_t seed = 0;
  Stream stream;
  std::optional<ParameterPath> linear;
  std::optional<DictionaryPath> dictionary;
  std::vector<double> tv_prefix;  // tv_prefix[t-1] = TV of theta_{1:t}
  double tv = 0.0;
};

RunData make_run(const ExperimentConfig& c, int r) {
  RunData rd;
  rd.seed = run_seed(c.seed, r);
  StreamSpec spec = c.data.stream;
  spec.seed = rd.seed;
  std::vector<double> inc;
  if (c.data.model == ModelKind::linear) {
    ParameterPath path = gen_path(spec.n, spec.d, c.data.shift, rd.seed);
    if (c.data.path_scale != 1.0) path = path.scaled(c.data.path_scale);
    rd.stream = gen_stream(path, spec);
    inc = path_increments(path, Norm::l1);
    rd.linear = std::move(path);
  } else {
    const auto& dict = c.data.dictionary;
    DictionaryPath path = gen_dictionary_hard_shifts(spec.n, spec.d, dict.anchors, dict.kernel,
                                                     std::get<HardShift>(c.data.shift).starts,
                                                     dict.scale, rd.seed);
    rd.stream = gen_stream(path, spec);
    inc = path.increments();
    rd.dictionary = std::move(path);
  }
  rd.tv_prefix.resize(inc.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < inc.size(); ++i) {
    acc += inc[i];
    rd.tv_prefix[i] = acc;
  }
  rd.tv = acc;
  return rd;
}

struct Trace {
  Eigen::VectorXd preds;
  std::vector<long> active;
  json resolved = json::object();
};

template <Subroutine L>
Trace run_meta(const Stream& stream, const MetaConfig& cfg, ExpertFactory<L> factory) {
  Trace tr;
  tr.preds.resize(static_cast<Eigen::Index>(stream.size()));
  tr.active.reserve(stream.size());
  MetaLearner<L> meta(cfg, std::move(factory));
  long peak = 0;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const auto& o = stream[i];
    tr.preds(static_cast<Eigen::Index>(i)) = meta.predict(o.x).y_hat;
    tr.active.push_back(static_cast<long>(meta.pool().size()));
    peak = std::max(peak, static_cast<long>(meta.pool().size()));
    meta.observe(o.x, o.y);
  }
  tr.resolved["eta_mode"] = cfg.eta ? "explicit" : "auto";
  tr.resolved["eta_final"] = meta.last_eta();
  tr.resolved["output_bound_final"] = meta.bound().Y;
  tr.resolved["weight_resets"] = meta.pool().weight_resets;
  tr.resolved["peak_active_experts"] = peak;
  return tr;
}

template <Subroutine L>
Trace run_plain(const Stream& stream, L learner) {
  Trace tr;
  tr.preds.resize(static_cast<Eigen::Index>(stream.size()));
  tr.active.assign(stream.size(), 1);
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const auto& o = stream[i];
    tr.preds(static_cast<Eigen::Index>(i)) = learner.predict(o.x);
    learner.observe(o.x, o.y);
  }
  return tr;
}

double resolve_radius(const SubroutineSpec& s, long d) {
  return s.radius > 0 ? s.radius : std::sqrt(static_cast<double>(d));
}

double resolve_kernel_lambda(const SubroutineSpec& s, const ExperimentConfig& c, const RunData& rd) {
  if (!s.beta) return s.lambda;
  long m = s.lambda_m;
  if (m <= 0) {
    m = (rd.tv > 0 && c.data.stream.sigma > 0)
            ? optimal_num_batches(c.data.stream.n, rd.tv, c.data.stream.sigma)
            : 1;
  }
  m = std::min(m, c.data.stream.n);
  return lambda_schedule(c.data.stream.n, m, *s.beta);
}

Trace run_with_subroutine(const AlgorithmSpec& a, const ExperimentConfig& c, const RunData& rd,
                          const Stream& learner_view) {
  const long d = c.data.stream.d;
  const SubroutineSpec& s = a.subroutine;
  MetaConfig mc;
  mc.eta = a.eta ? a.eta : c.eta;
  mc.pruning = a.kind == AlgorithmKind::flh ? Pruning::none : Pruning::binary;
  json resolved{{"subroutine", subroutine_name(s.kind)}};

  auto dispatch = [&]<typename L>(std::function<L(long)> make) {
    Trace tr = a.kind == AlgorithmKind::plain ? run_plain(learner_view, make(1))
                                              : run_meta<L>(learner_view, mc, make);
    tr.resolved.update(resolved);
    return tr;
  };

  switch (s.kind) {
    case SubroutineKind::moving_average:
      return dispatch(std::function<MovingAverage<double>(long)>([](long) { return MovingAverage<double>{}; }));
    case SubroutineKind::ogd: {
      const double radius = resolve_radius(s, d);
      resolved["radius"] = radius;
      resolved["grad_bound"] = s.grad_bound > 0 ? json(s.grad_bound) : json("running-max");
      return dispatch(std::function<Ogd<double>(long)>(
          [=](long) { return Ogd<double>(d, radius, s.grad_bound); }));
    }
    case SubroutineKind::ons: {
      const double radius = resolve_radius(s, d);
      resolved["radius"] = radius;
      resolved["gamma"] = s.gamma ? json(*s.gamma) : json("running");
      resolved["epsilon"] = s.epsilon ? json(*s.epsilon) : json("from-first-gradient");
      return dispatch(std::function<Ons<double>(long)>(
          [=](long) { return Ons<double>(d, radius, s.gamma, s.epsilon); }));
    }
    case SubroutineKind::awv: {
      resolved["lambda"] = s.lambda;
      return dispatch(std::function<Awv<double>(long)>([=](long) { return Awv<double>(d, s.lambda); }));
    }
    case SubroutineKind::kernel_awv: {
      const double lambda = resolve_kernel_lambda(s, c, rd);
      resolved["lambda"] = lambda;
      resolved["kernel"] = kernel_json(s.kernel);
      const KernelFunction k = s.kernel;
      return dispatch(std::function<KernelAwv<double>(long)>(
          [=](long) { return KernelAwv<double>(k, lambda); }));
    }
  }
  throw std::logic_error("unreachable subroutine kind");
}

Trace run_algorithm(const AlgorithmSpec& a, const ExperimentConfig& c, const RunData& rd) {
  // learners only ever see the stream with the truth stripped
  const Stream learner_view = without_truth(rd.stream);
  const long n = c.data.stream.n;
  const double sigma = c.data.stream.sigma;
  switch (a.kind) {
    case AlgorithmKind::iflh:
    case AlgorithmKind::flh:
    case AlgorithmKind::plain:
      return run_with_subroutine(a, c, rd, learner_view);
    case AlgorithmKind::fixed_restart_ogd: {
      long batch = a.batch;
      if (batch <= 0) {
        batch = (rd.tv > 0 && sigma > 0) ? fixed_restart_batch_size(n, sigma, rd.tv) : n;
      }
      const double radius = resolve_radius(a.subroutine, c.data.stream.d);
      Trace tr;
      tr.preds = fixed_restart_ogd_run(learner_view, batch, radius, a.subroutine.grad_bound);
      tr.active.assign(static_cast<std::size_t>(n), 1);
      tr.resolved = {{"batch", batch}, {"radius", radius}, {"log", "natural"}};
      return tr;
    }
    case AlgorithmKind::oracle: {
      long m = a.oracle_m;
      if (m <= 0) m = (rd.tv > 0 && sigma > 0) ? optimal_num_batches(n, rd.tv, sigma) : 1;
      RestartPartition part;
      OracleMode mode = ScalarMeanOracle{};
      if (rd.linear) {
        part = greedy_restart_partition(*rd.linear, m, Norm::l1);
        if (a.oracle == OracleKind::linear) mode = LinearOracle{&*rd.linear};
      } else {
        part = greedy_restart_partition(*rd.dictionary, m);
        if (a.oracle == OracleKind::kernel) mode = KernelOracle{&*rd.dictionary};
      }
      Trace tr;
      tr.preds = oracle_forecast(rd.stream, part, mode);
      tr.active.assign(static_cast<std::size_t>(n), 1);
      tr.resolved = {{"m", m}, {"segments", part.segments()}, {"budget", part.budget}, {"log", "natural"}};
      return tr;
    }
  }
  throw std::logic_error("unreachable algorithm kind");
}

template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const std::size_t nthreads = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, threads)), count);
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < nthreads; ++i) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  validate(config);
  const int threads = resolve_threads(config.threads);
  const long n = config.data.stream.n;
  const long d = config.data.stream.d;
  const auto runs = static_cast<std::size_t>(config.runs);
  const std::size_t algs = config.algorithms.size();

  std::vector<RunData> run_data(runs);
  parallel_for(runs, threads, [&](std::size_t r) { run_data[r] = make_run(config, static_cast<int>(r)); });

  std::vector<Trace> traces(algs * runs);
  parallel_for(algs * runs, threads, [&](std::size_t i) {
    traces[i] = run_algorithm(config.algorithms[i / runs], config, run_data[i % runs]);
  });

  ExperimentResult result;
  result.rows.reserve(algs * runs * static_cast<std::size_t>(n));
  for (std::size_t a = 0; a < algs; ++a) {
    const auto& spec = config.algorithms[a];
    std::vector<Eigen::VectorXd> curves;
    std::vector<Eigen::VectorXd> bounds;
    for (std::size_t r = 0; r < runs; ++r) {
      const auto& rd = run_data[r];
      const auto& tr = traces[a * runs + r];
      Eigen::VectorXd truth(n);
      for (long t = 0; t < n; ++t) truth(t) = *rd.stream[static_cast<std::size_t>(t)].y_true;
      Eigen::VectorXd cum = cumulative_true_error(tr.preds, truth);
      Eigen::VectorXd bnd(n);
      for (long t = 1; t <= n; ++t) {
        bnd(t - 1) = bound_curve(t, d, rd.tv_prefix[static_cast<std::size_t>(t - 1)], config.bound_constant);
      }
      double prev = 0.0;
      for (long t = 1; t <= n; ++t) {
        const auto& o = rd.stream[static_cast<std::size_t>(t - 1)];
        ResultRow row;
        row.algorithm = spec.name;
        row.run = static_cast<int>(r);
        row.seed = rd.seed;
        row.t = t;
        row.y_hat = tr.preds(t - 1);
        row.y = o.y;
        row.y_true = *o.y_true;
        row.cum_err = cum(t - 1);
        row.inst_err = cum(t - 1) - prev;
        prev = cum(t - 1);
        row.bound = bnd(t - 1);
        row.active_experts = tr.active[static_cast<std::size_t>(t - 1)];
        result.rows.push_back(std::move(row));
      }
      RunInfo info{spec.name, static_cast<int>(r), rd.seed, rd.tv, tr.resolved};
      result.runs.push_back(std::move(info));
      curves.push_back(std::move(cum));
      bounds.push_back(std::move(bnd));
    }
    for (long t = 1; t <= n; ++t) {
      SummaryRow s;
      s.algorithm = spec.name;
      s.t = t;
      double mean = 0.0, bmean = 0.0;
      for (std::size_t r = 0; r < runs; ++r) {
        mean += curves[r](t - 1);
        bmean += bounds[r](t - 1);
      }
      mean /= static_cast<double>(runs);
      bmean /= static_cast<double>(runs);
      double var = 0.0;
      for (std::size_t r = 0; r < runs; ++r) var += (curves[r](t - 1) - mean) * (curves[r](t - 1) - mean);
      s.mean_cum_err = mean;
      s.std_cum_err = runs > 1 ? std::sqrt(var / static_cast<double>(runs - 1)) : 0.0;
      s.bound = bmean;
      result.summary.push_back(s);
    }
  }

  json resolved = to_json(config);
  resolved["threads"] = threads;
  resolved["conventions"] = {{"log_formulas", "natural"},
                             {"log_lifetimes", "base 2"},
                             {"eta_auto", "1/(32 Y^2), Y = running max |y|"},
                             {"bound_tv", "l1 (linear) or RKHS (dictionary) variation of theta_{1:t}"},
                             {"std", "sample (n-1)"}};
  json run_list = json::array();
  for (const auto& info : result.runs) {
    run_list.push_back({{"algorithm", info.algorithm},
                        {"run", info.run},
                        {"seed", info.seed},
                        {"tv", info.tv},
                        {"resolved", info.resolved}});
  }
  resolved["run_seeds"] = json::array();
  for (const auto& rd : run_data) resolved["run_seeds"].push_back(rd.seed);
  resolved["runs_resolved"] = run_list;
  result.resolved_config = std::move(resolved);
  return result;
}

Stream generate_run_stream(const ExperimentConfig& config, int run) {
  validate_data(config.data);
  return make_run(config, run).stream;
}

std::vector<double> ExperimentResult::final_errors(const std::string& algorithm) const {
  std::vector<double> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const bool last = i + 1 == rows.size() || rows[i + 1].run != rows[i].run ||
                      rows[i + 1].algorithm != rows[i].algorithm;
    if (rows[i].algorithm == algorithm && last) out.push_back(rows[i].cum_err);
  }
  return out;
}

double ExperimentResult::mean_final_error(const std::string& algorithm) const {
  const auto v = final_errors(algorithm);
  if (v.empty()) throw std::out_of_range("no runs for algorithm " + algorithm);
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double ExperimentResult::final_bound(const std::string& algorithm) const {
  const SummaryRow* last = nullptr;
  for (const auto& s : summary) {
    if (s.algorithm == algorithm) last = &s;
  }
  if (!last) throw std::out_of_range("no summary for algorithm " + algorithm);
  return last->bound;
}

// ---------------------------------------------------------------------------
// Output

void write_results_csv(const std::vector<ResultRow>& rows, std::ostream& out) {
  out << "algorithm,run,seed,t,y_hat,y,y_true,inst_err,cum_err,bound,active_experts\n";
  for (const auto& r : rows) {
    out << r.algorithm << ',' << r.run << ',' << r.seed << ',' << r.t << ',' << format_double(r.y_hat) << ','
        << format_double(r.y) << ',' << format_double(r.y_true) << ',' << format_double(r.inst_err) << ','
        << format_double(r.cum_err) << ',' << format_double(r.bound) << ',' << r.active_experts << '\n';
  }
}

void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& out) {
  out << "algorithm,t,mean_cum_err,std_cum_err,bound\n";
  for (const auto& s : rows) {
    out << s.algorithm << ',' << s.t << ',' << format_double(s.mean_cum_err) << ','
        << format_double(s.std_cum_err) << ',' << format_double(s.bound) << '\n';
  }
}

std::vector<ResultRow> read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) ||
      line != "algorithm,run,seed,t,y_hat,y,y_true,inst_err,cum_err,bound,active_experts") {
    throw ConfigError("results CSV: unexpected header");
  }
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 11) throw ConfigError("results CSV: ragged row");
    ResultRow r;
    r.algorithm = cells[0];
    r.run = std::stoi(cells[1]);
    r.seed = std::stoull(cells[2]);
    r.t = std::stol(cells[3]);
    r.y_hat = std::stod(cells[4]);
    r.y = std::stod(cells[5]);
    r.y_true = std::stod(cells[6]);
    r.inst_err = std::stod(cells[7]);
    r.cum_err = std::stod(cells[8]);
    r.bound = std::stod(cells[9]);
    r.active_experts = std::stol(cells[10]);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_results(const ExperimentResult& result, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
  auto open = [&](const std::string& name) {
    const auto path = (fs::path(dir) / name).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    return std::pair{std::move(out), path};
  };
  {
    auto [out, path] = open("results.csv");
    write_results_csv(result.rows, out);
    if (!out) throw IoError("write failed: " + path);
  }
  {
    auto [out, path] = open("summary.csv");
    write_summary_csv(result.summary, out);
    if (!out) throw IoError("write failed: " + path);
  }
  {
    auto [out, path] = open("config.json");
    out << result.resolved_config.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path);
  }
}

}  // namespace driftbench
