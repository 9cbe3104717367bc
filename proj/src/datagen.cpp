#include "driftbench/datagen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

namespace driftbench {

namespace {

std::vector<long> normalise_starts(long n, std::vector<long> starts) {
  std::sort(starts.begin(), starts.end());
  starts.erase(std::unique(starts.begin(), starts.end()), starts.end());
  if (starts.empty() || starts.front() != 1) starts.insert(starts.begin(), 1);
  for (long s : starts) {
    if (s < 1 || s > n) throw ConfigError("hard shift start " + std::to_string(s) + " outside [1, n]");
  }
  return starts;
}

Eigen::MatrixXd rademacher_chunks(long n, long dims, const std::vector<long>& starts, Rng& rng,
                                  double scale) {
  Eigen::MatrixXd thetas(dims, n);
  Eigen::VectorXd current(dims);
  std::size_t next = 0;
  for (long t = 1; t <= n; ++t) {
    if (next < starts.size() && starts[next] == t) {
      for (long k = 0; k < dims; ++k) current(k) = scale * rng.rademacher();
      ++next;
    }
    thetas.col(t - 1) = current;
  }
  return thetas;
}

}  // namespace

// ---------------------------------------------------------------------------

ParameterPath ParameterPath::from_thetas(Eigen::MatrixXd thetas) {
  ParameterPath p;
  p.thetas = std::move(thetas);
  p.tv_l1 = total_variation(p, Norm::l1);
  p.tv_l2 = total_variation(p, Norm::l2);
  for (long t = 0; t < p.n(); ++t) {
    p.radius_l1 = std::max(p.radius_l1, p.thetas.col(t).lpNorm<1>());
    p.radius_l2 = std::max(p.radius_l2, p.thetas.col(t).norm());
  }
  return p;
}

ParameterPath ParameterPath::scaled(double factor) const { return from_thetas(thetas * factor); }

std::vector<double> path_increments(const ParameterPath& path, Norm norm) {
  std::vector<double> inc(static_cast<std::size_t>(path.n()), 0.0);
  for (long t = 1; t < path.n(); ++t) {
    const Eigen::VectorXd diff = path.thetas.col(t) - path.thetas.col(t - 1);
    inc[static_cast<std::size_t>(t)] = norm == Norm::l1 ? diff.lpNorm<1>() : diff.norm();
  }
  return inc;
}

double total_variation(const ParameterPath& path, Norm norm) {
  if (path.n() < 1) throw std::domain_error("total_variation: empty path");
  double tv = 0.0;
  for (double v : path_increments(path, norm)) tv += v;
  return tv;
}

ParameterPath gen_soft_shifts(long n, long d, double alpha, std::uint64_t seed) {
  if (n < 1 || d < 1) throw ConfigError("soft shifts: need n >= 1 and d >= 1");
  if (!(alpha > 0)) throw ConfigError("soft shifts: alpha must be positive");
  Rng rng(derive_seed(seed, SubStream::path));
  Eigen::MatrixXd thetas = Eigen::MatrixXd::Zero(d, n);
  for (long t = 2; t <= n; ++t) {
    const double sd = std::pow(static_cast<double>(t), -alpha / 2.0);
    for (long k = 0; k < d; ++k) thetas(k, t - 1) = thetas(k, t - 2) + rng.normal(sd);
  }
  return ParameterPath::from_thetas(std::move(thetas));
}

ParameterPath gen_hard_shifts(long n, long d, const std::vector<long>& starts, std::uint64_t seed) {
  if (n < 1 || d < 1) throw ConfigError("hard shifts: need n >= 1 and d >= 1");
  Rng rng(derive_seed(seed, SubStream::path));
  return ParameterPath::from_thetas(rademacher_chunks(n, d, normalise_starts(n, starts), rng, 1.0));
}

ParameterPath gen_path(long n, long d, const ShiftSpec& shift, std::uint64_t seed) {
  if (const auto* s = std::get_if<SoftShift>(&shift)) return gen_soft_shifts(n, d, s->alpha, seed);
  return gen_hard_shifts(n, d, std::get<HardShift>(shift).starts, seed);
}

std::vector<long> power_starts(long base, int max_i) {
  std::vector<long> out{1};
  long v = 1;
  for (int i = 1; i <= max_i; ++i) {
    v *= base;
    out.push_back(v);
  }
  return out;
}

std::vector<long> linear_starts(long step, int count) {
  std::vector<long> out{1};
  for (int i = 1; i <= count; ++i) out.push_back(step * i);
  return out;
}

// ---------------------------------------------------------------------------

double DictionaryPath::value_with(const Eigen::VectorXd& c, const Eigen::VectorXd& x) const {
  double v = 0.0;
  for (long j = 0; j < anchors.cols(); ++j) v += c(j) * kernel_eval(kernel, anchors.col(j), x);
  return v;
}

double DictionaryPath::value(long t, const Eigen::VectorXd& x) const {
  return value_with(coefficients.thetas.col(t - 1), x);
}

double DictionaryPath::rkhs_norm(const Eigen::VectorXd& c) const {
  return std::sqrt(std::max(0.0, c.dot(gram * c)));
}

std::vector<double> DictionaryPath::increments() const {
  std::vector<double> inc(static_cast<std::size_t>(n()), 0.0);
  for (long t = 1; t < n(); ++t) {
    inc[static_cast<std::size_t>(t)] =
        rkhs_norm(coefficients.thetas.col(t) - coefficients.thetas.col(t - 1));
  }
  return inc;
}

DictionaryPath gen_dictionary_hard_shifts(long n, long d, long anchors, KernelFunction kernel,
                                          const std::vector<long>& starts, double scale,
                                          std::uint64_t seed) {
  if (n < 1 || d < 1 || anchors < 1) throw ConfigError("dictionary path: need n, d, anchors >= 1");
  validate_kernel(kernel);
  DictionaryPath p;
  p.kernel = std::move(kernel);
  Rng anchor_rng(derive_seed(seed, SubStream::dictionary));
  p.anchors.resize(d, anchors);
  for (long j = 0; j < anchors; ++j) {
    for (long k = 0; k < d; ++k) p.anchors(k, j) = anchor_rng.uniform(-1.0, 1.0);
  }
  Rng rng(derive_seed(seed, SubStream::path));
  p.coefficients =
      ParameterPath::from_thetas(rademacher_chunks(n, anchors, normalise_starts(n, starts), rng, scale));
  p.gram = kernel_matrix<double>(p.kernel, p.anchors);
  for (double v : p.increments()) p.tv_rkhs += v;
  for (long t = 0; t < n; ++t) p.radius_rkhs = std::max(p.radius_rkhs, p.rkhs_norm(p.coefficients.thetas.col(t)));
  return p;
}

// ---------------------------------------------------------------------------

void validate(const StreamSpec& spec) {
  if (spec.n < 1) throw ConfigError("stream: n must be >= 1");
  if (spec.d < 1) throw ConfigError("stream: d must be >= 1");
  if (!(spec.sigma >= 0)) throw ConfigError("stream: sigma must be >= 0");
  if (spec.input == InputMode::constant_one && spec.d != 1) {
    throw ConfigError("stream: constant-one inputs require d = 1");
  }
}

namespace {

template <typename Truth>
Stream make_stream(const StreamSpec& spec, Truth&& truth) {
  validate(spec);
  Rng inputs(derive_seed(spec.seed, SubStream::inputs));
  Rng noise(derive_seed(spec.seed, SubStream::noise));
  Stream out;
  out.reserve(static_cast<std::size_t>(spec.n));
  for (long t = 1; t <= spec.n; ++t) {
    Observation o;
    o.t = t;
    o.x.resize(spec.d);
    if (spec.input == InputMode::constant_one) {
      o.x.setOnes();
    } else {
      for (long k = 0; k < spec.d; ++k) o.x(k) = inputs.uniform(-1.0, 1.0);
    }
    const double clean = truth(t, o.x);
    const double z = spec.sigma > 0 ? noise.normal(spec.sigma) : 0.0;
    o.y = clean + z;
    o.y_true = clean;
    out.push_back(std::move(o));
  }
  return out;
}

}  // namespace

Stream gen_stream(const ParameterPath& path, const StreamSpec& spec) {
  if (path.n() != spec.n) throw ConfigError("gen_stream: path length differs from n");
  if (path.d() != spec.d) throw ConfigError("gen_stream: path dimension differs from d");
  return make_stream(spec, [&](long t, const Eigen::VectorXd& x) { return x.dot(path.thetas.col(t - 1)); });
}

Stream gen_stream(const DictionaryPath& path, const StreamSpec& spec) {
  if (path.n() != spec.n) throw ConfigError("gen_stream: path length differs from n");
  if (path.d() != spec.d) throw ConfigError("gen_stream: anchor dimension differs from d");
  return make_stream(spec, [&](long t, const Eigen::VectorXd& x) { return path.value(t, x); });
}

Stream without_truth(const Stream& stream) {
  Stream out = stream;
  for (auto& o : out) o.y_true.reset();
  return out;
}

// ---------------------------------------------------------------------------

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_stream_csv(const Stream& stream, std::ostream& out) {
  const long d = stream.empty() ? 1 : static_cast<long>(stream.front().x.size());
  out << "t";
  for (long k = 1; k <= d; ++k) out << ",x_" << k;
  out << ",y,y_true\n";
  for (const auto& o : stream) {
    out << o.t;
    for (long k = 0; k < d; ++k) out << ',' << format_double(o.x(k));
    out << ',' << format_double(o.y) << ',';
    if (o.y_true) out << format_double(*o.y_true);
    out << '\n';
  }
}

void write_stream_csv(const Stream& stream, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_stream_csv(stream, out);
  if (!out) throw IoError("write failed: " + path);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ConfigError("bad number in CSV: '" + s + "'");
  return v;
}

}  // namespace

Stream read_stream_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("stream CSV: missing header");
  const auto header = split_csv_line(line);
  if (header.size() < 4 || header.front() != "t" || header[header.size() - 2] != "y" ||
      header.back() != "y_true") {
    throw ConfigError("stream CSV: header must be t,x_1..x_d,y,y_true");
  }
  const std::size_t d = header.size() - 3;
  Stream out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) throw ConfigError("stream CSV: ragged row");
    Observation o;
    o.t = static_cast<long>(parse_double(cells[0]));
    o.x.resize(static_cast<Eigen::Index>(d));
    for (std::size_t k = 0; k < d; ++k) o.x(static_cast<Eigen::Index>(k)) = parse_double(cells[1 + k]);
    o.y = parse_double(cells[1 + d]);
    if (!cells.back().empty()) o.y_true = parse_double(cells.back());
    out.push_back(std::move(o));
  }
  return out;
}

Stream read_stream_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return read_stream_csv(in);
}

}  // namespace driftbench
