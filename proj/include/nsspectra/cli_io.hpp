#pragma once

// Batch command implementations behind the ns_spectra CLI: plot-ready CSV and
// JSON emitters, run manifests, and JSON config files mirroring the flags.

#include <openssl/evp.h>

#include <array>
#include <cerrno>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nsspectra/dense_linalg.hpp"
#include "nsspectra/detail/parallel.hpp"
#include "nsspectra/errors.hpp"
#include "nsspectra/gaussian_matrix.hpp"
#include "nsspectra/mp_law.hpp"
#include "nsspectra/ns_orthogonalizer.hpp"
#include "nsspectra/scaling_experiments.hpp"

#ifndef NSSPECTRA_VERSION
#define NSSPECTRA_VERSION "0.1.0"
#endif

namespace nsspectra::cli {

using json = nlohmann::json;

inline constexpr std::string_view kToolVersion = "ns_spectra " NSSPECTRA_VERSION;

// ---------------------------------------------------------------------------
// Formatting and files

/// Shortest-safe rendering with 17 significant digits, so a parse of the text
/// returns the same double.
inline std::string format_real(double x) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x,
                                 std::chars_format::general, 17);
  if (ec != std::errc{}) throw NumericError("format_real: conversion failed");
  return std::string(buf.data(), end);
}

inline std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256: digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

/// Writes to a sibling temp file, then renames over `path`.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  const std::string name = path.string();
  std::error_code ec;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError(name, "cannot create parent directory: " + ec.message());
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError(name, std::string("cannot open for writing: ") + std::strerror(errno));
    os.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    os.flush();
    if (!os) throw IoError(name, "write failed");
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError(name, "cannot rename temporary file into place");
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(path.string(), std::string("cannot open for reading: ") + std::strerror(errno));
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::array<char, 32> buf{};
  std::strftime(buf.data(), buf.size(), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf.data();
}

inline std::string manifest_path_for(const std::string& out) { return out + ".manifest.json"; }

inline std::string summary_path_for(const std::string& out) {
  constexpr std::string_view ext = ".csv";
  if (out.size() > ext.size() && out.compare(out.size() - ext.size(), ext.size(), ext) == 0) {
    return out.substr(0, out.size() - ext.size()) + ".summary.json";
  }
  return out + ".summary.json";
}

// ---------------------------------------------------------------------------
// Manifest

struct OutputRecord {
  std::string file;  // file name, relative to the manifest
  std::string sha256;
};

struct RunManifest {
  std::string tool_version{kToolVersion};
  std::string command;
  json config;
  std::optional<std::uint64_t> master_seed;
  std::string timestamp;
  std::vector<OutputRecord> outputs;

  json to_json() const {
    json outs = json::array();
    for (const auto& o : outputs) outs.push_back({{"file", o.file}, {"sha256", o.sha256}});
    json j;
    j["tool_version"] = tool_version;
    j["command"] = command;
    j["config"] = config;
    j["master_seed"] = master_seed ? json(*master_seed) : json(nullptr);
    j["timestamp"] = timestamp;
    j["outputs"] = std::move(outs);
    return j;
  }
};

/// Writes each (path, contents) output atomically, then the manifest next to
/// the first output.
inline RunManifest write_outputs(RunManifest manifest,
                                 const std::vector<std::pair<std::string, std::string>>& files) {
  manifest.timestamp = utc_timestamp();
  for (const auto& [path, contents] : files) {
    write_file_atomic(path, contents);
    manifest.outputs.push_back(
        {std::filesystem::path(path).filename().string(), sha256_hex(contents)});
  }
  write_file_atomic(manifest_path_for(files.front().first), manifest.to_json().dump(2) + "\n");
  return manifest;
}

// ---------------------------------------------------------------------------
// Config parsing helpers

namespace detail {

inline void check_known_keys(const json& j, std::initializer_list<std::string_view> keys) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (auto k : keys) known = known || item.key() == k;
    if (!known) throw ConfigError(item.key() + ": unknown config field");
  }
}

template <class T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(key) + ": " + e.what());
  }
}

inline std::vector<double> parse_real_list(std::string_view text, std::string_view field) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string item(text.substr(pos, comma - pos));
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(item.c_str(), &end);
    if (item.empty() || end != item.c_str() + item.size() || errno != 0 || !std::isfinite(v)) {
      throw ConfigError(std::string(field) + ": cannot parse '" + item + "' as a number");
    }
    out.push_back(v);
    pos = comma + 1;
  }
  return out;
}

}  // namespace detail

/// "a,b,c" or "a,b,c;a,b,c;..." (one triple per iteration).
inline std::vector<NsCoefficients> parse_coefficients(std::string_view text) {
  std::vector<NsCoefficients> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t semi = std::min(text.find(';', pos), text.size());
    const auto vals = detail::parse_real_list(text.substr(pos, semi - pos), "coeffs");
    if (vals.size() != 3) throw ConfigError("coeffs: each triple needs exactly 3 values a,b,c");
    out.push_back({vals[0], vals[1], vals[2]});
    pos = semi + 1;
  }
  return out;
}

inline std::vector<std::size_t> parse_sizes(std::string_view text) {
  std::vector<std::size_t> out;
  for (double v : detail::parse_real_list(text, "sizes")) {
    if (!(v >= 1.0) || v != std::floor(v)) {
      throw ConfigError("sizes: entries must be positive integers");
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

inline json coefficients_to_json(const std::vector<NsCoefficients>& ks) {
  json arr = json::array();
  for (const auto& k : ks) arr.push_back(json::array({k.a, k.b, k.c}));
  return arr;
}

inline std::vector<NsCoefficients> coefficients_from_json(const json& j) {
  std::vector<NsCoefficients> out;
  try {
    for (const auto& t : j) {
      const auto v = t.get<std::vector<double>>();
      if (v.size() != 3) throw ConfigError("coefficients: each entry must be [a, b, c]");
      out.push_back({v[0], v[1], v[2]});
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("coefficients: ") + e.what());
  }
  if (out.empty()) throw ConfigError("coefficients: must not be empty");
  return out;
}

/// Config files may be either the bare config object or a run manifest, in
/// which case its "config" member is used.
inline json load_config_document(const std::string& path) {
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError("config: " + path + " is not valid JSON: " + e.what());
  }
  if (j.is_object() && j.contains("tool_version") && j.contains("config")) return j.at("config");
  return j;
}

/// Explicit --threads wins, then NS_SPECTRA_THREADS, then the core count.
inline std::size_t resolve_threads(std::optional<long> flag) {
  long value = 0;
  if (flag) {
    value = *flag;
  } else if (const char* env = std::getenv("NS_SPECTRA_THREADS"); env && *env) {
    char* end = nullptr;
    value = std::strtol(env, &end, 10);
    if (*end != '\0') throw ConfigError("NS_SPECTRA_THREADS: not an integer");
  } else {
    value = static_cast<long>(std::max(1u, std::thread::hardware_concurrency()));
  }
  if (value < 1) throw ConfigError("threads: must be >= 1");
  return static_cast<std::size_t>(value);
}

// ---------------------------------------------------------------------------
// mp-density

struct MpDensityCommand {
  double gamma = 1.0;
  double sigma_bar = 1.0;
  std::size_t points = 512;
  std::string out = "mp_density.csv";

  json to_json() const { return {{"gamma", gamma}, {"sigma_bar", sigma_bar}, {"points", points}}; }

  void apply_json(const json& j) {
    detail::check_known_keys(j, {"gamma", "sigma_bar", "points"});
    detail::read_field(j, "gamma", gamma);
    detail::read_field(j, "sigma_bar", sigma_bar);
    detail::read_field(j, "points", points);
  }
};

/// `points` rows, uniform over [0, 1.05 * upper_edge].
inline std::string mp_density_csv(const MpDensityCommand& cmd) {
  if (cmd.points < 2) throw ConfigError("points: must be >= 2");
  const MpParams p(cmd.gamma, cmd.sigma_bar);
  const double span = 1.05 * p.upper_edge();
  std::string csv = "s,rho\n";
  for (std::size_t i = 0; i < cmd.points; ++i) {
    const double s = span * static_cast<double>(i) / static_cast<double>(cmd.points - 1);
    csv += format_real(s) + "," + format_real(mp_density(s, p)) + "\n";
  }
  return csv;
}

inline RunManifest run_mp_density(const MpDensityCommand& cmd) {
  RunManifest m;
  m.command = "mp-density";
  m.config = cmd.to_json();
  return write_outputs(std::move(m), {{cmd.out, mp_density_csv(cmd)}});
}

// ---------------------------------------------------------------------------
// spectrum

struct SpectrumCommand {
  std::size_t in_d = 256;
  std::size_t out_d = 256;
  std::size_t trials = 1;
  std::uint64_t seed = 1;
  int iterations = 5;
  std::vector<NsCoefficients> coefficients{NsCoefficients::muon_default()};
  double threshold = 0.6;
  bool full_trace = false;
  std::string out = "spectrum.csv";
  std::string histogram_out;  // empty: no histogram
  std::size_t bins = 100;
  double hist_max = 1.25;

  json to_json() const {
    return {{"in_d", in_d},           {"out_d", out_d},
            {"trials", trials},       {"seed", seed},
            {"iterations", iterations}, {"coefficients", coefficients_to_json(coefficients)},
            {"threshold", threshold}, {"full_trace", full_trace},
            {"bins", bins},           {"hist_max", hist_max}};
  }

  void apply_json(const json& j) {
    detail::check_known_keys(j, {"in_d", "out_d", "trials", "seed", "iterations", "coefficients",
                                 "threshold", "full_trace", "bins", "hist_max"});
    detail::read_field(j, "in_d", in_d);
    detail::read_field(j, "out_d", out_d);
    detail::read_field(j, "trials", trials);
    detail::read_field(j, "seed", seed);
    detail::read_field(j, "iterations", iterations);
    if (j.contains("coefficients")) coefficients = coefficients_from_json(j.at("coefficients"));
    detail::read_field(j, "threshold", threshold);
    detail::read_field(j, "full_trace", full_trace);
    detail::read_field(j, "bins", bins);
    detail::read_field(j, "hist_max", hist_max);
  }
};

/// Spectra of one trial at the iterations that are written out.
struct SpectrumTrial {
  std::vector<std::pair<int, Spectrum>> spectra;
};

struct SpectrumOutput {
  std::vector<SpectrumTrial> trials;
  std::string csv;
  std::string histogram_csv;
};

inline std::string histogram_csv(const std::vector<SpectrumTrial>& trials, std::size_t bins,
                                 double hist_max) {
  if (bins < 1) throw ConfigError("bins: must be >= 1");
  if (!(hist_max > 0.0)) throw ConfigError("hist_max: must be > 0");
  std::map<int, std::vector<std::size_t>> counts;
  for (const auto& t : trials) {
    for (const auto& [iteration, s] : t.spectra) {
      auto& c = counts[iteration];
      c.resize(bins, 0);
      for (double v : s.values()) {
        // Values at or beyond hist_max land in the last bin.
        const auto b = static_cast<std::size_t>(v / hist_max * static_cast<double>(bins));
        ++c[std::min(b, bins - 1)];
      }
    }
  }
  std::string csv = "iteration,bin_lo,bin_hi,count\n";
  const double width = hist_max / static_cast<double>(bins);
  for (const auto& [iteration, c] : counts) {
    for (std::size_t b = 0; b < bins; ++b) {
      csv += std::to_string(iteration) + "," + format_real(width * static_cast<double>(b)) + "," +
             format_real(width * static_cast<double>(b + 1)) + "," + std::to_string(c[b]) + "\n";
    }
  }
  return csv;
}

/// Wide shapes are transposed; trial t uses derive_trial_seed(seed, 0, t).
inline SpectrumOutput compute_spectrum(const SpectrumCommand& cmd, std::size_t threads = 1) {
  if (cmd.trials < 1) throw ConfigError("trials: must be >= 1");
  if (cmd.iterations < 0) throw ConfigError("iterations: must be >= 0");
  const Shape shape(std::max(cmd.in_d, cmd.out_d), std::min(cmd.in_d, cmd.out_d));
  if (!(cmd.threshold > 0.0 && cmd.threshold < 1.0)) {
    throw ConfigError("threshold: must lie in (0, 1)");
  }
  std::optional<NsSchedule> schedule;
  if (cmd.iterations > 0) schedule.emplace(cmd.coefficients, cmd.iterations);

  SpectrumOutput out;
  out.trials.resize(cmd.trials);
  nsspectra::detail::parallel_for(cmd.trials, threads, [&](std::size_t t) {
    const auto seed = derive_trial_seed(cmd.seed, 0, static_cast<std::uint32_t>(t));
    const DenseMatrix raw = generate(GaussianSpec{shape, 1.0, seed});
    auto& spectra = out.trials[t].spectra;
    if (!schedule) {
      spectra.emplace_back(0, singular_values(normalize_frobenius(raw)));
      return;
    }
    const auto run = ns_run(raw, *schedule, cmd.threshold);
    for (const auto& r : run.trace.records) {
      if (cmd.full_trace || r.iteration == 0 || r.iteration == cmd.iterations) {
        spectra.emplace_back(r.iteration, r.spectrum);
      }
    }
  });

  out.csv = "size,trial,iteration,sval_index,sval\n";
  for (std::size_t t = 0; t < out.trials.size(); ++t) {
    for (const auto& [iteration, s] : out.trials[t].spectra) {
      const std::string prefix =
          std::to_string(shape.in_d()) + "," + std::to_string(t) + "," + std::to_string(iteration) + ",";
      for (std::size_t i = 0; i < s.size(); ++i) {
        out.csv += prefix + std::to_string(i) + "," + format_real(s[i]) + "\n";
      }
    }
  }
  if (!cmd.histogram_out.empty()) out.histogram_csv = histogram_csv(out.trials, cmd.bins, cmd.hist_max);
  return out;
}

inline RunManifest run_spectrum(const SpectrumCommand& cmd, std::size_t threads,
                                SpectrumOutput* result = nullptr) {
  SpectrumOutput out = compute_spectrum(cmd, threads);
  RunManifest m;
  m.command = "spectrum";
  m.config = cmd.to_json();
  m.master_seed = cmd.seed;
  std::vector<std::pair<std::string, std::string>> files{{cmd.out, out.csv}};
  if (!cmd.histogram_out.empty()) files.emplace_back(cmd.histogram_out, out.histogram_csv);
  m = write_outputs(std::move(m), files);
  if (result) *result = std::move(out);
  return m;
}

// ---------------------------------------------------------------------------
// sweep

inline json sweep_config_to_json(const SweepConfig& c) {
  return {{"sizes", c.sizes},
          {"gamma", c.gamma},
          {"trials_per_size", c.trials_per_size},
          {"iterations", c.schedule.iterations()},
          {"coefficients", coefficients_to_json(c.schedule.coefficients())},
          {"tail_threshold", c.tail_threshold},
          {"master_seed", c.master_seed}};
}

/// Overlays the fields present in `j` onto `c`.
inline void apply_sweep_config_json(const json& j, SweepConfig& c) {
  detail::check_known_keys(j, {"sizes", "gamma", "trials_per_size", "iterations", "coefficients",
                               "tail_threshold", "master_seed"});
  detail::read_field(j, "sizes", c.sizes);
  detail::read_field(j, "gamma", c.gamma);
  detail::read_field(j, "trials_per_size", c.trials_per_size);
  detail::read_field(j, "tail_threshold", c.tail_threshold);
  detail::read_field(j, "master_seed", c.master_seed);
  int iterations = c.schedule.iterations();
  auto coefficients = c.schedule.coefficients();
  detail::read_field(j, "iterations", iterations);
  if (j.contains("coefficients")) coefficients = coefficients_from_json(j.at("coefficients"));
  c.schedule = NsSchedule(coefficients, iterations);
}

inline std::string sweep_csv(const SweepResult& r) {
  std::string csv = "size,trial,iteration,tail_fraction,ortho_residual,median_sval,min_sval,max_sval\n";
  for (const auto& c : r.cells) {
    for (std::size_t t = 0; t < c.iterations.size(); ++t) {
      const auto& it = c.iterations[t];
      csv += std::to_string(c.in_d) + "," + std::to_string(c.trial) + "," + std::to_string(t) + "," +
             format_real(it.tail_fraction) + "," + format_real(it.orthogonality_residual) + "," +
             format_real(it.median_sval) + "," + format_real(it.min_sval) + "," +
             format_real(it.max_sval) + "\n";
    }
  }
  return csv;
}

inline json moments_json(const Moments& m) { return {{"mean", m.mean}, {"std", m.stddev}}; }

inline json fit_json(const FitResult& f) {
  return {{"slope", f.slope},
          {"intercept", f.intercept},
          {"r_squared", f.r_squared},
          {"points_used", f.points_used}};
}

inline json sweep_summary(const SweepResult& r) {
  json sizes = json::array();
  for (const auto& a : r.aggregates) {
    json iters = json::array();
    for (std::size_t t = 0; t < a.tail_fraction.size(); ++t) {
      iters.push_back({{"iteration", t},
                       {"tail_fraction", moments_json(a.tail_fraction[t])},
                       {"ortho_residual", moments_json(a.orthogonality_residual[t])}});
    }
    sizes.push_back({{"in_d", a.in_d},
                     {"out_d", a.out_d},
                     {"trials", a.trials},
                     {"pooled_median_sval", a.pooled_median_sval},
                     {"raw_frobenius_norm", moments_json(a.raw_frobenius_norm)},
                     {"median_sval", moments_json(a.median_sval)},
                     {"min_sval", moments_json(a.min_sval)},
                     {"max_sval", moments_json(a.max_sval)},
                     {"iterations", std::move(iters)}});
  }
  json j;
  j["coefficients"] = coefficients_to_json(r.config.schedule.coefficients());
  j["tail_threshold"] = r.config.tail_threshold;
  j["sizes"] = std::move(sizes);
  if (r.aggregates.size() >= 2) {
    const auto points = median_sval_per_size(r);
    const auto fit = fit_power_law(points);
    j["fit"] = fit_json(fit);
    j["slope"] = fit.slope;
    j["intercept"] = fit.intercept;
    j["r_squared"] = fit.r_squared;
  } else {
    j["fit"] = nullptr;
  }
  return j;
}

struct SweepCommand {
  SweepConfig config;
  std::string out = "sweep.csv";
};

inline RunManifest run_sweep_command(const SweepCommand& cmd, std::size_t threads,
                                     SweepResult* result = nullptr) {
  SweepResult r = run_sweep(cmd.config, threads);
  RunManifest m;
  m.command = "sweep";
  m.config = sweep_config_to_json(cmd.config);
  m.master_seed = cmd.config.master_seed;
  m = write_outputs(std::move(m), {{cmd.out, sweep_csv(r)},
                                   {summary_path_for(cmd.out), sweep_summary(r).dump(2) + "\n"}});
  if (result) *result = std::move(r);
  return m;
}

// ---------------------------------------------------------------------------
// min-iters

struct MinItersCommand {
  std::vector<std::size_t> sizes{128, 256, 512, 1024};
  double gamma = 1.0;
  NsCoefficients coefficients = NsCoefficients::muon_default();
  BandSearch search;
  std::uint64_t seed = 1;
  std::string out = "min_iters.json";

  json to_json() const {
    return {{"sizes", sizes},
            {"gamma", gamma},
            {"coefficients", coefficients_to_json({coefficients})},
            {"epsilon", search.epsilon},
            {"quantile", search.quantile},
            {"max_iters", search.max_iterations},
            {"trials", search.trials},
            {"seed", seed}};
  }

  void apply_json(const json& j) {
    detail::check_known_keys(j, {"sizes", "gamma", "coefficients", "epsilon", "quantile",
                                 "max_iters", "trials", "seed"});
    detail::read_field(j, "sizes", sizes);
    detail::read_field(j, "gamma", gamma);
    if (j.contains("coefficients")) {
      const auto ks = coefficients_from_json(j.at("coefficients"));
      if (ks.size() != 1) throw ConfigError("coefficients: min-iters takes a single triple");
      coefficients = ks.front();
    }
    detail::read_field(j, "epsilon", search.epsilon);
    detail::read_field(j, "quantile", search.quantile);
    detail::read_field(j, "max_iters", search.max_iterations);
    detail::read_field(j, "trials", search.trials);
    detail::read_field(j, "seed", seed);
  }
};

/// [{"in_d": n, "min_iterations": t | "saturated"}, ...]
inline json compute_min_iters(const MinItersCommand& cmd, std::size_t threads = 1) {
  cmd.search.validate();
  if (cmd.sizes.empty()) throw ConfigError("sizes: must not be empty");
  if (!(cmd.gamma > 0.0 && cmd.gamma <= 1.0)) throw ConfigError("gamma: must lie in (0, 1]");
  std::vector<std::optional<int>> found(cmd.sizes.size());
  nsspectra::detail::parallel_for(cmd.sizes.size(), threads, [&](std::size_t i) {
    const std::size_t in_d = cmd.sizes[i];
    const auto out_d = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(cmd.gamma * static_cast<double>(in_d))));
    found[i] = min_iterations_for_band(Shape(in_d, out_d), cmd.coefficients, cmd.search, cmd.seed);
  });
  json arr = json::array();
  for (std::size_t i = 0; i < cmd.sizes.size(); ++i) {
    arr.push_back({{"in_d", cmd.sizes[i]},
                   {"min_iterations", found[i] ? json(*found[i]) : json("saturated")}});
  }
  return arr;
}

inline RunManifest run_min_iters(const MinItersCommand& cmd, std::size_t threads,
                                 json* result_out = nullptr) {
  const json result = compute_min_iters(cmd, threads);
  RunManifest m;
  m.command = "min-iters";
  m.config = cmd.to_json();
  m.master_seed = cmd.seed;
  m = write_outputs(std::move(m), {{cmd.out, result.dump(2) + "\n"}});
  if (result_out) *result_out = result;
  return m;
}

// ---------------------------------------------------------------------------
// fit

struct FitCommand {
  std::string in;
  std::string x = "size";
  std::string y = "median_sval";
  std::optional<int> iteration = 0;  // rows filtered on the iteration column when present
  std::string out;                   // empty: stdout only

  json to_json() const {
    return {{"in", in},
            {"x", x},
            {"y", y},
            {"iteration", iteration ? json(*iteration) : json(nullptr)}};
  }
};

/// Groups rows by the x column, averages y within each group and fits a power
/// law through the group means.
inline json compute_fit(const FitCommand& cmd) {
  const std::string text = read_file(cmd.in);
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("fit: " + cmd.in + " is empty");
  std::vector<std::string> header;
  {
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) header.push_back(cell);
  }
  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    return std::nullopt;
  };
  const auto xi = column(cmd.x);
  const auto yi = column(cmd.y);
  if (!xi) throw ConfigError("x: column '" + cmd.x + "' not found in " + cmd.in);
  if (!yi) throw ConfigError("y: column '" + cmd.y + "' not found in " + cmd.in);
  const auto iter_col = column("iteration");

  std::map<double, std::pair<double, std::size_t>> groups;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = detail::parse_real_list(line, "fit: row " + std::to_string(row));
    if (cells.size() != header.size()) {
      throw ConfigError("fit: row " + std::to_string(row) + " has the wrong number of fields");
    }
    if (cmd.iteration && iter_col && cells[*iter_col] != static_cast<double>(*cmd.iteration)) {
      continue;
    }
    auto& g = groups[cells[*xi]];
    g.first += cells[*yi];
    g.second += 1;
  }
  std::vector<PowerLawPoint> points;
  for (const auto& [x, g] : groups) points.push_back({x, g.first / static_cast<double>(g.second)});
  const FitResult fit = fit_power_law(points);
  json pts = json::array();
  for (const auto& p : points) pts.push_back({{"x", p.x}, {"y", p.y}});
  json j = fit_json(fit);
  j["x"] = cmd.x;
  j["y"] = cmd.y;
  j["points"] = std::move(pts);
  return j;
}

inline RunManifest run_fit(const FitCommand& cmd) {
  const json result = compute_fit(cmd);
  RunManifest m;
  m.command = "fit";
  m.config = cmd.to_json();
  return write_outputs(std::move(m), {{cmd.out, result.dump(2) + "\n"}});
}

}  // namespace nsspectra::cli
