// ns_spectra: batch experiments on Newton-Schulz orthogonalization and the
// singular-value spectra of random matrices.
//
// Exit codes: 0 success, 2 usage/config error, 3 I/O error, 4 numeric failure.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "nsspectra/cli_io.hpp"

namespace {

using namespace nsspectra;
using namespace nsspectra::cli;

constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;

struct Common {
  std::string config;
  std::optional<long> threads;
};

void add_common(CLI::App* sub, Common& common, std::string& out) {
  sub->add_option("--out", out, "Output path (a .manifest.json is written next to it)");
  sub->add_option("--config", common.config, "JSON config file or run manifest; flags override it")
      ->check(CLI::ExistingFile);
  sub->add_option("--threads", common.threads,
                  "Worker threads (fallback: NS_SPECTRA_THREADS, then core count)");
}

bool given(const CLI::App* sub, const char* name) { return sub->count(name) > 0; }

void print_manifest(const RunManifest& m) {
  for (const auto& o : m.outputs) std::cout << "wrote " << o.file << "  sha256=" << o.sha256 << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Newton-Schulz orthogonalization and singular-value scaling experiments"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  // mp-density
  MpDensityCommand mp;
  Common mp_common;
  auto* mp_cmd = app.add_subcommand("mp-density", "Tabulate the Marchenko-Pastur singular-value density");
  mp_cmd->add_option("--gamma", mp.gamma, "Aspect ratio out_d/in_d in (0, 1]");
  mp_cmd->add_option("--sigma-bar", mp.sigma_bar, "Scale of the law");
  mp_cmd->add_option("--points", mp.points, "Number of rows (>= 2)");
  add_common(mp_cmd, mp_common, mp.out);

  // spectrum
  SpectrumCommand sp;
  Common sp_common;
  std::string sp_coeffs;
  auto* sp_cmd = app.add_subcommand("spectrum", "Singular values before and after Newton-Schulz");
  sp_cmd->add_option("--in-d", sp.in_d, "Rows");
  sp_cmd->add_option("--out-d", sp.out_d, "Columns");
  sp_cmd->add_option("--trials", sp.trials, "Independent matrices");
  sp_cmd->add_option("--seed", sp.seed, "Master seed");
  sp_cmd->add_option("--iters", sp.iterations, "Newton-Schulz iterations (0: input spectrum only)");
  sp_cmd->add_option("--coeffs", sp_coeffs, "a,b,c or a,b,c;a,b,c;... per iteration");
  sp_cmd->add_option("--threshold", sp.threshold, "Tail threshold reported on stdout");
  sp_cmd->add_flag("--full-trace", sp.full_trace, "Emit every intermediate iteration");
  sp_cmd->add_option("--histogram", sp.histogram_out, "Also write a binned histogram CSV here");
  sp_cmd->add_option("--bins", sp.bins, "Histogram bins");
  sp_cmd->add_option("--hist-max", sp.hist_max, "Histogram upper edge");
  add_common(sp_cmd, sp_common, sp.out);

  // sweep
  SweepCommand sw;
  Common sw_common;
  std::string sw_sizes, sw_coeffs;
  int sw_iters = 5;
  auto* sw_cmd = app.add_subcommand("sweep", "Size sweep with tail fractions and a power-law fit");
  sw_cmd->add_option("--sizes", sw_sizes, "Comma-separated in_d values, strictly increasing, >= 8");
  sw_cmd->add_option("--gamma", sw.config.gamma, "out_d = round(gamma * in_d)");
  sw_cmd->add_option("--trials", sw.config.trials_per_size, "Trials per size");
  sw_cmd->add_option("--iters", sw_iters, "Newton-Schulz iterations");
  sw_cmd->add_option("--coeffs", sw_coeffs, "a,b,c or a,b,c;a,b,c;... per iteration");
  sw_cmd->add_option("--threshold", sw.config.tail_threshold, "Tail threshold");
  sw_cmd->add_option("--seed", sw.config.master_seed, "Master seed");
  add_common(sw_cmd, sw_common, sw.out);

  // min-iters
  MinItersCommand mi;
  Common mi_common;
  std::string mi_sizes, mi_coeffs;
  auto* mi_cmd = app.add_subcommand("min-iters", "Smallest iteration count reaching the band");
  mi_cmd->add_option("--sizes", mi_sizes, "Comma-separated in_d values");
  mi_cmd->add_option("--gamma", mi.gamma, "out_d = round(gamma * in_d)");
  mi_cmd->add_option("--coeffs", mi_coeffs, "a,b,c");
  mi_cmd->add_option("--epsilon", mi.search.epsilon, "Band half-width around 1");
  mi_cmd->add_option("--quantile", mi.search.quantile, "Required share of values in the band");
  mi_cmd->add_option("--max-iters", mi.search.max_iterations, "Give up after this many steps");
  mi_cmd->add_option("--trials", mi.search.trials, "Matrices averaged per size");
  mi_cmd->add_option("--seed", mi.seed, "Master seed");
  add_common(mi_cmd, mi_common, mi.out);

  // fit
  FitCommand fit;
  int fit_iteration = 0;
  bool fit_all_rows = false;
  auto* fit_cmd = app.add_subcommand("fit", "Power-law fit over two columns of a sweep CSV");
  fit_cmd->add_option("--in", fit.in, "Input CSV")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--x", fit.x, "Column used as x");
  fit_cmd->add_option("--y", fit.y, "Column used as y (averaged per distinct x)");
  fit_cmd->add_option("--iteration", fit_iteration, "Keep rows with this iteration value");
  fit_cmd->add_flag("--all-rows", fit_all_rows, "Do not filter on the iteration column");
  fit_cmd->add_option("--out", fit.out, "Output JSON (default: stdout only)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (mp_cmd->parsed()) {
      if (!mp_common.config.empty()) {
        MpDensityCommand base;
        base.out = mp.out;
        base.apply_json(load_config_document(mp_common.config));
        if (given(mp_cmd, "--gamma")) base.gamma = mp.gamma;
        if (given(mp_cmd, "--sigma-bar")) base.sigma_bar = mp.sigma_bar;
        if (given(mp_cmd, "--points")) base.points = mp.points;
        mp = base;
      }
      print_manifest(run_mp_density(mp));
    } else if (sp_cmd->parsed()) {
      if (!sp_common.config.empty()) {
        SpectrumCommand base;
        base.out = sp.out;
        base.histogram_out = sp.histogram_out;
        base.apply_json(load_config_document(sp_common.config));
        if (given(sp_cmd, "--in-d")) base.in_d = sp.in_d;
        if (given(sp_cmd, "--out-d")) base.out_d = sp.out_d;
        if (given(sp_cmd, "--trials")) base.trials = sp.trials;
        if (given(sp_cmd, "--seed")) base.seed = sp.seed;
        if (given(sp_cmd, "--iters")) base.iterations = sp.iterations;
        if (given(sp_cmd, "--threshold")) base.threshold = sp.threshold;
        if (given(sp_cmd, "--full-trace")) base.full_trace = sp.full_trace;
        if (given(sp_cmd, "--bins")) base.bins = sp.bins;
        if (given(sp_cmd, "--hist-max")) base.hist_max = sp.hist_max;
        sp = base;
      }
      if (!sp_coeffs.empty()) sp.coefficients = parse_coefficients(sp_coeffs);
      SpectrumOutput out;
      const auto manifest = run_spectrum(sp, resolve_threads(sp_common.threads), &out);
      for (std::size_t t = 0; t < out.trials.size(); ++t) {
        const auto& spectra = out.trials[t].spectra;
        std::printf("trial %zu: fraction below %.3g  initial %.6f  final %.6f\n", t, sp.threshold,
                    spectra.front().second.fraction_below(sp.threshold),
                    spectra.back().second.fraction_below(sp.threshold));
      }
      print_manifest(manifest);
    } else if (sw_cmd->parsed()) {
      SweepConfig cfg;
      if (!sw_common.config.empty()) {
        apply_sweep_config_json(load_config_document(sw_common.config), cfg);
      }
      if (given(sw_cmd, "--sizes")) cfg.sizes = parse_sizes(sw_sizes);
      if (given(sw_cmd, "--gamma")) cfg.gamma = sw.config.gamma;
      if (given(sw_cmd, "--trials")) cfg.trials_per_size = sw.config.trials_per_size;
      if (given(sw_cmd, "--threshold")) cfg.tail_threshold = sw.config.tail_threshold;
      if (given(sw_cmd, "--seed")) cfg.master_seed = sw.config.master_seed;
      if (given(sw_cmd, "--iters") || given(sw_cmd, "--coeffs")) {
        const int iters = given(sw_cmd, "--iters") ? sw_iters : cfg.schedule.iterations();
        auto coeffs = given(sw_cmd, "--coeffs") ? parse_coefficients(sw_coeffs)
                                                : cfg.schedule.coefficients();
        cfg.schedule = NsSchedule(std::move(coeffs), iters);
      }
      cfg.validate();
      sw.config = cfg;
      SweepResult result;
      const auto manifest = run_sweep_command(sw, resolve_threads(sw_common.threads), &result);
      if (result.aggregates.size() >= 2) {
        const auto f = fit_power_law(median_sval_per_size(result));
        std::printf("median singular value ~ in_d^%.4f  (r^2 = %.5f)\n", f.slope, f.r_squared);
      }
      print_manifest(manifest);
    } else if (mi_cmd->parsed()) {
      if (!mi_common.config.empty()) {
        MinItersCommand base;
        base.out = mi.out;
        base.apply_json(load_config_document(mi_common.config));
        if (given(mi_cmd, "--gamma")) base.gamma = mi.gamma;
        if (given(mi_cmd, "--epsilon")) base.search.epsilon = mi.search.epsilon;
        if (given(mi_cmd, "--quantile")) base.search.quantile = mi.search.quantile;
        if (given(mi_cmd, "--max-iters")) base.search.max_iterations = mi.search.max_iterations;
        if (given(mi_cmd, "--trials")) base.search.trials = mi.search.trials;
        if (given(mi_cmd, "--seed")) base.seed = mi.seed;
        mi = base;
      }
      if (!mi_sizes.empty()) mi.sizes = parse_sizes(mi_sizes);
      if (!mi_coeffs.empty()) {
        const auto ks = parse_coefficients(mi_coeffs);
        if (ks.size() != 1) throw ConfigError("coeffs: min-iters takes a single triple");
        mi.coefficients = ks.front();
      }
      json result;
      const auto manifest = run_min_iters(mi, resolve_threads(mi_common.threads), &result);
      std::cout << result.dump(2) << "\n";
      print_manifest(manifest);
    } else if (fit_cmd->parsed()) {
      if (fit_all_rows) {
        fit.iteration.reset();
      } else {
        fit.iteration = fit_iteration;
      }
      if (fit.out.empty()) {
        std::cout << compute_fit(fit).dump(2) << "\n";
      } else {
        print_manifest(run_fit(fit));
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DimensionError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  }
  return 0;
}
