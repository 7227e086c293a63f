#include "nsspectra/cli_io.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace {

using namespace nsspectra;
using namespace nsspectra::cli;
namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() /
           (std::string("nsspectra_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // Runs the command-line tool; returns its exit status.
  int run_tool(const std::string& args, const std::string& env = "") const {
    const std::string cmd = env + " '" + std::string(NS_SPECTRA_BIN) + "' " + args + " > '" +
                            path("stdout.txt") + "' 2> '" + path("stderr.txt") + "'";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string stderr_text() const { return read_file(path("stderr.txt")); }

  fs::path dir_;
};

std::size_t count_lines(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

json without_timestamp(json manifest) {
  manifest.erase("timestamp");
  return manifest;
}

TEST(FormatReal, RoundTripsExactly) {
  for (double x : {0.0, 0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.7121200816580746}) {
    const std::string s = format_real(x);
    double back = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), back);
    EXPECT_EQ(back, x) << s;
  }
  EXPECT_EQ(format_real(0.5), "0.5");
}

TEST(Sha256, KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Paths, ManifestAndSummaryNames) {
  EXPECT_EQ(manifest_path_for("out/a.csv"), "out/a.csv.manifest.json");
  EXPECT_EQ(summary_path_for("out/a.csv"), "out/a.summary.json");
  EXPECT_EQ(summary_path_for("result"), "result.summary.json");
}

TEST(ParseLists, CoefficientsAndSizes) {
  const auto ks = parse_coefficients("3.4445,-4.775,2.0315;1,0,0");
  ASSERT_EQ(ks.size(), 2u);
  EXPECT_EQ(ks[0], NsCoefficients::muon_default());
  EXPECT_EQ(ks[1], NsCoefficients::identity());
  EXPECT_THROW(parse_coefficients("1,2"), ConfigError);
  EXPECT_THROW(parse_coefficients("1,2,x"), ConfigError);
  EXPECT_EQ(parse_sizes("64,128"), (std::vector<std::size_t>{64, 128}));
  EXPECT_THROW(parse_sizes("64,12.5"), ConfigError);
  EXPECT_THROW(parse_sizes(""), ConfigError);
}

TEST(MpDensityCsv, RowsAndMass) {
  MpDensityCommand cmd;
  cmd.points = 2;
  const std::string two = mp_density_csv(cmd);
  EXPECT_EQ(count_lines(two), 3u);
  EXPECT_EQ(two.substr(0, two.find('\n', 6) + 1), "s,rho\n0," + format_real(1.0 / std::numbers::pi) + "\n");
  cmd.points = 1;
  EXPECT_THROW(mp_density_csv(cmd), ConfigError);

  // Trapezoid rule over the table recovers the mass of the tabulated expression.
  cmd.points = 20001;
  std::istringstream is(mp_density_csv(cmd));
  std::string line;
  std::getline(is, line);
  double prev_s = 0.0, prev_r = 0.0, area = 0.0;
  bool first = true;
  while (std::getline(is, line)) {
    const double s = std::stod(line.substr(0, line.find(',')));
    const double r = std::stod(line.substr(line.find(',') + 1));
    if (!first) area += 0.5 * (s - prev_s) * (r + prev_r);
    prev_s = s;
    prev_r = r;
    first = false;
  }
  EXPECT_NEAR(area, mp_mass(MpParams(1.0)), 1e-3);
}

TEST(SpectrumCommand, RowCounts) {
  SpectrumCommand cmd;
  cmd.in_d = 32;
  cmd.out_d = 16;
  cmd.trials = 2;
  cmd.iterations = 3;
  EXPECT_EQ(count_lines(compute_spectrum(cmd).csv), 1u + 2 * 2 * 16);
  cmd.full_trace = true;
  EXPECT_EQ(count_lines(compute_spectrum(cmd).csv), 1u + 2 * 4 * 16);
  cmd.iterations = 0;
  EXPECT_EQ(count_lines(compute_spectrum(cmd).csv), 1u + 2 * 1 * 16);
  cmd.iterations = -1;
  EXPECT_THROW(compute_spectrum(cmd), ConfigError);
}

TEST(SpectrumCommand, WideShapeIsTransposedAndThreadsDoNotMatter) {
  SpectrumCommand tall;
  tall.in_d = 40;
  tall.out_d = 24;
  tall.trials = 3;
  SpectrumCommand wide = tall;
  std::swap(wide.in_d, wide.out_d);
  const auto a = compute_spectrum(tall, 1);
  EXPECT_EQ(a.csv, compute_spectrum(wide, 1).csv);
  EXPECT_EQ(a.csv, compute_spectrum(tall, 3).csv);
}

TEST(SpectrumCommand, HistogramCountsEveryValue) {
  SpectrumCommand cmd;
  cmd.in_d = 30;
  cmd.out_d = 20;
  cmd.trials = 2;
  cmd.bins = 10;
  cmd.hist_max = 0.5;  // final values mostly overflow into the last bin
  cmd.histogram_out = "unused";
  const auto out = compute_spectrum(cmd);
  std::istringstream is(out.histogram_csv);
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "iteration,bin_lo,bin_hi,count");
  std::map<int, std::size_t> totals;
  while (std::getline(is, line)) {
    totals[std::stoi(line)] += std::stoul(line.substr(line.rfind(',') + 1));
  }
  ASSERT_EQ(totals.size(), 2u);
  EXPECT_EQ(totals[0], 40u);
  EXPECT_EQ(totals[5], 40u);
}

TEST(SweepJson, ConfigRoundTripAndUnknownKeys) {
  SweepConfig c;
  c.sizes = {8, 16};
  c.gamma = 0.5;
  c.trials_per_size = 3;
  c.schedule = NsSchedule({{1, 0, 0}, {2, -1, 0}}, 2);
  c.master_seed = 99;
  SweepConfig back;
  apply_sweep_config_json(sweep_config_to_json(c), back);
  EXPECT_EQ(back.sizes, c.sizes);
  EXPECT_EQ(back.gamma, c.gamma);
  EXPECT_EQ(back.trials_per_size, c.trials_per_size);
  EXPECT_TRUE(back.schedule == c.schedule);
  EXPECT_EQ(back.master_seed, c.master_seed);

  try {
    apply_sweep_config_json(json{{"sizes", {8}}, {"bogus", 1}}, back);
    ADD_FAILURE();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("bogus"), std::string::npos);
  }
  try {
    apply_sweep_config_json(json{{"gamma", "wide"}}, back);
    ADD_FAILURE();
  } catch (const ConfigError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("gamma", 0), 0u);
  }
}

TEST_F(CliTest, SweepOutputsAreReproducibleFromTheManifest) {
  SweepCommand cmd;
  cmd.config.sizes = {16, 32};
  cmd.config.trials_per_size = 2;
  cmd.out = path("first/sweep.csv");
  SweepResult result;
  const RunManifest m = run_sweep_command(cmd, 2, &result);
  ASSERT_EQ(m.outputs.size(), 2u);
  EXPECT_EQ(m.outputs[0].file, "sweep.csv");
  EXPECT_EQ(m.outputs[0].sha256, sha256_hex(read_file(cmd.out)));
  EXPECT_EQ(m.outputs[1].sha256, sha256_hex(read_file(path("first/sweep.summary.json"))));
  EXPECT_EQ(count_lines(read_file(cmd.out)), 1u + 2 * 2 * 6);

  SweepCommand again;
  apply_sweep_config_json(load_config_document(manifest_path_for(cmd.out)), again.config);
  again.out = path("second/sweep.csv");
  const RunManifest m2 = run_sweep_command(again, 1);
  EXPECT_EQ(m2.outputs[0].sha256, m.outputs[0].sha256);
  EXPECT_EQ(m2.outputs[1].sha256, m.outputs[1].sha256);
  EXPECT_EQ(without_timestamp(m2.to_json()), without_timestamp(m.to_json()));

  const json summary = json::parse(read_file(path("first/sweep.summary.json")));
  EXPECT_EQ(summary["sizes"].size(), 2u);
  EXPECT_DOUBLE_EQ(summary["slope"].get<double>(), summary["fit"]["slope"].get<double>());
}

TEST_F(CliTest, FitReadsSweepCsv) {
  SweepCommand cmd;
  cmd.config.sizes = {16, 64, 256};
  cmd.config.trials_per_size = 2;
  cmd.config.schedule = NsSchedule(NsCoefficients::muon_default(), 1);
  cmd.out = path("sweep.csv");
  run_sweep_command(cmd, 1);
  FitCommand fit;
  fit.in = cmd.out;
  const json j = compute_fit(fit);
  EXPECT_EQ(j["points"].size(), 3u);
  EXPECT_NEAR(j["slope"].get<double>(), -0.5, 0.05);
  fit.y = "nope";
  EXPECT_THROW(compute_fit(fit), ConfigError);
}

TEST_F(CliTest, MinItersJson) {
  MinItersCommand cmd;
  cmd.sizes = {32, 64};
  cmd.search.max_iterations = 2;
  cmd.search.epsilon = 0.05;
  const json j = compute_min_iters(cmd, 2);
  ASSERT_EQ(j.size(), 2u);
  EXPECT_EQ(j[0]["in_d"], 32);
  EXPECT_EQ(j[0]["min_iterations"], "saturated");
  cmd.search.epsilon = 0.35;
  cmd.search.max_iterations = 30;
  EXPECT_TRUE(compute_min_iters(cmd)[1]["min_iterations"].is_number_integer());
}

TEST_F(CliTest, AtomicWriteFailsUnderAFile) {
  write_file_atomic(path("blocker"), "x");
  EXPECT_THROW(write_file_atomic(path("blocker/child.csv"), "y"), IoError);
  EXPECT_THROW(read_file(path("missing.csv")), IoError);
  write_file_atomic(path("ok.csv"), "z");
  EXPECT_EQ(read_file(path("ok.csv")), "z");
  EXPECT_FALSE(fs::exists(path("ok.csv.tmp")));
}

TEST(ResolveThreads, FlagThenEnvironment) {
  EXPECT_EQ(resolve_threads(3), 3u);
  EXPECT_THROW(resolve_threads(0), ConfigError);
  ::setenv("NS_SPECTRA_THREADS", "5", 1);
  EXPECT_EQ(resolve_threads(std::nullopt), 5u);
  EXPECT_EQ(resolve_threads(2), 2u);
  ::setenv("NS_SPECTRA_THREADS", "five", 1);
  EXPECT_THROW(resolve_threads(std::nullopt), ConfigError);
  ::unsetenv("NS_SPECTRA_THREADS");
  EXPECT_GE(resolve_threads(std::nullopt), 1u);
}

TEST_F(CliTest, ToolExitCodes) {
  EXPECT_EQ(run_tool("mp-density --points 5 --out " + path("mp.csv")), 0);
  EXPECT_EQ(count_lines(read_file(path("mp.csv"))), 6u);
  EXPECT_TRUE(fs::exists(path("mp.csv.manifest.json")));

  EXPECT_EQ(run_tool("mp-density --gamma 2 --out " + path("bad.csv")), 2);
  EXPECT_NE(stderr_text().find("gamma"), std::string::npos);
  EXPECT_EQ(run_tool("mp-density --no-such-flag"), 2);
  EXPECT_EQ(run_tool("sweep --sizes 32,16 --out " + path("s.csv")), 2);
  EXPECT_NE(stderr_text().find("sizes"), std::string::npos);

  write_file_atomic(path("config.json"), R"({"sizes": [16], "bogus": true})");
  EXPECT_EQ(run_tool("sweep --config " + path("config.json") + " --out " + path("s.csv")), 2);
  EXPECT_NE(stderr_text().find("bogus"), std::string::npos);

  write_file_atomic(path("blocker"), "x");
  EXPECT_EQ(run_tool("mp-density --out " + path("blocker/mp.csv")), 3);

  EXPECT_EQ(run_tool("spectrum --in-d 16 --out-d 16 --iters 3 --coeffs 1e300,0,0 --out " +
                     path("sp.csv")),
            4);

  EXPECT_EQ(run_tool("mp-density --out " + path("mp2.csv"), "NS_SPECTRA_THREADS=0"), 0);
  EXPECT_EQ(run_tool("sweep --sizes 16 --trials 1 --out " + path("t.csv"), "NS_SPECTRA_THREADS=0"), 2);
}

TEST_F(CliTest, ToolSweepIsIdenticalAcrossThreadCounts) {
  const std::string args = "sweep --sizes 16,32,48 --trials 3 --iters 4 --seed 7 ";
  ASSERT_EQ(run_tool(args + "--threads 1 --out " + path("a/s.csv")), 0);
  ASSERT_EQ(run_tool(args + "--threads 8 --out " + path("b/s.csv")), 0);
  EXPECT_EQ(read_file(path("a/s.csv")), read_file(path("b/s.csv")));
  EXPECT_EQ(read_file(path("a/s.summary.json")), read_file(path("b/s.summary.json")));
  const json ma = json::parse(read_file(path("a/s.csv.manifest.json")));
  const json mb = json::parse(read_file(path("b/s.csv.manifest.json")));
  EXPECT_EQ(without_timestamp(ma), without_timestamp(mb));

  // The manifest doubles as a config.
  ASSERT_EQ(run_tool("sweep --config " + path("a/s.csv.manifest.json") + " --out " + path("c/s.csv")), 0);
  EXPECT_EQ(read_file(path("a/s.csv")), read_file(path("c/s.csv")));
}

TEST_F(CliTest, ToolFitAndMinIters) {
  ASSERT_EQ(run_tool("sweep --sizes 16,64,256 --trials 2 --iters 1 --out " + path("s.csv")), 0);
  ASSERT_EQ(run_tool("fit --in " + path("s.csv") + " --out " + path("fit.json")), 0);
  const json fit = json::parse(read_file(path("fit.json")));
  EXPECT_NEAR(fit["slope"].get<double>(), -0.5, 0.05);
  ASSERT_EQ(run_tool("min-iters --sizes 32 --trials 1 --out " + path("mi.json")), 0);
  EXPECT_TRUE(json::parse(read_file(path("mi.json")))[0]["min_iterations"].is_number_integer());
}

}  // namespace
