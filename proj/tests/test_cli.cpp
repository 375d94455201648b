#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "fsdp/commands.hpp"
#include "fsdp/common.hpp"
#include "fsdp/scenario.hpp"
#include "fsdp/synthetic.hpp"
#include "fsdp/track_builders.hpp"

namespace fsdp {
namespace {

namespace fs = std::filesystem;

const fs::path kNominal = fs::path(FSDP_DATA_DIR) / "scenarios" / "nominal.yaml";

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fsdp_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cells.push_back(c);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

std::string config_error(const std::string& yaml) {
  const fs::path dir = fs::path(FSDP_DATA_DIR) / "scenarios";
  try {
    parse_scenario(yaml, dir / "inline.yaml");
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
    return e.what();
  }
  return {};
}

TEST(Scenario, NominalLoads) {
  const ScenarioConfig sc = load_scenario(kNominal);
  EXPECT_EQ(sc.episode.s_max, 0.5);
  EXPECT_EQ(sc.setup.planner.mpc.N, 20);
  EXPECT_EQ(sc.setup.fit.num_inducing, 40);
  EXPECT_EQ(sc.setup.selection.n_target, 400u);
  EXPECT_TRUE(fs::is_regular_file(sc.track));
  const Raceline track = Raceline::load(sc.track);
  EXPECT_TRUE(track.closed());
  EXPECT_NEAR(track.length(), make_oval_chicane().length(), 1e-9);
}

TEST(Scenario, ErrorsCarryLineAndColumn) {
  std::string e = config_error("track: ../oval_chicane.csv\nepisode:\n  speed_scaler: 1.5\n");
  EXPECT_NE(e.find("inline.yaml:3:17"), std::string::npos) << e;
  EXPECT_NE(e.find("speed_scaler"), std::string::npos) << e;
  e = config_error("track: ../oval_chicane.csv\nmpc:\n  N: 20\n  Nn: 3\n");
  EXPECT_NE(e.find("inline.yaml:4:3"), std::string::npos) << e;
  EXPECT_NE(e.find("unknown key 'Nn'"), std::string::npos) << e;
  e = config_error("track: ../oval_chicane.csv\nsgp:\n  iters: many\n");
  EXPECT_NE(e.find("inline.yaml:3:10"), std::string::npos) << e;
  e = config_error("track: missing.csv\n");
  EXPECT_NE(e.find("inline.yaml:1:8"), std::string::npos) << e;
  e = config_error("episode:\n  dt: 0.01\n");
  EXPECT_NE(e.find("missing required key 'track'"), std::string::npos) << e;
  e = config_error("track: ../oval_chicane.csv\nepisode:\n  planner_hz: 30\n");
  EXPECT_NE(e.find("inline.yaml:3:3"), std::string::npos) << e;
  e = config_error("track: [unclosed\n");
  EXPECT_NE(e.find("inline.yaml:"), std::string::npos) << e;
  e = config_error("track: ../oval_chicane.csv\nmpc:\n  u_min: [8, -0.4]\n");
  EXPECT_NE(e.find("inline.yaml:3:3"), std::string::npos) << e;
}

TEST(Commands, ValidateConfigExitCodes) {
  std::ostringstream msg;
  CommandOptions opt;
  opt.scenario = kNominal;
  EXPECT_EQ(cmd_validate_config(opt, msg), kExitOk);
  opt.scenario = "/nonexistent/scenario.yaml";
  EXPECT_EQ(cmd_validate_config(opt, msg), kExitConfig);
}

TEST(Commands, SmokeRunWritesArtifactsAndAggregates) {
  const fs::path out = scratch("run");
  CommandOptions opt;
  opt.scenario = kNominal;
  opt.out = out;
  opt.seeds = 2;
  std::ostringstream msg;
  ASSERT_EQ(cmd_run(opt, msg), kExitOk) << msg.str();
  std::set<std::string> files;
  for (const auto& f : fs::directory_iterator(out)) files.insert(f.path().filename().string());
  EXPECT_EQ(files, (std::set<std::string>{"episodes.jsonl", "metrics.csv", "aggregate.csv"}));

  // Aggregate means recomputed from the per-episode rows.
  const auto m = read_csv(out / "metrics.csv");
  const auto a = read_csv(out / "aggregate.csv");
  ASSERT_EQ(m.size(), 3u);
  ASSERT_EQ(a.size(), 2u);
  auto col = [](const std::vector<std::string>& header, const std::string& name) {
    return static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
  };
  int ot = 0;
  double l = 0.0, T = 0.0, jerk = 0.0, steer = 0.0;
  for (std::size_t i = 1; i < m.size(); ++i) {
    if (m[i][col(m[0], "outcome")] != "overtake") continue;
    ++ot;
    l += std::stod(m[i][col(m[0], "l_m")]);
    T += std::stod(m[i][col(m[0], "T_s")]);
    jerk += std::stod(m[i][col(m[0], "jerk_avg_m_per_s3")]);
    steer += std::stod(m[i][col(m[0], "steer_rate_avg_rad_per_s")]);
  }
  ASSERT_GT(ot, 0);
  EXPECT_EQ(std::stoi(a[1][col(a[0], "overtakes")]), ot);
  EXPECT_NEAR(std::stod(a[1][col(a[0], "l_mean_m")]), l / ot, 1e-6 * (1.0 + l / ot));
  EXPECT_NEAR(std::stod(a[1][col(a[0], "T_mean_s")]), T / ot, 1e-6 * (1.0 + T / ot));
  EXPECT_NEAR(std::stod(a[1][col(a[0], "jerk_mean_m_per_s3")]), jerk / ot, 1e-6 * (1.0 + jerk / ot));
  EXPECT_NEAR(std::stod(a[1][col(a[0], "steer_rate_mean_rad_per_s")]), steer / ot, 1e-6 * (1.0 + steer / ot));

  // Every log line is tagged with its episode.
  std::istringstream logs(slurp(out / "episodes.jsonl"));
  std::string line;
  int ends = 0;
  while (std::getline(logs, line)) {
    ASSERT_EQ(line.rfind("{\"episode\":", 0), 0u);
    if (line.find("\"event\":\"end\"") != std::string::npos) ++ends;
  }
  EXPECT_EQ(ends, 2);
}

TEST(Commands, RepeatedRunsGiveIdenticalMetrics) {
  CommandOptions opt;
  opt.scenario = kNominal;
  opt.seeds = 2;
  std::ostringstream msg;
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  opt.out = a;
  ASSERT_EQ(cmd_run(opt, msg), kExitOk);
  opt.out = b;
  ASSERT_EQ(cmd_run(opt, msg), kExitOk);
  const std::string ma = slurp(a / "metrics.csv");
  EXPECT_FALSE(ma.empty());
  EXPECT_EQ(ma, slurp(b / "metrics.csv"));
  // Idempotent in the same directory.
  ASSERT_EQ(cmd_run(opt, msg), kExitOk);
  EXPECT_EQ(ma, slurp(b / "metrics.csv"));
}

TEST(Commands, SweepRejectsBadScalers) {
  CommandOptions opt;
  opt.scenario = kNominal;
  opt.out = scratch("sweep_bad");
  std::ostringstream msg;
  EXPECT_EQ(cmd_sweep(opt, msg), kExitConfig);
  opt.smax = {0.3, 1.4};
  EXPECT_EQ(cmd_sweep(opt, msg), kExitConfig);
}

TEST(Commands, SweepStationaryRowIsAllOvertakes) {
  CommandOptions opt;
  opt.scenario = kNominal;
  opt.out = scratch("sweep");
  opt.seeds = 3;
  opt.smax = {0.0};
  std::ostringstream msg;
  ASSERT_EQ(cmd_sweep(opt, msg), kExitOk) << msg.str();
  const auto rows = read_csv(*opt.out / "sweep.csv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1][0], "0");
  EXPECT_EQ(rows[1][5], "1");
  EXPECT_TRUE(fs::is_regular_file(*opt.out / "sweep_metrics.csv"));
}

TEST(Commands, EnvironmentOverridesOutputDir) {
  const fs::path dir = scratch("env");
  ::setenv("FSDP_OUT_DIR", dir.c_str(), 1);
  CommandOptions opt;
  opt.scenario = kNominal;
  opt.seeds = 1;
  std::ostringstream msg;
  const int code = cmd_run(opt, msg);
  ::unsetenv("FSDP_OUT_DIR");
  ASSERT_EQ(code, kExitOk) << msg.str();
  EXPECT_TRUE(fs::is_regular_file(dir / "metrics.csv"));
}

SyntheticOpponentData small_data(const Raceline& track, int laps) {
  SyntheticOpponentConfig gen;
  gen.laps = laps;
  gen.rate_hz = 5.0;
  return generate_synthetic_opponent(track, gen);
}

TEST(PredictBench, RefusesFewerThanThreeLaps) {
  const ScenarioConfig sc = load_scenario(kNominal);
  const Raceline track = Raceline::load(sc.track);
  const auto data = small_data(track, 2);
  try {
    predict_bench(data, {}, track.length(), {10}, sc);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_input);
  }
  // Through the command: a recorded two-lap buffer is a runtime failure.
  const fs::path dir = scratch("bench_short");
  SyntheticOpponentConfig gen;
  gen.laps = 2;
  {
    std::ofstream f(dir / "buffer.json");
    f << buffer_snapshot_json(data, gen, track.length());
  }
  CommandOptions opt;
  opt.scenario = kNominal;
  opt.out = dir;
  opt.buffer = dir / "buffer.json";
  std::ostringstream msg;
  EXPECT_EQ(cmd_predict_bench(opt, msg), kExitRuntime) << msg.str();
}

TEST(PredictBench, ExactSparseRowMatchesDense) {
  ScenarioConfig sc = load_scenario(kNominal);
  sc.setup.selection.n_target = 120;
  sc.setup.fit.iters = 50;
  const Raceline track = Raceline::load(sc.track);
  SyntheticOpponentConfig gen;
  gen.rate_hz = 5.0;
  const auto data = generate_synthetic_opponent(track, gen);
  const auto rows = predict_bench(data, gen, track.length(), {10, 120}, sc);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].model, "dense");
  EXPECT_EQ(rows[1].model, "sgp");
  EXPECT_EQ(rows[2].model, "sgp_exact");
  EXPECT_EQ(rows[0].N, 120u);
  EXPECT_NEAR(rows[2].rmse, rows[0].rmse, 1e-6);
  for (const auto& r : rows) {
    EXPECT_GT(r.fit_ms, 0.0);
    EXPECT_GT(r.predict_ms, 0.0);
  }
}

TEST(PredictBench, SnapshotRoundTrip) {
  const Raceline track = make_oval_chicane();
  SyntheticOpponentConfig gen;
  gen.rate_hz = 5.0;
  gen.seed = 12;
  const auto data = generate_synthetic_opponent(track, gen);
  const fs::path dir = scratch("snap");
  {
    std::ofstream f(dir / "b.json");
    f << buffer_snapshot_json(data, gen, track.length());
  }
  SyntheticOpponentConfig back;
  double L = 0.0;
  const auto d2 = load_buffer_snapshot(dir / "b.json", back, L);
  EXPECT_EQ(L, track.length());
  EXPECT_EQ(back.seed, 12u);
  EXPECT_EQ(back.hidden_mean, gen.hidden_mean);
  ASSERT_EQ(d2.lateral.size(), data.lateral.size());
  for (std::size_t i = 0; i < data.lateral.size(); ++i) {
    EXPECT_EQ(d2.lateral[i].x, data.lateral[i].x);
    EXPECT_EQ(d2.lateral[i].y, data.lateral[i].y);
    EXPECT_EQ(d2.lateral[i].lap, data.lateral[i].lap);
  }
}

TEST(Synthetic, GeneratorProperties) {
  const Raceline track = make_oval_chicane();
  const double L = track.length();
  SyntheticOpponentConfig gen;
  gen.line_std = 0.0;
  gen.d_noise = 0.0;
  gen.v_noise = 0.0;
  gen.hidden_fraction = 0.0;
  const auto clean = generate_synthetic_opponent(track, gen);
  ASSERT_FALSE(clean.lateral.empty());
  for (std::size_t i = 0; i < clean.lateral.size(); ++i) {
    const auto& o = clean.lateral[i];
    EXPECT_NEAR(o.y, 0.3 * std::sin(2.0 * std::numbers::pi * o.x / L), 1e-12);
    EXPECT_NEAR(clean.speed[i].y, 0.5 * track.sample(o.x).v_ref, 1e-12);
    EXPECT_GE(o.x, 0.0);
    EXPECT_LT(o.x, L);
  }
  EXPECT_EQ(clean.lateral.front().lap, 0);
  EXPECT_EQ(clean.lateral.back().lap, 2);

  // Hidden share of the samples close to the configured fraction.
  SyntheticOpponentConfig hid;
  hid.laps = 30;
  hid.hidden_fraction = 0.3;
  hid.hidden_mean = 2.0;
  gen = hid;
  gen.hidden_fraction = 0.0;
  const double all = static_cast<double>(generate_synthetic_opponent(track, gen).lateral.size());
  const double seen = static_cast<double>(generate_synthetic_opponent(track, hid).lateral.size());
  EXPECT_NEAR(1.0 - seen / all, 0.3, 0.03);

  const auto a = generate_synthetic_opponent(track, {});
  const auto b = generate_synthetic_opponent(track, {});
  ASSERT_EQ(a.lateral.size(), b.lateral.size());
  for (std::size_t i = 0; i < a.lateral.size(); ++i) EXPECT_EQ(a.lateral[i].y, b.lateral[i].y);

  SyntheticOpponentConfig bad;
  bad.laps = 0;
  EXPECT_THROW(generate_synthetic_opponent(track, bad), Error);
}

}  // namespace
}  // namespace fsdp
