#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fsdp/scenario.hpp"
#include "fsdp/sim.hpp"
#include "fsdp/synthetic.hpp"

namespace fsdp {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

struct EpisodeRecord {
  int index = 0;
  std::uint64_t seed = 0;
  double s_max = 0.0;
  EpisodeResult result;
};

/// Runs `count` episodes with seeds seed_base + i on `jobs` threads. Results
/// come back in seed order; logs (one JSONL blob per episode) when asked.
std::vector<EpisodeRecord> run_batch(const Raceline& track, const ScenarioConfig& sc, double s_max, int count,
                                     std::vector<std::string>* logs = nullptr);

/// One row per episode, no wall-clock columns.
std::string format_metrics(const std::vector<EpisodeRecord>& records);

struct Aggregate {
  double s_max = 0.0;
  int episodes = 0, overtakes = 0, crashes = 0, timeouts = 0;
  std::optional<double> success_rate;
  // Means over overtake episodes.
  double l = 0.0, T = 0.0, jerk = 0.0, steer_rate = 0.0;
  // Over every plan cycle of the batch [ms].
  double compute_mean = 0.0, compute_std = 0.0, compute_p95 = 0.0;
  int bound_violations = 0;
};

Aggregate aggregate(const std::vector<EpisodeRecord>& records);
std::string format_aggregate(const std::vector<Aggregate>& rows);

/// Latest per-bin observations of all laps, thinned evenly to at most n.
std::vector<Observation> bench_training_set(const std::vector<Observation>& obs, double track_length, double delta_s,
                                            std::size_t n);

struct BenchRow {
  std::string model;  // dense, sgp, sgp_exact
  int M = 0;
  std::size_t N = 0;
  double fit_ms = 0.0;
  double predict_ms = 0.0;  // one batch of 200 points
  double rmse = 0.0;        // against the generator truth
};

std::vector<BenchRow> predict_bench(const SyntheticOpponentData& data, const SyntheticOpponentConfig& gen,
                                    double track_length, const std::vector<int>& ms, const ScenarioConfig& sc);

std::string buffer_snapshot_json(const SyntheticOpponentData& data, const SyntheticOpponentConfig& gen,
                                 double track_length);
SyntheticOpponentData load_buffer_snapshot(const std::filesystem::path& path, SyntheticOpponentConfig& gen,
                                           double& track_length);

struct CommandOptions {
  std::filesystem::path scenario;
  std::optional<std::filesystem::path> out;
  std::optional<int> seeds;
  std::vector<double> smax;
  std::vector<int> m;
  std::optional<std::filesystem::path> buffer;
};

/// Each returns an exit code and reports on `msg`.
int cmd_run(const CommandOptions& opt, std::ostream& msg);
int cmd_sweep(const CommandOptions& opt, std::ostream& msg);
int cmd_predict_bench(const CommandOptions& opt, std::ostream& msg);
int cmd_validate_config(const CommandOptions& opt, std::ostream& msg);

}  // namespace fsdp
