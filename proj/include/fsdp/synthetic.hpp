#pragma once

#include <cstdint>
#include <vector>

#include "fsdp/predictor.hpp"
#include "fsdp/selection.hpp"
#include "fsdp/track.hpp"

namespace fsdp {

/// Opponent laps for benchmarks. Truth: d(s) = amplitude sin(2 pi s / L) and
/// v(s) = s_max v_ref(s). The opponent drives the truth plus an
/// Ornstein-Uhlenbeck wander (line_std, line_corr) like the simulated
/// opponent. Samples come at `rate_hz` with Gaussian perception noise, and
/// with probability `outlier_prob` the lateral value is replaced by a sensor
/// fault drawn uniformly from [-outlier_span, outlier_span]. Visibility
/// follows a two-state Markov chain: the opponent is out of view for
/// `hidden_fraction` of the time on average, in spells of mean `hidden_mean`
/// seconds, and hidden samples are not recorded.
struct SyntheticOpponentConfig {
  int laps = 3;
  double s_max = 0.5;
  double amplitude = 0.3;
  double line_std = 0.05;
  double line_corr = 1.0;  // [s]
  double d_noise = 0.03;
  double v_noise = 0.03;
  double outlier_prob = 0.0;
  double outlier_span = 1.5;
  double hidden_fraction = 0.3;
  double hidden_mean = 5.0;  // [s]
  double rate_hz = 20.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticOpponentData {
  std::vector<Observation> lateral;  // lap field 0 .. laps-1
  std::vector<Observation> speed;
};

double synthetic_lateral_truth(double s, double track_length, double amplitude);

SyntheticOpponentData generate_synthetic_opponent(const Raceline& track, const SyntheticOpponentConfig& cfg);

/// Observations of one lap.
std::vector<Observation> lap_slice(const std::vector<Observation>& obs, int lap);

struct SelectionComparison {
  double rmse_curated = 0.0;  // SGP on the curated buffer, lap by lap
  double rmse_latest = 0.0;   // dense GP on the latest lap only
  double ratio = 0.0;         // curated / latest
  std::size_t curated_size = 0;
  std::size_t latest_size = 0;
};

/// Lateral RMSE against the truth on `grid_points` uniform positions. The
/// baseline sees the latest lap binned like the curated stream (latest point
/// per spatial bin). Both models fit their hyperparameters with the same
/// iteration budget.
SelectionComparison compare_selection(const Raceline& track, const SyntheticOpponentData& data,
                                      const SyntheticOpponentConfig& cfg, const SelectionConfig& selection,
                                      const OpponentFitOptions& fit, int grid_points = 500);

}  // namespace fsdp
