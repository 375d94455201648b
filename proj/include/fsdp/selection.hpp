#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fsdp/gp.hpp"

namespace fsdp {

struct Observation {
  double x = 0.0;  // arc length s [m]
  double y = 0.0;  // lateral offset d [m] or speed v [m/s]
  double t = 0.0;  // timestamp [s]
  int lap = 0;
};

struct SelectionConfig {
  std::size_t n_target = 400;
  double delta_s = 0.2;        // spatial bin width [m]
  double track_length = 0.0;   // > 0 wraps x into [0, L) before binning
  double y_min = -1e9;
  double y_max = 1e9;
};

/// Per lap and spatial bin keep only the latest observation (ties: later
/// list position). Output ordered by (lap, bin).
std::vector<Observation> spatial_time_filter(const std::vector<Observation>& incoming, double track_length,
                                             double delta_s);

/// Keeps y in the closed interval [y_min, y_max].
std::vector<Observation> range_filter(const std::vector<Observation>& obs, double y_min, double y_max);

/// Drops points outside mu(x) +- 1.96 sqrt(var(x)) once the train set holds
/// more than 2/3 of the target size; identity otherwise.
std::vector<Observation> confidence_filter(const std::vector<Observation>& obs, const SgpModel& model,
                                           std::size_t n_train, std::size_t n_target);

/// Keeps candidates whose predictive distance exceeds the mean predictive
/// distance of the current train set. Empty train passes everything.
std::vector<Observation> admit_informative(const std::vector<Observation>& filtered, const SgpModel& model,
                                           const std::vector<Observation>& train);

struct PruneResult {
  std::vector<Observation> kept;          // in merged order
  std::vector<int> label;                 // cluster per merged point
  std::vector<double> distance;           // predictive distance per merged point
  std::vector<double> cluster_mean;       // mean predictive distance per cluster
  std::vector<std::size_t> cluster_size;  // members per cluster before dropping
  std::vector<bool> dropped_below_mean;   // per merged point
  std::vector<bool> kept_mask;            // per merged point
  bool pruned = false;
};

/// Clusters inputs with Lloyd iterations seeded at the inducing inputs,
/// drops below-cluster-mean points, then applies per-cluster quotas
/// floor(n_target |C_k| / |merged|) if still over the cap. No-op below the cap.
PruneResult kmeans_prune(const std::vector<Observation>& merged, const SgpModel& model, std::size_t n_target);

/// One data-selection cycle. `model` may be null before the first fit; the
/// model-based stages then pass through and an over-full merge is thinned
/// evenly instead of clustered.
std::vector<Observation> select(const std::vector<Observation>& train, const std::vector<Observation>& incoming,
                                const SgpModel* model, const SelectionConfig& config);

/// Curated observations for one target (lateral offset or speed).
class ObservationBuffer {
 public:
  explicit ObservationBuffer(SelectionConfig config) : config_(config) {}

  void update(const std::vector<Observation>& incoming, const SgpModel* model) {
    train_ = select(train_, incoming, model, config_);
  }

  const std::vector<Observation>& train() const { return train_; }
  const SelectionConfig& config() const { return config_; }
  std::size_t size() const { return train_.size(); }

  std::string to_json() const;
  static ObservationBuffer from_json(const std::string& text);

 private:
  SelectionConfig config_;
  std::vector<Observation> train_;
};

}  // namespace fsdp
