#include "fsdp/selection.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "json.hpp"

#include "fsdp/common.hpp"
#include "fsdp/kmeans.hpp"

namespace fsdp {

namespace {

Eigen::VectorXd inputs(const std::vector<Observation>& obs) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(obs.size()));
  for (std::size_t i = 0; i < obs.size(); ++i) x[static_cast<Eigen::Index>(i)] = obs[i].x;
  return x;
}

}  // namespace

std::vector<Observation> spatial_time_filter(const std::vector<Observation>& incoming, double track_length,
                                             double delta_s) {
  if (!(delta_s > 0.0)) raise(ErrorKind::invalid_input, "spatial filter: delta_s must be positive");
  std::map<std::pair<int, long long>, std::size_t> best;
  for (std::size_t i = 0; i < incoming.size(); ++i) {
    const Observation& o = incoming[i];
    const double s = track_length > 0.0 ? wrap_periodic(o.x, track_length) : o.x;
    const auto key = std::make_pair(o.lap, static_cast<long long>(std::floor(s / delta_s)));
    auto it = best.find(key);
    if (it == best.end()) {
      best.emplace(key, i);
    } else if (o.t >= incoming[it->second].t) {
      it->second = i;
    }
  }
  std::vector<Observation> out;
  out.reserve(best.size());
  for (const auto& [key, idx] : best) out.push_back(incoming[idx]);
  return out;
}

std::vector<Observation> range_filter(const std::vector<Observation>& obs, double y_min, double y_max) {
  if (y_min > y_max) raise(ErrorKind::invalid_input, "range filter: y_min > y_max");
  std::vector<Observation> out;
  std::copy_if(obs.begin(), obs.end(), std::back_inserter(out),
               [&](const Observation& o) { return o.y >= y_min && o.y <= y_max; });
  return out;
}

std::vector<Observation> confidence_filter(const std::vector<Observation>& obs, const SgpModel& model,
                                           std::size_t n_train, std::size_t n_target) {
  if (3 * n_train <= 2 * n_target || obs.empty()) return obs;
  const PosteriorBatch post = model.predict(inputs(obs));
  std::vector<Observation> out;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const double half = 1.96 * std::sqrt(post.variance[k]);
    if (obs[i].y >= post.mean[k] - half && obs[i].y <= post.mean[k] + half) out.push_back(obs[i]);
  }
  return out;
}

std::vector<Observation> admit_informative(const std::vector<Observation>& filtered, const SgpModel& model,
                                           const std::vector<Observation>& train) {
  if (train.empty() || filtered.empty()) return filtered;
  const double mean = model.predictive_distance(inputs(train)).mean();
  const Eigen::VectorXd d = model.predictive_distance(inputs(filtered));
  std::vector<Observation> out;
  for (std::size_t i = 0; i < filtered.size(); ++i) {
    if (d[static_cast<Eigen::Index>(i)] > mean) out.push_back(filtered[i]);
  }
  return out;
}

PruneResult kmeans_prune(const std::vector<Observation>& merged, const SgpModel& model, std::size_t n_target) {
  PruneResult r;
  const std::size_t n = merged.size();
  r.kept_mask.assign(n, true);
  r.dropped_below_mean.assign(n, false);
  if (n < n_target || n == 0) {
    r.kept = merged;
    return r;
  }
  r.pruned = true;
  const std::vector<double> x = [&] {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = merged[i].x;
    return v;
  }();
  const Eigen::VectorXd& z = model.inducing();
  const KMeansResult km = lloyd_1d(x, std::vector<double>(z.data(), z.data() + z.size()), 50, 1e-6);
  const Eigen::VectorXd d = model.predictive_distance(inputs(merged));
  const std::size_t k = km.centroids.size();
  r.label = km.labels;
  r.distance.assign(d.data(), d.data() + d.size());
  r.cluster_size = km.sizes;
  // Means are accumulated relative to the first member so that a cluster of
  // identical distances has a mean exactly equal to them.
  r.cluster_mean.assign(k, 0.0);
  std::vector<double> ref(k, 0.0);
  std::vector<bool> seen(k, false);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(r.label[i]);
    if (!seen[c]) {
      seen[c] = true;
      ref[c] = r.distance[i];
    }
    r.cluster_mean[c] += r.distance[i] - ref[c];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (km.sizes[c] > 0) r.cluster_mean[c] = ref[c] + r.cluster_mean[c] / static_cast<double>(km.sizes[c]);
  }

  std::size_t remaining = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (r.distance[i] < r.cluster_mean[static_cast<std::size_t>(r.label[i])]) {
      r.dropped_below_mean[i] = true;
      r.kept_mask[i] = false;
      --remaining;
    }
  }

  if (remaining > n_target) {
    for (std::size_t c = 0; c < k; ++c) {
      if (km.sizes[c] == 0) continue;
      const std::size_t quota = n_target * km.sizes[c] / n;
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < n; ++i) {
        if (r.kept_mask[i] && static_cast<std::size_t>(r.label[i]) == c) members.push_back(i);
      }
      std::stable_sort(members.begin(), members.end(),
                       [&](std::size_t a, std::size_t b) { return r.distance[a] > r.distance[b]; });
      for (std::size_t j = quota; j < members.size(); ++j) r.kept_mask[members[j]] = false;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (r.kept_mask[i]) r.kept.push_back(merged[i]);
  }
  return r;
}

std::vector<Observation> select(const std::vector<Observation>& train, const std::vector<Observation>& incoming,
                                const SgpModel* model, const SelectionConfig& config) {
  if (incoming.empty()) return train;
  std::vector<Observation> f = spatial_time_filter(incoming, config.track_length, config.delta_s);
  f = range_filter(f, config.y_min, config.y_max);
  const bool have_model = model != nullptr && !model->empty();
  if (have_model) {
    f = confidence_filter(f, *model, train.size(), config.n_target);
    f = admit_informative(f, *model, train);
  }
  std::vector<Observation> merged = train;
  merged.insert(merged.end(), f.begin(), f.end());
  if (merged.size() < config.n_target) return merged;
  if (have_model) return kmeans_prune(merged, *model, config.n_target).kept;

  // Bootstrap without a model: thin evenly to the cap.
  std::vector<Observation> out;
  const std::size_t n = merged.size();
  const std::size_t keep = config.n_target;
  for (std::size_t j = 0; j < keep; ++j) out.push_back(merged[j * n / keep]);
  return out;
}

std::string ObservationBuffer::to_json() const {
  nlohmann::json j;
  j["n_target"] = config_.n_target;
  j["delta_s"] = config_.delta_s;
  j["track_length"] = config_.track_length;
  j["y_min"] = config_.y_min;
  j["y_max"] = config_.y_max;
  auto& arr = j["train"] = nlohmann::json::array();
  for (const auto& o : train_) arr.push_back({o.x, o.y, o.t, o.lap});
  return j.dump();
}

ObservationBuffer ObservationBuffer::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    SelectionConfig c;
    c.n_target = j.at("n_target").get<std::size_t>();
    c.delta_s = j.at("delta_s").get<double>();
    c.track_length = j.at("track_length").get<double>();
    c.y_min = j.at("y_min").get<double>();
    c.y_max = j.at("y_max").get<double>();
    ObservationBuffer b(c);
    for (const auto& row : j.at("train")) {
      b.train_.push_back({row.at(0).get<double>(), row.at(1).get<double>(), row.at(2).get<double>(),
                          row.at(3).get<int>()});
    }
    return b;
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::io, std::string("buffer snapshot: ") + e.what());
  }
}

}  // namespace fsdp
