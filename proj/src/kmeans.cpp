#include "fsdp/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "fsdp/common.hpp"
#include "fsdp/simd.hpp"

namespace fsdp {

std::vector<double> kmeans_pp_extend(const std::vector<double>& x, std::vector<double> centers,
                                     std::size_t extra, std::uint64_t seed) {
  if (x.empty()) raise(ErrorKind::invalid_input, "k-means++: no data");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t target = centers.size() + extra;
  std::vector<double> d2(x.size(), std::numeric_limits<double>::infinity());
  if (centers.empty()) {
    centers.push_back(x[static_cast<std::size_t>(unit(rng) * static_cast<double>(x.size())) % x.size()]);
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (double c : centers) d2[i] = std::min(d2[i], (x[i] - c) * (x[i] - c));
  }
  while (centers.size() < target) {
    double total = 0.0;
    for (double d : d2) total += d;
    if (total <= 0.0) break;
    const double pick = unit(rng) * total;
    double acc = 0.0;
    std::size_t chosen = x.size() - 1;
    for (std::size_t i = 0; i < x.size(); ++i) {
      acc += d2[i];
      if (acc > pick && d2[i] > 0.0) {
        chosen = i;
        break;
      }
    }
    const double c = x[chosen];
    centers.push_back(c);
    for (std::size_t i = 0; i < x.size(); ++i) d2[i] = std::min(d2[i], (x[i] - c) * (x[i] - c));
  }
  if (centers.size() < target) {
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    const std::size_t missing = target - centers.size();
    const double span = std::max(*hi - *lo, 1e-6);
    for (std::size_t j = 0; j < missing; ++j) {
      centers.push_back(*lo + span * (static_cast<double>(j) + 0.5) / static_cast<double>(missing));
    }
  }
  return centers;
}

std::vector<double> kmeans_pp_init(const std::vector<double>& x, std::size_t k, std::uint64_t seed) {
  if (k == 0) return {};
  return kmeans_pp_extend(x, {}, k, seed);
}

KMeansResult lloyd_1d(const std::vector<double>& x, std::vector<double> centroids, int max_iter, double tol) {
  KMeansResult r;
  const std::size_t k = centroids.size();
  if (k == 0) raise(ErrorKind::invalid_input, "k-means: no centroids");
  r.labels.assign(x.size(), 0);
  std::vector<double> sum(k);
  std::vector<std::size_t> count(k);
  for (int it = 0; it < max_iter; ++it) {
    simd::nearest_centroid(x.data(), x.size(), centroids.data(), k, r.labels.data());
    std::fill(sum.begin(), sum.end(), 0.0);
    std::fill(count.begin(), count.end(), 0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      sum[static_cast<std::size_t>(r.labels[i])] += x[i];
      ++count[static_cast<std::size_t>(r.labels[i])];
    }
    double moved = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (count[j] == 0) continue;
      const double c = sum[j] / static_cast<double>(count[j]);
      moved = std::max(moved, std::abs(c - centroids[j]));
      centroids[j] = c;
    }
    r.iterations = it + 1;
    if (moved <= tol) break;
  }
  // Final assignment against the returned centroids.
  simd::nearest_centroid(x.data(), x.size(), centroids.data(), k, r.labels.data());
  r.sizes.assign(k, 0);
  for (int l : r.labels) ++r.sizes[static_cast<std::size_t>(l)];
  r.centroids = std::move(centroids);
  return r;
}

}  // namespace fsdp
