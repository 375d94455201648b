#pragma once

#include <cstdint>
#include <vector>

namespace fsdp {

/// K-means++ seeding on 1-D inputs. Deterministic for a given seed. When the
/// data has fewer distinct values than k, the remaining centers are spread
/// evenly over the data range.
std::vector<double> kmeans_pp_init(const std::vector<double>& x, std::size_t k, std::uint64_t seed);

/// Adds `extra` K-means++ centers on top of an existing set.
std::vector<double> kmeans_pp_extend(const std::vector<double>& x, std::vector<double> centers,
                                     std::size_t extra, std::uint64_t seed);

struct KMeansResult {
  std::vector<double> centroids;
  std::vector<int> labels;
  std::vector<std::size_t> sizes;
  int iterations = 0;
};

/// Lloyd iterations on 1-D inputs from the given centroids. A centroid whose
/// cluster empties keeps its position and reports size 0.
KMeansResult lloyd_1d(const std::vector<double>& x, std::vector<double> centroids, int max_iter = 50,
                      double tol = 1e-6);

}  // namespace fsdp
