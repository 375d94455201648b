#include <cmath>

#include "fsdp/simd.hpp"

namespace fsdp::simd::scalar {

void rbf_cross(const double* a, std::size_t na, const double* b, std::size_t nb, double inv_two_l2,
               double sf2, double* out) {
  for (std::size_t i = 0; i < na; ++i) {
    double* row = out + i * nb;
    for (std::size_t j = 0; j < nb; ++j) {
      const double d = a[i] - b[j];
      row[j] = sf2 * std::exp(-(d * d) * inv_two_l2);
    }
  }
}

void nearest_centroid(const double* x, std::size_t n, const double* c, std::size_t k, int* out) {
  for (std::size_t i = 0; i < n; ++i) {
    int best = 0;
    double best_d = std::abs(x[i] - c[0]);
    for (std::size_t j = 1; j < k; ++j) {
      const double d = std::abs(x[i] - c[j]);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(j);
      }
    }
    out[i] = best;
  }
}

}  // namespace fsdp::simd::scalar
