#pragma once

#include <cstddef>
#include <optional>

// Data-parallel inner loops with a scalar reference and an AVX2/FMA variant
// picked at runtime. Both variants are always compiled on x86-64; other
// targets only get the scalar path.
namespace fsdp::simd {

enum class Isa { scalar, avx2 };

const char* to_string(Isa isa);

bool isa_available(Isa isa);

/// ISA used by the dispatching entry points below.
Isa active_isa();

/// Test hook: pin the dispatch to one ISA (nullopt restores auto-detection).
/// Requests for an unavailable ISA fall back to scalar.
void force_isa(std::optional<Isa> isa);

/// out[i*nb + j] = sf2 * exp(-(a[i] - b[j])^2 * inv_two_l2)
void rbf_cross(const double* a, std::size_t na, const double* b, std::size_t nb, double inv_two_l2,
               double sf2, double* out);

/// out[i] = index of the centroid nearest to x[i]; ties go to the lower index.
void nearest_centroid(const double* x, std::size_t n, const double* c, std::size_t k, int* out);

namespace scalar {
void rbf_cross(const double* a, std::size_t na, const double* b, std::size_t nb, double inv_two_l2,
               double sf2, double* out);
void nearest_centroid(const double* x, std::size_t n, const double* c, std::size_t k, int* out);
}  // namespace scalar

namespace avx2 {
void rbf_cross(const double* a, std::size_t na, const double* b, std::size_t nb, double inv_two_l2,
               double sf2, double* out);
void nearest_centroid(const double* x, std::size_t n, const double* c, std::size_t k, int* out);
}  // namespace avx2

}  // namespace fsdp::simd
