#include "fsdp/simd.hpp"

#if defined(FSDP_BUILD_AVX2)

#include <immintrin.h>

#include <cmath>

namespace fsdp::simd::avx2 {

namespace {

// exp for x <= 0: x = n ln2 + r with |r| <= ln2/2, Taylor series to r^13,
// then scale by 2^n through the exponent bits. Inputs below -708 flush to 0.
inline __m256d exp_nonpositive(__m256d x) {
  const __m256d lo = _mm256_set1_pd(-708.0);
  const __m256d underflow = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
  x = _mm256_max_pd(x, lo);

  const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(1.4426950408889634)),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, _mm256_set1_pd(6.93147180369123816490e-01), x);
  r = _mm256_fnmadd_pd(n, _mm256_set1_pd(1.90821492927058770002e-10), r);

  __m256d p = _mm256_set1_pd(1.0 / 6227020800.0);
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 479001600.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 39916800.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 3628800.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 362880.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 40320.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 5040.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 720.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 120.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 24.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 6.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(0.5));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));

  const __m128i n32 = _mm256_cvtpd_epi32(n);
  __m256i bits = _mm256_cvtepi32_epi64(n32);
  bits = _mm256_slli_epi64(_mm256_add_epi64(bits, _mm256_set1_epi64x(1023)), 52);
  const __m256d scale = _mm256_castsi256_pd(bits);
  return _mm256_andnot_pd(underflow, _mm256_mul_pd(p, scale));
}

}  // namespace

void rbf_cross(const double* a, std::size_t na, const double* b, std::size_t nb, double inv_two_l2,
               double sf2, double* out) {
  const __m256d neg_g = _mm256_set1_pd(-inv_two_l2);
  const __m256d vs = _mm256_set1_pd(sf2);
  const std::size_t nb4 = nb & ~std::size_t{3};
  for (std::size_t i = 0; i < na; ++i) {
    double* row = out + i * nb;
    const __m256d ai = _mm256_set1_pd(a[i]);
    for (std::size_t j = 0; j < nb4; j += 4) {
      const __m256d d = _mm256_sub_pd(ai, _mm256_loadu_pd(b + j));
      const __m256d e = exp_nonpositive(_mm256_mul_pd(_mm256_mul_pd(d, d), neg_g));
      _mm256_storeu_pd(row + j, _mm256_mul_pd(vs, e));
    }
    for (std::size_t j = nb4; j < nb; ++j) {
      const double d = a[i] - b[j];
      row[j] = sf2 * std::exp(-(d * d) * inv_two_l2);
    }
  }
}

void nearest_centroid(const double* x, std::size_t n, const double* c, std::size_t k, int* out) {
  const __m256d sign = _mm256_set1_pd(-0.0);
  const std::size_t n4 = n & ~std::size_t{3};
  for (std::size_t i = 0; i < n4; i += 4) {
    const __m256d xi = _mm256_loadu_pd(x + i);
    __m256d best_d = _mm256_andnot_pd(sign, _mm256_sub_pd(xi, _mm256_set1_pd(c[0])));
    __m256d best = _mm256_setzero_pd();
    for (std::size_t j = 1; j < k; ++j) {
      const __m256d d = _mm256_andnot_pd(sign, _mm256_sub_pd(xi, _mm256_set1_pd(c[j])));
      const __m256d lt = _mm256_cmp_pd(d, best_d, _CMP_LT_OQ);
      best_d = _mm256_blendv_pd(best_d, d, lt);
      best = _mm256_blendv_pd(best, _mm256_set1_pd(static_cast<double>(j)), lt);
    }
    const __m128i idx = _mm256_cvttpd_epi32(best);
    _mm_storeu_si128(reinterpret_cast<__m128i*>(out + i), idx);
  }
  if (n4 < n) scalar::nearest_centroid(x + n4, n - n4, c, k, out + n4);
}

}  // namespace fsdp::simd::avx2

#else

namespace fsdp::simd::avx2 {

void rbf_cross(const double* a, std::size_t na, const double* b, std::size_t nb, double inv_two_l2,
               double sf2, double* out) {
  scalar::rbf_cross(a, na, b, nb, inv_two_l2, sf2, out);
}

void nearest_centroid(const double* x, std::size_t n, const double* c, std::size_t k, int* out) {
  scalar::nearest_centroid(x, n, c, k, out);
}

}  // namespace fsdp::simd::avx2

#endif
