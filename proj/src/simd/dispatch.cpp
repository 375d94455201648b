#include <atomic>

#include "fsdp/simd.hpp"

namespace fsdp::simd {

namespace {

bool cpu_has_avx2() {
#if defined(FSDP_HAVE_AVX2_OBJECTS) && (defined(__x86_64__) || defined(__i386__))
  static const bool has = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return has;
#else
  return false;
#endif
}

// -1: auto, otherwise static_cast<int>(Isa)
std::atomic<int> forced{-1};

}  // namespace

const char* to_string(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

bool isa_available(Isa isa) { return isa == Isa::scalar || cpu_has_avx2(); }

Isa active_isa() {
  const int f = forced.load(std::memory_order_relaxed);
  if (f >= 0) return static_cast<Isa>(f);
  return cpu_has_avx2() ? Isa::avx2 : Isa::scalar;
}

void force_isa(std::optional<Isa> isa) {
  if (!isa) {
    forced.store(-1);
  } else {
    forced.store(static_cast<int>(isa_available(*isa) ? *isa : Isa::scalar));
  }
}

void rbf_cross(const double* a, std::size_t na, const double* b, std::size_t nb, double inv_two_l2,
               double sf2, double* out) {
  if (active_isa() == Isa::avx2) {
    avx2::rbf_cross(a, na, b, nb, inv_two_l2, sf2, out);
  } else {
    scalar::rbf_cross(a, na, b, nb, inv_two_l2, sf2, out);
  }
}

void nearest_centroid(const double* x, std::size_t n, const double* c, std::size_t k, int* out) {
  if (k == 0) return;
  if (active_isa() == Isa::avx2) {
    avx2::nearest_centroid(x, n, c, k, out);
  } else {
    scalar::nearest_centroid(x, n, c, k, out);
  }
}

}  // namespace fsdp::simd
