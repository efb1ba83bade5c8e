#pragma once

#include <cstddef>
#include <cstring>

// Fixed-order squared-distance accumulation shared by the brute-force kernel
// and the spatial index. `a` and `b` must start at a column index that is a
// multiple of kLanes; a short tail is only allowed at the end of a row.

namespace idprof::lanes {

inline constexpr std::size_t kLanes = 8;

// One 8-wide vector per accumulator; lane j of the vector is lane j of the
// contract, so the arithmetic is identical to the scalar definition.
typedef double Vec8 __attribute__((vector_size(8 * sizeof(double))));

inline Vec8 load8(const double* p) noexcept {
  Vec8 v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

inline void store8(double* p, Vec8 v) noexcept { std::memcpy(p, &v, sizeof v); }

inline void accumulate(const double* __restrict a, const double* __restrict b, std::size_t len,
                       double* __restrict acc) noexcept {
  Vec8 l = load8(acc);
  std::size_t k = 0;
  for (; k + kLanes <= len; k += kLanes) {
    const Vec8 d = load8(a + k) - load8(b + k);
    l += d * d;
  }
  store8(acc, l);
  for (std::size_t j = 0; k + j < len; ++j) {
    const double d = a[k + j] - b[k + j];
    acc[j] += d * d;
  }
}

// Same arithmetic as four accumulate() calls sharing `a`; loads of `a` are
// amortised across the four rows.
inline void accumulate4(const double* __restrict a, const double* __restrict b0,
                        const double* __restrict b1, const double* __restrict b2,
                        const double* __restrict b3, std::size_t len, double* __restrict acc0,
                        double* __restrict acc1, double* __restrict acc2,
                        double* __restrict acc3) noexcept {
  Vec8 l0 = load8(acc0), l1 = load8(acc1), l2 = load8(acc2), l3 = load8(acc3);
  std::size_t k = 0;
  for (; k + kLanes <= len; k += kLanes) {
    const Vec8 x = load8(a + k);
    const Vec8 d0 = x - load8(b0 + k);
    const Vec8 d1 = x - load8(b1 + k);
    const Vec8 d2 = x - load8(b2 + k);
    const Vec8 d3 = x - load8(b3 + k);
    l0 += d0 * d0;
    l1 += d1 * d1;
    l2 += d2 * d2;
    l3 += d3 * d3;
  }
  store8(acc0, l0);
  store8(acc1, l1);
  store8(acc2, l2);
  store8(acc3, l3);
  if (k < len) {
    accumulate(a + k, b0 + k, len - k, acc0);
    accumulate(a + k, b1 + k, len - k, acc1);
    accumulate(a + k, b2 + k, len - k, acc2);
    accumulate(a + k, b3 + k, len - k, acc3);
  }
}

inline double combine(const double* l) noexcept {
  return ((l[0] + l[1]) + (l[2] + l[3])) + ((l[4] + l[5]) + (l[6] + l[7]));
}

}  // namespace idprof::lanes
