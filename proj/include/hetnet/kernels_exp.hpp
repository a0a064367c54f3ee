#pragma once

// Shared exp(x) algorithm: range reduction to r in [-ln2/2, ln2/2], rational
// approximation, then scaling by 2^n applied as two bit-built factors so no
// libm call is needed and every backend runs the identical sequence.
// Accuracy is ~1 ulp over the finite range; |x| beyond the clamps saturates
// to 0 / +inf.

#include <stdint.h>

namespace hetnet::kern {

struct ExpConsts {
  static constexpr double kLog2E = 1.4426950408889634073599;
  static constexpr double kC1 = 6.93145751953125e-1;             // ln2 high part
  static constexpr double kC2 = 1.42860682030941723212e-6;       // ln2 low part
  static constexpr double kP0 = 1.26177193074810590878e-4;
  static constexpr double kP1 = 3.02994407707441961300e-2;
  static constexpr double kP2 = 9.99999999999999999910e-1;
  static constexpr double kQ0 = 3.00198505138664455042e-6;
  static constexpr double kQ1 = 2.52448340349684104192e-3;
  static constexpr double kQ2 = 2.27265548208155028766e-1;
  static constexpr double kQ3 = 2.00000000000000000005e0;
  // log(DBL_MAX) and log of the smallest subnormal; outside these the result
  // saturates to inf / 0.
  static constexpr double kMaxArg = 7.09782712893383996843e2;
  static constexpr double kMinArg = -7.45133219101941108420e2;
};

inline double exp2i_factor(int64_t e) {
  // 2^e for e in [-1022, 1023], built from the exponent bits.
  union {
    uint64_t u;
    double d;
  } v;
  v.u = static_cast<uint64_t>(e + 1023) << 52;
  return v.d;
}

inline double exp_ref(double x) {
  using E = ExpConsts;
  if (x != x) return x;
  if (x > E::kMaxArg) return 1.0 / 0.0;
  if (x < E::kMinArg) return 0.0;
  double px = E::kLog2E * x + 0.5;
  // floor via truncation; px can be negative.
  int64_t n = static_cast<int64_t>(px);
  if (px < 0 && static_cast<double>(n) != px) --n;
  const double pn = static_cast<double>(n);
  x -= pn * E::kC1;
  x -= pn * E::kC2;
  const double xx = x * x;
  const double p = x * ((E::kP0 * xx + E::kP1) * xx + E::kP2);
  const double q = ((E::kQ0 * xx + E::kQ1) * xx + E::kQ2) * xx + E::kQ3;
  double e = p / (q - p);
  e = 1.0 + 2.0 * e;
  // Two-step 2^n so subnormal tails scale without overflowing the factor.
  const int64_t n1 = n / 2;
  const int64_t n2 = n - n1;
  return e * exp2i_factor(n1) * exp2i_factor(n2);
}

}  // namespace hetnet::kern
