#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <string>

namespace fpcert {

// Exact arithmetic for shadows, certificates and oracles. All problem data
// is dyadic, so mpq_class represents every quantity in this library without
// approximation.
using Rat = mpq_class;
using Int = mpz_class;

// 2^e as an exact rational, e may be negative.
Rat rat_pow2(int e);

// raw * 2^{-frac_bits}
Rat rat_from_raw(std::int64_t raw, int frac_bits);

Rat rat_from_i128(__int128 v);
Rat rat_from_i128_scaled(__int128 v, int frac_bits);  // v * 2^{-frac_bits}

// Exact value of a binary64 double (doubles are dyadic).
Rat rat_from_double(double x);

double rat_to_double(const Rat& x);

// floor(x * 2^q), ceil(x * 2^q), nearest with ties-to-even.
std::int64_t floor_scaled(const Rat& x, int q);
std::int64_t ceil_scaled(const Rat& x, int q);
std::int64_t nearest_scaled(const Rat& x, int q);

// Smallest integer k with base^k <= target, for 0 < base < 1 and
// 0 < target < 1. Exact; uses a float estimate then verifies with exact
// binary powering. Throws std::overflow_error past `cap`.
long ceil_log_ratio(const Rat& base, const Rat& target, long cap = 100000000L);

// Rational r with r >= sqrt(x) and r - sqrt(x) <= 2^{-precision_bits},
// and the corresponding lower version.
Rat sqrt_upper(const Rat& x, int precision_bits = 96);
Rat sqrt_lower(const Rat& x, int precision_bits = 96);

// "num/den" (canonical), and a decimal rendering with `digits` significant
// digits (round-to-nearest, used for reports only).
std::string rat_to_string(const Rat& x);
std::string rat_to_decimal(const Rat& x, int digits = 17);
Rat rat_parse(const std::string& s);  // accepts "num/den" and plain integers

}  // namespace fpcert
