#include "fpcert/rational.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace fpcert {

Rat rat_pow2(int e) {
  Rat r;
  if (e >= 0) {
    mpz_ui_pow_ui(r.get_num_mpz_t(), 2, static_cast<unsigned long>(e));
  } else {
    r.get_num() = 1;
    mpz_ui_pow_ui(r.get_den_mpz_t(), 2, static_cast<unsigned long>(-e));
  }
  return r;
}

Rat rat_from_raw(std::int64_t raw, int frac_bits) {
  Rat r(Int(static_cast<long>(raw)));
  return r * rat_pow2(-frac_bits);
}

Rat rat_from_i128(__int128 v) {
  bool neg = v < 0;
  unsigned __int128 m = neg ? static_cast<unsigned __int128>(-v) : static_cast<unsigned __int128>(v);
  Int hi(static_cast<unsigned long>(m >> 64));
  Int lo(static_cast<unsigned long>(m & 0xffffffffffffffffULL));
  Int full = (hi << 64) + lo;
  if (neg) full = -full;
  return Rat(full);
}

Rat rat_from_i128_scaled(__int128 v, int frac_bits) {
  return rat_from_i128(v) * rat_pow2(-frac_bits);
}

Rat rat_from_double(double x) {
  Rat r;
  mpq_set_d(r.get_mpq_t(), x);
  return r;
}

double rat_to_double(const Rat& x) { return x.get_d(); }

namespace {

std::int64_t to_i64(const Int& z) {
  if (!z.fits_slong_p()) throw std::overflow_error("scaled value exceeds 64 bits");
  return static_cast<std::int64_t>(z.get_si());
}

}  // namespace

std::int64_t floor_scaled(const Rat& x, int q) {
  Rat s = x * rat_pow2(q);
  Int z;
  mpz_fdiv_q(z.get_mpz_t(), s.get_num_mpz_t(), s.get_den_mpz_t());
  return to_i64(z);
}

std::int64_t ceil_scaled(const Rat& x, int q) {
  Rat s = x * rat_pow2(q);
  Int z;
  mpz_cdiv_q(z.get_mpz_t(), s.get_num_mpz_t(), s.get_den_mpz_t());
  return to_i64(z);
}

std::int64_t nearest_scaled(const Rat& x, int q) {
  Rat s = x * rat_pow2(q);
  Int quot, rem;
  mpz_fdiv_qr(quot.get_mpz_t(), rem.get_mpz_t(), s.get_num_mpz_t(), s.get_den_mpz_t());
  Int twice = rem * 2;
  int c = cmp(twice, Int(s.get_den()));
  if (c > 0 || (c == 0 && mpz_odd_p(quot.get_mpz_t()))) quot += 1;
  return to_i64(quot);
}

long ceil_log_ratio(const Rat& base, const Rat& target, long cap) {
  if (!(base > 0 && base < 1)) throw std::invalid_argument("ceil_log_ratio: base must be in (0,1)");
  if (!(target > 0)) throw std::invalid_argument("ceil_log_ratio: target must be positive");
  if (target >= 1) return 0;

  double est = std::log(rat_to_double(target)) / std::log(rat_to_double(base));
  long k = est > 0 ? static_cast<long>(std::ceil(est)) : 0;
  if (k < 0) k = 0;
  if (k > cap) throw std::overflow_error("ceil_log_ratio: iteration count exceeds cap");

  auto pow_le = [&](long e) {
    Rat p;
    mpz_pow_ui(p.get_num_mpz_t(), base.get_num_mpz_t(), static_cast<unsigned long>(e));
    mpz_pow_ui(p.get_den_mpz_t(), base.get_den_mpz_t(), static_cast<unsigned long>(e));
    return p <= target;
  };
  while (!pow_le(k)) {
    ++k;
    if (k > cap) throw std::overflow_error("ceil_log_ratio: iteration count exceeds cap");
  }
  while (k > 0 && pow_le(k - 1)) --k;
  return k;
}

namespace {

// isqrt helpers: integer sqrt with floor / ceil semantics.
Int isqrt_floor(const Int& z) {
  Int r;
  mpz_sqrt(r.get_mpz_t(), z.get_mpz_t());
  return r;
}

}  // namespace

Rat sqrt_upper(const Rat& x, int precision_bits) {
  if (x < 0) throw std::invalid_argument("sqrt_upper: negative argument");
  if (x == 0) return Rat(0);
  // ceil(sqrt(x * 4^b)) / 2^b  >= sqrt(x)
  Int scaled_num = x.get_num();
  mpz_mul_2exp(scaled_num.get_mpz_t(), scaled_num.get_mpz_t(), 2u * static_cast<unsigned>(precision_bits));
  Int q;
  mpz_fdiv_q(q.get_mpz_t(), scaled_num.get_mpz_t(), x.get_den_mpz_t());
  Int r = isqrt_floor(q) + 2;  // +2 absorbs both floors
  Rat out(r);
  return out * rat_pow2(-precision_bits);
}

Rat sqrt_lower(const Rat& x, int precision_bits) {
  if (x < 0) throw std::invalid_argument("sqrt_lower: negative argument");
  if (x == 0) return Rat(0);
  Int scaled_num = x.get_num();
  mpz_mul_2exp(scaled_num.get_mpz_t(), scaled_num.get_mpz_t(), 2u * static_cast<unsigned>(precision_bits));
  Int q;
  mpz_fdiv_q(q.get_mpz_t(), scaled_num.get_mpz_t(), x.get_den_mpz_t());
  Int r = isqrt_floor(q);
  Rat out(r);
  return out * rat_pow2(-precision_bits);
}

std::string rat_to_string(const Rat& x) {
  if (x.get_den() == 1) return x.get_num().get_str();
  return x.get_num().get_str() + "/" + x.get_den().get_str();
}

std::string rat_to_decimal(const Rat& x, int digits) {
  if (digits < 1) digits = 1;
  if (x == 0) return "0";
  Int num = abs(x.get_num());
  Int den = x.get_den();
  // exponent: number of decimal digits of the integer part, or minus the
  // number of leading zeros after the point.
  int exp10 = 0;
  Int n = num, d = den;
  while (n >= d) {
    d *= 10;
    ++exp10;
  }
  while (n * 10 < d) {
    n *= 10;
    --exp10;
  }
  // now want digits significant digits of num/den: scale so integer part has
  // exactly `digits` digits, round to nearest.
  Int scaled_num = num, scaled_den = den;
  int shift = digits - exp10;
  if (shift > 0) {
    Int f;
    mpz_ui_pow_ui(f.get_mpz_t(), 10, static_cast<unsigned long>(shift));
    scaled_num *= f;
  } else if (shift < 0) {
    Int f;
    mpz_ui_pow_ui(f.get_mpz_t(), 10, static_cast<unsigned long>(-shift));
    scaled_den *= f;
  }
  Int quot, rem;
  mpz_fdiv_qr(quot.get_mpz_t(), rem.get_mpz_t(), scaled_num.get_mpz_t(), scaled_den.get_mpz_t());
  if (rem * 2 >= scaled_den) quot += 1;
  std::string mantissa = quot.get_str();
  if (static_cast<int>(mantissa.size()) > digits) {
    // rounding carried into an extra digit (e.g. 999->1000)
    mantissa.resize(static_cast<std::size_t>(digits));
    ++exp10;
  }
  while (mantissa.size() > 1 && mantissa.back() == '0') mantissa.pop_back();

  std::string sign = x < 0 ? "-" : "";
  // render without exponent when reasonable
  if (exp10 > 0 && exp10 <= digits + 3 && exp10 >= static_cast<int>(mantissa.size())) {
    mantissa.append(static_cast<std::size_t>(exp10) - mantissa.size(), '0');
    return sign + mantissa;
  }
  if (exp10 > 0 && exp10 <= digits + 3) {
    return sign + mantissa.substr(0, static_cast<std::size_t>(exp10)) + "." +
           mantissa.substr(static_cast<std::size_t>(exp10));
  }
  if (exp10 <= 0 && exp10 > -5) {
    return sign + "0." + std::string(static_cast<std::size_t>(-exp10), '0') + mantissa;
  }
  std::string out = sign + mantissa.substr(0, 1);
  if (mantissa.size() > 1) out += "." + mantissa.substr(1);
  out += "e" + std::to_string(exp10 - 1);
  return out;
}

Rat rat_parse(const std::string& s) {
  Rat r;
  if (r.set_str(s, 10) != 0) throw std::invalid_argument("rat_parse: bad rational literal: " + s);
  r.canonicalize();
  return r;
}

}  // namespace fpcert
