#include "fpcert/fixedpoint.hpp"

#include <algorithm>
#include <charconv>

namespace fpcert {

std::string to_string(RoundingMode m) {
  switch (m) {
    case RoundingMode::Floor: return "floor";
    case RoundingMode::TowardZero: return "toward-zero";
    case RoundingMode::Nearest: return "nearest";
  }
  return "floor";
}

RoundingMode rounding_from_string(const std::string& s) {
  if (s == "floor") return RoundingMode::Floor;
  if (s == "toward-zero" || s == "toward_zero") return RoundingMode::TowardZero;
  if (s == "nearest") return RoundingMode::Nearest;
  throw std::invalid_argument("unknown rounding mode: " + s);
}

FxFormat::FxFormat(int p, int q) : int_bits(p), frac_bits(q) {
  if (p < 0 || q < 0) throw std::invalid_argument("FxFormat: negative bit count");
  if (p + q + 1 > 63) throw std::invalid_argument("FxFormat: p + q + 1 must fit in 63 bits");
}

std::string FxFormat::to_string() const {
  return "p" + std::to_string(int_bits) + ".q" + std::to_string(frac_bits);
}

FxFormat FxFormat::parse(const std::string& s) {
  auto dot = s.find('.');
  if (s.size() < 4 || s[0] != 'p' || dot == std::string::npos || dot + 1 >= s.size() || s[dot + 1] != 'q')
    throw std::invalid_argument("FxFormat: expected pN.qM, got: " + s);
  int p = std::stoi(s.substr(1, dot - 1));
  int q = std::stoi(s.substr(dot + 2));
  return FxFormat(p, q);
}

std::string FxValue::to_string() const {
  return std::to_string(raw) + "@" + fmt.to_string();
}

FxValue FxValue::parse(const std::string& s) {
  auto at = s.find('@');
  if (at == std::string::npos) throw std::invalid_argument("FxValue: expected raw@pN.qM, got: " + s);
  std::int64_t raw = 0;
  auto body = s.substr(0, at);
  auto res = std::from_chars(body.data(), body.data() + body.size(), raw);
  if (res.ec != std::errc{} || res.ptr != body.data() + body.size())
    throw std::invalid_argument("FxValue: bad raw integer: " + s);
  FxValue v{raw, FxFormat::parse(s.substr(at + 1))};
  if (std::llabs(v.raw) >= v.fmt.raw_limit())
    throw OverflowError("FxValue: raw out of range for " + v.fmt.to_string());
  return v;
}

__int128 round_shift(__int128 value, int shift, RoundingMode mode) {
  if (shift == 0) return value;
  const __int128 one = 1;
  const __int128 den = one << shift;
  switch (mode) {
    case RoundingMode::Floor:
      return value >> shift;  // arithmetic shift: floor
    case RoundingMode::TowardZero:
      return value >= 0 ? (value >> shift) : -((-value) >> shift);
    case RoundingMode::Nearest: {
      __int128 q = value >> shift;
      __int128 rem = value - (q << shift);
      __int128 twice = rem << 1;
      if (twice > den || (twice == den && (q & 1))) ++q;
      return q;
    }
  }
  return 0;
}

void FxContext::check(std::int64_t raw, const char* op) const {
  if (std::llabs(raw) >= fmt.raw_limit())
    throw OverflowError(std::string(op) + ": result magnitude reaches 2^" +
                        std::to_string(fmt.int_bits) + " in " + fmt.to_string());
}

FxValue FxContext::from_raw(std::int64_t raw) const {
  check(raw, "from_raw");
  return FxValue{raw, fmt};
}

FxValue FxContext::quantize(const Rat& x) const {
  std::int64_t raw = 0;
  switch (rounding) {
    case RoundingMode::Floor: raw = floor_scaled(x, fmt.frac_bits); break;
    case RoundingMode::TowardZero:
      raw = x >= 0 ? floor_scaled(x, fmt.frac_bits) : ceil_scaled(x, fmt.frac_bits);
      break;
    case RoundingMode::Nearest: raw = nearest_scaled(x, fmt.frac_bits); break;
  }
  check(raw, "quantize");
  return FxValue{raw, fmt};
}

FxValue FxContext::add(FxValue a, FxValue b) const {
  std::int64_t raw = a.raw + b.raw;
  check(raw, "add");
  return FxValue{raw, fmt};
}

FxValue FxContext::sub(FxValue a, FxValue b) const {
  std::int64_t raw = a.raw - b.raw;
  check(raw, "sub");
  return FxValue{raw, fmt};
}

std::int64_t FxContext::round_product(__int128 wide, int shift) const {
  __int128 rounded = round_shift(wide, shift, rounding);
  __int128 lim = static_cast<__int128>(fmt.raw_limit());
  if (rounded >= lim || rounded <= -lim)
    throw OverflowError("mul: result magnitude reaches 2^" + std::to_string(fmt.int_bits) +
                        " in " + fmt.to_string());
  return static_cast<std::int64_t>(rounded);
}

FxValue FxContext::mul(FxValue a, FxValue b) const {
  __int128 wide = static_cast<__int128>(a.raw) * static_cast<__int128>(b.raw);
  std::int64_t raw = round_product(wide, fmt.frac_bits);
  return FxValue{raw, fmt};
}

FxValue FxContext::clamp(FxValue x, FxValue lo, FxValue hi) const {
  if (lo.raw > hi.raw) throw std::invalid_argument("clamp: lo > hi");
  return FxValue{std::clamp(x.raw, lo.raw, hi.raw), fmt};
}

Tracked FxContext::add(const Tracked& a, const Tracked& b) const {
  return Tracked{add(a.fx, b.fx), a.shadow + b.shadow};
}

Tracked FxContext::sub(const Tracked& a, const Tracked& b) const {
  return Tracked{sub(a.fx, b.fx), a.shadow - b.shadow};
}

Tracked FxContext::mul(const Tracked& a, const Tracked& b) const {
  return Tracked{mul(a.fx, b.fx), a.shadow * b.shadow};
}

Tracked FxContext::clamp(const Tracked& x, FxValue lo, FxValue hi) const {
  Rat lo_r = lo.value(), hi_r = hi.value();
  Rat shadow = x.shadow < lo_r ? lo_r : (x.shadow > hi_r ? hi_r : x.shadow);
  return Tracked{clamp(x.fx, lo, hi), shadow};
}

Tracked FxContext::dot(const TrackedVector& a, const TrackedVector& b) const {
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  Tracked acc = track_raw(0);
  for (std::size_t i = 0; i < a.size(); ++i) acc = add(acc, mul(a[i], b[i]));
  return acc;
}

TrackedVector FxContext::matvec(std::span<const std::int64_t> m_raw, std::size_t n_rows,
                                std::size_t n_cols, const TrackedVector& x) const {
  if (m_raw.size() != n_rows * n_cols || x.size() != n_cols)
    throw std::invalid_argument("matvec: dimension mismatch");
  TrackedVector out{{}, fmt};
  out.elems.reserve(n_rows);
  for (std::size_t i = 0; i < n_rows; ++i) {
    Tracked acc = track_raw(0);
    for (std::size_t j = 0; j < n_cols; ++j)
      acc = add(acc, mul(track_raw(m_raw[i * n_cols + j]), x[j]));
    out.elems.push_back(acc);
  }
  return out;
}

TrackedVector FxContext::track_vector(std::span<const std::int64_t> raws) const {
  TrackedVector out{{}, fmt};
  out.elems.reserve(raws.size());
  for (auto r : raws) out.elems.push_back(track_raw(r));
  return out;
}

}  // namespace fpcert
