#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fpcert/rational.hpp"

namespace fpcert {

// Signaled whenever a fixed-point result would leave the representable
// range (-2^p, 2^p). Nothing saturates silently.
class OverflowError : public std::runtime_error {
 public:
  explicit OverflowError(const std::string& what) : std::runtime_error(what) {}
};

enum class RoundingMode { Floor, TowardZero, Nearest };

std::string to_string(RoundingMode m);
RoundingMode rounding_from_string(const std::string& s);

// Signed (p.q) format: p integer bits, q fractional bits, one sign bit.
// Representable grid: { k * 2^-q : |k * 2^-q| < 2^p }.
struct FxFormat {
  int int_bits = 1;    // p >= 0
  int frac_bits = 0;   // q >= 0

  FxFormat() = default;
  FxFormat(int p, int q);

  std::int64_t raw_limit() const {  // exclusive bound on |raw|
    return std::int64_t{1} << (int_bits + frac_bits);
  }
  Rat resolution() const { return rat_pow2(-frac_bits); }
  bool operator==(const FxFormat&) const = default;

  std::string to_string() const;  // "p8.q8"
  static FxFormat parse(const std::string& s);
};

// A fixed-point number: value = raw * 2^-q.
struct FxValue {
  std::int64_t raw = 0;
  FxFormat fmt;

  Rat value() const { return rat_from_raw(raw, fmt.frac_bits); }

  std::string to_string() const;  // "raw@p8.q8"
  static FxValue parse(const std::string& s);

  bool operator==(const FxValue&) const = default;
};

// A fixed-point value paired with the exact rational it would hold had no
// operation ever rounded. err() is exact, not estimated.
struct Tracked {
  FxValue fx;
  Rat shadow;

  Rat value() const { return fx.value(); }
  Rat err() const { return shadow - fx.value(); }
};

struct TrackedVector {
  std::vector<Tracked> elems;
  FxFormat fmt;

  std::size_t size() const { return elems.size(); }
  Tracked& operator[](std::size_t i) { return elems[i]; }
  const Tracked& operator[](std::size_t i) const { return elems[i]; }
};

// All arithmetic goes through a context carrying the working format and the
// rounding mode, so a whole computation shares one policy.
struct FxContext {
  FxFormat fmt;
  RoundingMode rounding = RoundingMode::Floor;

  // --- raw value layer -----------------------------------------------------

  FxValue from_raw(std::int64_t raw) const;
  FxValue quantize(const Rat& x) const;

  FxValue add(FxValue a, FxValue b) const;
  FxValue sub(FxValue a, FxValue b) const;
  FxValue mul(FxValue a, FxValue b) const;
  FxValue clamp(FxValue x, FxValue lo, FxValue hi) const;

  // --- tracked layer -------------------------------------------------------

  // Fresh input: a representable value carries no error.
  Tracked track(FxValue v) const { return Tracked{v, v.value()}; }
  Tracked track_raw(std::int64_t raw) const { return track(from_raw(raw)); }
  // Quantize an exact input, then track it (err = 0 by construction).
  Tracked quantize_tracked(const Rat& x) const { return track(quantize(x)); }

  Tracked add(const Tracked& a, const Tracked& b) const;
  Tracked sub(const Tracked& a, const Tracked& b) const;
  Tracked mul(const Tracked& a, const Tracked& b) const;
  Tracked clamp(const Tracked& x, FxValue lo, FxValue hi) const;

  // Inner product: every scalar product is rounded once to q fractional
  // bits; partial sums are exact integer additions (overflow-checked).
  Tracked dot(const TrackedVector& a, const TrackedVector& b) const;

  // Row-wise dot of a representable matrix (row-major, n_rows x n_cols raws
  // at this context's format) with x.
  TrackedVector matvec(std::span<const std::int64_t> m_raw, std::size_t n_rows,
                       std::size_t n_cols, const TrackedVector& x) const;

  TrackedVector track_vector(std::span<const std::int64_t> raws) const;

 private:
  std::int64_t round_product(__int128 wide, int shift) const;
  void check(std::int64_t raw, const char* op) const;
};

// Rounds an integer scaled by 2^shift down to scale 1, per mode. Returned
// wide so callers can range-check before narrowing.
__int128 round_shift(__int128 value, int shift, RoundingMode mode);

}  // namespace fpcert
