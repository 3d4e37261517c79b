#pragma once

#include <cstdint>
#include <vector>

#include "fpcert/fixedpoint.hpp"
#include "fpcert/qp.hpp"

namespace fpcert {

// One exact projected-gradient step: clamp(x - tau * (Qx + c)) onto [l, u].
RatVec composite_map(const BoxQp& qp, const Rat& tau, const RatVec& x);

// k exact steps; returns x^0 .. x^k.
std::vector<RatVec> pgm_exact(const BoxQp& qp, const Rat& tau, RatVec x0, long k);

enum class TraceRetention { Full, ExitOnly };

struct PgmTrace {
  enum class Exit { ToleranceHit, KmaxHit };
  Exit exit = Exit::KmaxHit;
  long steps = 0;  // number of iterates computed after x^0

  // Per step (full retention): iterate raws, fixed-point squared step length,
  // and the exact squared error norm of the new iterate.
  std::vector<std::vector<std::int64_t>> iterates;  // x^0 .. x^steps
  std::vector<std::int64_t> dhat2_raw;
  std::vector<Rat> err_norm_sq;

  std::vector<std::int64_t> final_raw;
  std::int64_t final_dhat2_raw = 0;
  Rat final_err_norm_sq;
};

// Fixed-point solver. Each step evaluates tau*(Q x + c) as: per-row dot of Q
// with x (one rounding per product), exact addition of c, one rounded
// multiplication by tau; then exact subtraction and clamp. The exact shadow
// of the produced iterate equals composite_map of the previous one.
PgmTrace pgm_fixed(const BoxQp& qp, FxFormat solver_fmt, RoundingMode rounding, FxValue tau,
                   const std::vector<std::int64_t>& x0_raw, FxValue eps_hat, long k_max,
                   TraceRetention retention = TraceRetention::Full);

// Exact subtraction followed by a fixed-point inner product of the
// difference with itself.
Tracked dhat2(const FxContext& ctx, const TrackedVector& a, const TrackedVector& b);

// One tracked fixed-point PGM step; building block shared by pgm_fixed and
// the verification programs.
struct TrackedStep {
  TrackedVector x_next;
  TrackedVector g;       // the rounded gradient step tau*(Qx+c)
  Tracked d2;            // fixed-point ||x - x_next||^2 with exact shadow
};
TrackedStep tracked_step(const BoxQp& qp, FxFormat solver_fmt, RoundingMode rounding, FxValue tau,
                         const std::vector<std::int64_t>& x_raw);

struct ReferenceSolution {
  RatVec x;
  Rat f;
  Rat residual_norm_sq;  // ||x - T(x)||^2, exact
  long iterations = 0;
};

// High-accuracy reference optimum by iterating the exact map until
// ||x - T(x)||^2 <= tol^2 * (1 + ||x||^2).
ReferenceSolution solve_reference(const BoxQp& qp, const Rat& tau, const Rat& tol,
                                  long iter_cap = 2000000);

// Trace CSV: k, iterate raws, dhat2 raw, exact error norm (decimal).
std::string trace_to_csv(const PgmTrace& t);

}  // namespace fpcert
