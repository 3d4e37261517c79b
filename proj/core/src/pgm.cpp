#include "fpcert/pgm.hpp"

#include <sstream>

namespace fpcert {

RatVec composite_map(const BoxQp& qp, const Rat& tau, const RatVec& x) {
  RatVec g = grad(qp, x);
  RatVec y(qp.n);
  for (std::size_t i = 0; i < qp.n; ++i) {
    Rat v = x[i] - tau * g[i];
    Rat lo = qp.lower_rat(i), hi = qp.upper_rat(i);
    y[i] = v < lo ? lo : (v > hi ? hi : v);
  }
  return y;
}

std::vector<RatVec> pgm_exact(const BoxQp& qp, const Rat& tau, RatVec x0, long k) {
  std::vector<RatVec> seq;
  seq.reserve(static_cast<std::size_t>(k) + 1);
  seq.push_back(std::move(x0));
  for (long i = 0; i < k; ++i) seq.push_back(composite_map(qp, tau, seq.back()));
  return seq;
}

namespace {

// Problem data lifted onto the solver grid (exact: q >= q').
struct LiftedData {
  std::vector<std::int64_t> q_raw, c_raw, l_raw, u_raw;
};

LiftedData lift(const BoxQp& qp, FxFormat solver_fmt) {
  int shift = solver_fmt.frac_bits - qp.data_fmt.frac_bits;
  if (shift < 0) throw std::invalid_argument("pgm_fixed: solver format coarser than data");
  const std::int64_t lim = solver_fmt.raw_limit();
  auto up = [&](std::int64_t r) {
    __int128 w = static_cast<__int128>(r) << shift;
    if (w >= lim || w <= -lim) throw OverflowError("pgm_fixed: data not representable at solver format");
    return static_cast<std::int64_t>(w);
  };
  LiftedData d;
  d.q_raw.reserve(qp.q_mat.raw.size());
  for (auto r : qp.q_mat.raw) d.q_raw.push_back(up(r));
  for (auto r : qp.c) d.c_raw.push_back(up(r));
  for (auto r : qp.lower) d.l_raw.push_back(up(r));
  for (auto r : qp.upper) d.u_raw.push_back(up(r));
  return d;
}

}  // namespace

Tracked dhat2(const FxContext& ctx, const TrackedVector& a, const TrackedVector& b) {
  if (a.size() != b.size()) throw std::invalid_argument("dhat2: length mismatch");
  TrackedVector diff{{}, ctx.fmt};
  diff.elems.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff.elems.push_back(ctx.sub(a[i], b[i]));
  return ctx.dot(diff, diff);
}

TrackedStep tracked_step(const BoxQp& qp, FxFormat solver_fmt, RoundingMode rounding, FxValue tau,
                         const std::vector<std::int64_t>& x_raw) {
  if (x_raw.size() != qp.n) throw std::invalid_argument("tracked_step: dimension mismatch");
  FxContext ctx{solver_fmt, rounding};
  LiftedData data = lift(qp, solver_fmt);

  TrackedVector x = ctx.track_vector(x_raw);
  Tracked tau_t = ctx.track(tau);

  TrackedStep out;
  out.g.fmt = solver_fmt;
  out.x_next.fmt = solver_fmt;
  TrackedVector qx = ctx.matvec(data.q_raw, qp.n, qp.n, x);
  for (std::size_t i = 0; i < qp.n; ++i) {
    Tracked s = ctx.add(qx[i], ctx.track_raw(data.c_raw[i]));
    Tracked g_i = ctx.mul(s, tau_t);
    out.g.elems.push_back(g_i);
    Tracked moved = ctx.sub(x[i], g_i);
    out.x_next.elems.push_back(
        ctx.clamp(moved, FxValue{data.l_raw[i], solver_fmt}, FxValue{data.u_raw[i], solver_fmt}));
  }
  out.d2 = dhat2(ctx, x, out.x_next);
  return out;
}

PgmTrace pgm_fixed(const BoxQp& qp, FxFormat solver_fmt, RoundingMode rounding, FxValue tau,
                   const std::vector<std::int64_t>& x0_raw, FxValue eps_hat, long k_max,
                   TraceRetention retention) {
  if (eps_hat.raw <= 0) throw std::invalid_argument("pgm_fixed: eps_hat must be positive");
  if (k_max < 0) throw std::invalid_argument("pgm_fixed: negative k_max");
  {
    LiftedData data = lift(qp, solver_fmt);
    for (std::size_t i = 0; i < qp.n; ++i)
      if (x0_raw.at(i) < data.l_raw[i] || x0_raw.at(i) > data.u_raw[i])
        throw std::invalid_argument("pgm_fixed: x0 outside the box");
  }
  PgmTrace trace;
  const bool full = retention == TraceRetention::Full;
  if (full) trace.iterates.push_back(x0_raw);

  std::vector<std::int64_t> x = x0_raw;
  for (long k = 0; k < k_max; ++k) {
    TrackedStep step = tracked_step(qp, solver_fmt, rounding, tau, x);
    std::vector<std::int64_t> next(qp.n);
    Rat err_sq = 0;
    for (std::size_t i = 0; i < qp.n; ++i) {
      next[i] = step.x_next[i].fx.raw;
      Rat e = step.x_next[i].err();
      err_sq += e * e;
    }
    trace.steps = k + 1;
    if (full) {
      trace.iterates.push_back(next);
      trace.dhat2_raw.push_back(step.d2.fx.raw);
      trace.err_norm_sq.push_back(err_sq);
    }
    trace.final_raw = next;
    trace.final_dhat2_raw = step.d2.fx.raw;
    trace.final_err_norm_sq = err_sq;
    x = std::move(next);
    if (step.d2.fx.raw < eps_hat.raw) {
      trace.exit = PgmTrace::Exit::ToleranceHit;
      return trace;
    }
  }
  trace.exit = PgmTrace::Exit::KmaxHit;
  if (trace.final_raw.empty()) trace.final_raw = x0_raw;  // k_max == 0
  return trace;
}

ReferenceSolution solve_reference(const BoxQp& qp, const Rat& tau, const Rat& tol, long iter_cap) {
  qp.validate_shape();
  if (!(tol > 0)) throw std::invalid_argument("solve_reference: tol must be positive");
  // Iterates are snapped to a fine dyadic grid each step to keep rational
  // operands small; the residual test at the end is exact.
  constexpr int kSnapBits = 256;
  RatVec x(qp.n);
  for (std::size_t i = 0; i < qp.n; ++i) x[i] = (qp.lower_rat(i) + qp.upper_rat(i)) / 2;

  Rat tol_sq = tol * tol;
  for (long k = 0; k < iter_cap; ++k) {
    RatVec y = composite_map(qp, tau, x);
    for (std::size_t i = 0; i < qp.n; ++i) {
      Rat scaled = y[i] * rat_pow2(kSnapBits);
      Int num;
      mpz_fdiv_q(num.get_mpz_t(), scaled.get_num_mpz_t(), scaled.get_den_mpz_t());
      Rat snapped = Rat(num) * rat_pow2(-kSnapBits);
      Rat lo = qp.lower_rat(i), hi = qp.upper_rat(i);
      y[i] = snapped < lo ? lo : (snapped > hi ? hi : snapped);
    }
    x = std::move(y);
    if ((k & 0x7) == 0x7 || k + 1 == iter_cap) {
      RatVec tx = composite_map(qp, tau, x);
      Rat res = 0, norm = 0;
      for (std::size_t i = 0; i < qp.n; ++i) {
        Rat d = x[i] - tx[i];
        res += d * d;
        norm += x[i] * x[i];
      }
      if (res <= tol_sq * (1 + norm)) {
        ReferenceSolution sol;
        sol.x = x;
        sol.f = f_value(qp, x);
        sol.residual_norm_sq = res;
        sol.iterations = k + 1;
        return sol;
      }
    }
  }
  throw std::runtime_error("solve_reference: iteration cap reached");
}

std::string trace_to_csv(const PgmTrace& t) {
  std::ostringstream out;
  out << "k";
  std::size_t n = t.final_raw.size();
  for (std::size_t i = 0; i < n; ++i) out << ",x" << i << "_raw";
  out << ",dhat2_raw,err_norm_sq\n";
  if (!t.iterates.empty()) {
    for (std::size_t k = 0; k + 1 < t.iterates.size(); ++k) {
      out << (k + 1);
      for (auto r : t.iterates[k + 1]) out << "," << r;
      out << "," << t.dhat2_raw[k] << "," << rat_to_decimal(t.err_norm_sq[k], 40) << "\n";
    }
  } else {
    out << t.steps;
    for (auto r : t.final_raw) out << "," << r;
    out << "," << t.final_dhat2_raw << "," << rat_to_decimal(t.final_err_norm_sq, 40) << "\n";
  }
  return out.str();
}

}  // namespace fpcert
