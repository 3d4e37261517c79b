#include "fpcert/step_kernel.hpp"

#include <cstdlib>

namespace fpcert {

namespace {

inline __int128 iabs(__int128 v) { return v < 0 ? -v : v; }

inline unsigned __int128 usquare(__int128 v) {
  unsigned __int128 m = static_cast<unsigned __int128>(iabs(v));
  return m * m;
}

}  // namespace

StepKernel::StepKernel(const BoxQp& qp, FxFormat solver_fmt, RoundingMode rounding, FxValue tau,
                       FxValue eps_hat)
    : n_(qp.n), fmt_(solver_fmt), mode_(rounding), shadow_frac_(3 * solver_fmt.frac_bits),
      data_shift_(solver_fmt.frac_bits - qp.data_fmt.frac_bits), raw_lim_(solver_fmt.raw_limit()),
      tau_raw_(tau.raw), eps_hat_raw_(eps_hat.raw) {
  const int q = solver_fmt.frac_bits;
  const int shift = data_shift_;
  if (shift < 0) throw std::invalid_argument("StepKernel: solver format coarser than data");

  auto lift_checked = [&](std::int64_t r, bool* ok) -> std::int64_t {
    __int128 w = static_cast<__int128>(r) << shift;
    if (w >= raw_lim_ || w <= -raw_lim_) *ok = false;
    return static_cast<std::int64_t>(w);
  };
  bool ok = true;
  q_lift_.reserve(qp.q_mat.raw.size());
  for (auto r : qp.q_mat.raw) q_lift_.push_back(lift_checked(r, &ok));
  for (auto r : qp.c) c_lift_.push_back(lift_checked(r, &ok));
  for (auto r : qp.lower) l_lift_.push_back(lift_checked(r, &ok));
  for (auto r : qp.upper) u_lift_.push_back(lift_checked(r, &ok));
  if (!ok) throw OverflowError("StepKernel: problem data not representable at solver format");
  for (std::size_t i = 0; i < n_; ++i) c_cap_.push_back(std::llabs(qp.c[i]));

  for (std::size_t i = 0; i < n_; ++i) {
    l_shadow_.push_back(static_cast<__int128>(l_lift_[i]) << (2 * q));
    u_shadow_.push_back(static_cast<__int128>(u_lift_[i]) << (2 * q));
  }

  // Applicability: every exact intermediate must fit 128 bits with margin.
  // Shadows live at F = 3q fractional bits; the largest shadow magnitude is
  // bounded by the gradient sum bound; squared error terms are bounded via
  // per-operation worst cases. All checked in exact rational arithmetic.
  const Rat pow_f = rat_pow2(shadow_frac_);
  const Rat res = rat_pow2(-q);
  Rat xmax = 0, sum_bound = 0, diff_bound = 0;
  for (std::size_t i = 0; i < n_; ++i) {
    Rat lo = rat_from_raw(l_lift_[i], q), hi = rat_from_raw(u_lift_[i], q);
    Rat m = abs(lo) > abs(hi) ? abs(lo) : abs(hi);
    if (m > xmax) xmax = m;
    if (hi - lo > diff_bound) diff_bound = hi - lo;
  }
  for (std::size_t i = 0; i < n_; ++i) {
    Rat row = 0;
    for (std::size_t j = 0; j < n_; ++j) row += abs(rat_from_raw(q_lift_[i * n_ + j], q));
    Rat b = row * xmax + abs(rat_from_raw(c_lift_[i], q)) + Rat(n_) * res;
    if (b > sum_bound) sum_bound = b;
  }
  const Rat tau_rat = tau.value();
  Rat g_bound = tau_rat * sum_bound + res;
  Rat err_bound = tau_rat * Rat(n_) * res + res;           // per-component gradient error
  Rat exit_diff = diff_bound + err_bound + 1;               // covers exit-region shadows
  Rat lim126 = rat_pow2(125);
  Rat nn(n_ == 0 ? 1 : n_);
  bool fits = true;
  auto need = [&](const Rat& v) {
    if (v * pow_f >= rat_pow2(120)) fits = false;           // raw shadow magnitudes
  };
  need(sum_bound);
  need(g_bound + xmax);
  need(xmax + 1);
  auto need_sq = [&](const Rat& v) {
    Rat scaled = v * pow_f;
    if (nn * scaled * scaled >= lim126) fits = false;       // squared accumulations
  };
  need_sq(err_bound);
  need_sq(exit_diff);
  need_sq(diff_bound + 1);
  supported_ = fits;
}

void StepKernel::set_c(const std::vector<std::int64_t>& c_raw) {
  if (c_raw.size() != n_) throw std::invalid_argument("StepKernel::set_c: dimension mismatch");
  for (std::size_t i = 0; i < n_; ++i) {
    if (std::llabs(c_raw[i]) > c_cap_[i])
      throw std::invalid_argument("StepKernel::set_c: |c| exceeds the analyzed magnitude");
    c_lift_[i] = c_raw[i] << data_shift_;
  }
}

void StepKernel::eval(const std::int64_t* x_raw, unsigned want, Result& out) const {
  const int q = fmt_.frac_bits;
  out.overflow = false;
  out.exited = false;
  out.dhat2_raw = 0;
  out.err_g_sq = 0;
  out.delta_sq = 0;
  out.omega_sq = 0;
  out.theta_sq = 0;
  out.x_next.resize(n_);

  const __int128 lim = raw_lim_;
  unsigned __int128 err_g_sq = 0, delta_sq = 0, omega_sq = 0, theta_sq = 0;
  std::int64_t dhat2 = 0;

  const bool want_err = want & WantErrG;
  const bool want_delta = want & WantDelta;
  const bool want_omega = want & WantOmega;
  const bool want_theta = want & WantTheta;

  for (std::size_t i = 0; i < n_; ++i) {
    // per-row dot with one rounding per product, exact partial sums
    std::int64_t acc_fx = 0;
    __int128 acc_sh = 0;  // 2q fractional bits
    const std::int64_t* row = q_lift_.data() + i * n_;
    for (std::size_t j = 0; j < n_; ++j) {
      __int128 wide = static_cast<__int128>(row[j]) * x_raw[j];  // 2q bits
      __int128 rounded = round_shift(wide, q, mode_);
      if (rounded >= lim || rounded <= -lim) {
        out.overflow = true;
        return;
      }
      acc_fx += static_cast<std::int64_t>(rounded);
      if (acc_fx >= lim || acc_fx <= -lim) {
        out.overflow = true;
        return;
      }
      acc_sh += wide;
    }
    // exact addition of c
    acc_fx += c_lift_[i];
    if (acc_fx >= lim || acc_fx <= -lim) {
      out.overflow = true;
      return;
    }
    acc_sh += static_cast<__int128>(c_lift_[i]) << q;
    // one rounded multiplication by tau
    __int128 g_wide = static_cast<__int128>(acc_fx) * tau_raw_;  // 2q bits
    __int128 g_rounded = round_shift(g_wide, q, mode_);
    if (g_rounded >= lim || g_rounded <= -lim) {
      out.overflow = true;
      return;
    }
    std::int64_t g_fx = static_cast<std::int64_t>(g_rounded);
    __int128 g_sh = static_cast<__int128>(tau_raw_) * acc_sh;  // F = 3q bits

    // exact subtraction and clamp
    std::int64_t moved_fx = x_raw[i] - g_fx;
    if (moved_fx >= lim || moved_fx <= -lim) {
      out.overflow = true;
      return;
    }
    __int128 moved_sh = (static_cast<__int128>(x_raw[i]) << (2 * q)) - g_sh;
    std::int64_t next_fx =
        moved_fx < l_lift_[i] ? l_lift_[i] : (moved_fx > u_lift_[i] ? u_lift_[i] : moved_fx);
    __int128 next_sh =
        moved_sh < l_shadow_[i] ? l_shadow_[i] : (moved_sh > u_shadow_[i] ? u_shadow_[i] : moved_sh);
    out.x_next[i] = next_fx;

    // fixed-point ||x - x_next||^2 with one rounding per square
    std::int64_t diff_fx = x_raw[i] - next_fx;
    if (diff_fx >= lim || diff_fx <= -lim) {
      out.overflow = true;
      return;
    }
    __int128 sq_wide = static_cast<__int128>(diff_fx) * diff_fx;
    __int128 sq_rounded = round_shift(sq_wide, q, mode_);
    if (sq_rounded >= lim || sq_rounded <= -lim) {
      out.overflow = true;
      return;
    }
    dhat2 += static_cast<std::int64_t>(sq_rounded);
    if (dhat2 >= lim) {
      out.overflow = true;
      return;
    }

    if (want_err) {
      __int128 e = g_sh - (static_cast<__int128>(g_fx) << (2 * q));
      err_g_sq += usquare(e);
    }
    if (want_delta) {
      __int128 sdiff = (static_cast<__int128>(x_raw[i]) << (2 * q)) - next_sh;
      delta_sq += usquare(sdiff);
    }
    if (want_omega) {
      __int128 e = next_sh - (static_cast<__int128>(next_fx) << (2 * q));
      omega_sq += usquare(e);
    }
    if (want_theta) {
      __int128 vdiff = static_cast<__int128>(diff_fx) << (2 * q);
      theta_sq += usquare(vdiff);
    }
  }

  out.dhat2_raw = dhat2;
  out.exited = dhat2 < eps_hat_raw_;
  out.err_g_sq = err_g_sq;
  out.delta_sq = delta_sq;
  out.omega_sq = omega_sq;
  out.theta_sq = theta_sq;
}

}  // namespace fpcert
