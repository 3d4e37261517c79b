#include "fpcert/certify.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <random>
#include <thread>

#include "fpcert/pgm.hpp"
#include "fpcert/step_kernel.hpp"

namespace fpcert {

std::string to_string(QueryKind k) {
  switch (k) {
    case QueryKind::OmegaSq: return "omega_sq";
    case QueryKind::AssumptionEps: return "assumption_eps";
    case QueryKind::DeltaSq: return "delta_sq";
    case QueryKind::OmegaSmallSq: return "omega_small_sq";
    case QueryKind::ThetaSq: return "theta_sq";
    case QueryKind::NoOverflow: return "no_overflow";
  }
  return "?";
}

std::string to_string(Verdict::Kind k) {
  switch (k) {
    case Verdict::Kind::Pass: return "PASS";
    case Verdict::Kind::Fail: return "FAIL";
    case Verdict::Kind::Unknown: return "UNKNOWN";
  }
  return "?";
}

std::string backend_name(const Backend& b) {
  if (std::holds_alternative<ExhaustiveBackend>(b)) return "exhaustive";
  if (std::holds_alternative<RandomFalsifyBackend>(b)) return "falsify";
  return "analytic";
}

namespace {

using u64 = std::uint64_t;
using u128 = unsigned __int128;
using i128 = __int128;

constexpr u64 kNoIndex = ~u64{0};

struct DecodedPoint {
  std::size_t qi = 0;
  std::vector<std::int64_t> c_raw, l_raw, u_raw;  // data format
  std::vector<std::int64_t> x_raw;                // solver format
};

unsigned want_mask(QueryKind k) {
  switch (k) {
    case QueryKind::OmegaSq: return StepKernel::WantErrG;
    case QueryKind::AssumptionEps: return StepKernel::WantExit | StepKernel::WantDelta;
    case QueryKind::DeltaSq: return StepKernel::WantExit | StepKernel::WantDelta;
    case QueryKind::OmegaSmallSq: return StepKernel::WantExit | StepKernel::WantOmega;
    case QueryKind::ThetaSq: return StepKernel::WantExit | StepKernel::WantTheta;
    case QueryKind::NoOverflow: return StepKernel::WantExit;
  }
  return 0;
}

// threshold * 2^{2F} as an integer window for kernel-side comparisons
struct ScaledThreshold {
  bool negative = false;   // threshold < 0: every nonnegative quantity exceeds it
  bool saturated = false;  // too large for 128 bits: nothing exceeds it
  u128 floor_val = 0;
  u128 ceil_val = 0;
};

bool int_to_u128(const Int& z, u128* out) {
  if (sgn(z) < 0) return false;
  if (mpz_sizeinbase(z.get_mpz_t(), 2) > 126) return false;
  Int hi = z >> 64;
  Int lo = z - (hi << 64);
  *out = (static_cast<u128>(hi.get_ui()) << 64) | static_cast<u128>(lo.get_ui());
  return true;
}

ScaledThreshold scale_threshold(const Rat& thr, int two_f) {
  ScaledThreshold st;
  if (thr < 0) {
    st.negative = true;
    return st;
  }
  Int num = thr.get_num();
  mpz_mul_2exp(num.get_mpz_t(), num.get_mpz_t(), static_cast<unsigned long>(two_f));
  Int fl, cl;
  mpz_fdiv_q(fl.get_mpz_t(), num.get_mpz_t(), thr.get_den_mpz_t());
  mpz_cdiv_q(cl.get_mpz_t(), num.get_mpz_t(), thr.get_den_mpz_t());
  if (!int_to_u128(fl, &st.floor_val) || !int_to_u128(cl, &st.ceil_val)) {
    st.saturated = true;
  }
  return st;
}

// ---------------------------------------------------------------------------
// Enumeration space: lexicographic over (Q index, l grid, u grid, c grid,
// x grid); x is enumerated on the solver grid of the realized box.
// ---------------------------------------------------------------------------

struct Axis {
  std::int64_t lo = 0;
  u64 count = 1;
  std::int64_t stride = 1;
  std::int64_t decode(u64 i) const { return lo + static_cast<std::int64_t>(i) * stride; }
};

class SearchSpace {
 public:
  SearchSpace(const ProblemFamily& fam, FxValue tau, FxValue eps_hat, u64 c_stride)
      : fam_(&fam), tau_(tau), eps_hat_(eps_hat) {
    fam.validate();
    n_ = fam.n;
    shift_ = fam.solver_fmt.frac_bits - fam.data_fmt.frac_bits;
    for (std::size_t i = 0; i < n_; ++i) {
      c_axes_.push_back(make_axis(fam.c_min[i], fam.c_max[i], static_cast<std::int64_t>(c_stride)));
      l_axes_.push_back(make_axis(fam.l_min[i], fam.l_max[i], 1));
      u_axes_.push_back(make_axis(fam.u_min[i], fam.u_max[i], 1));
    }
    q_n_ = fam.q_set.size();
    c_n_ = prod(c_axes_);
    l_n_ = prod(l_axes_);
    u_n_ = prod(u_axes_);

    countable_ = true;
    u128 per_q = 0;
    lu_sizes_.resize(check_mul(l_n_, u_n_), 0);
    std::vector<std::int64_t> l(n_), u(n_);
    for (u64 li = 0; li < l_n_; ++li) {
      decode_axes(l_axes_, li, l);
      for (u64 ui = 0; ui < u_n_; ++ui) {
        decode_axes(u_axes_, ui, u);
        u128 xc = 1;
        for (std::size_t i = 0; i < n_; ++i) {
          u128 cnt = static_cast<u128>((u[i] - l[i]) << shift_) + 1;
          xc *= cnt;
          if (xc > (u128{1} << 100)) countable_ = false;
        }
        u128 block = xc * c_n_;
        per_q += block;
        if (per_q > (u128{1} << 100)) countable_ = false;
        if (countable_) lu_sizes_[li * u_n_ + ui] = static_cast<u64>(block);
      }
    }
    total128_ = per_q * q_n_;
    if (total128_ > (u128{1} << 63)) countable_ = false;
    if (countable_) {
      total_ = static_cast<u64>(total128_);
      per_q_u64_ = static_cast<u64>(per_q);
      lu_prefix_.resize(lu_sizes_.size() + 1, 0);
      for (std::size_t i = 0; i < lu_sizes_.size(); ++i)
        lu_prefix_[i + 1] = lu_prefix_[i] + lu_sizes_[i];
    }
  }

  bool countable() const { return countable_; }
  u64 total() const { return total_; }
  std::size_t n() const { return n_; }
  int shift() const { return shift_; }
  const ProblemFamily& family() const { return *fam_; }
  FxValue tau() const { return tau_; }
  FxValue eps_hat() const { return eps_hat_; }
  u64 q_count() const { return q_n_; }
  const std::vector<Axis>& c_axes() const { return c_axes_; }
  const std::vector<Axis>& l_axes() const { return l_axes_; }
  const std::vector<Axis>& u_axes() const { return u_axes_; }

  void decode(u64 g, DecodedPoint& p) const {
    p.qi = static_cast<std::size_t>(g / per_q_u64_);
    u64 r = g % per_q_u64_;
    auto it = std::upper_bound(lu_prefix_.begin(), lu_prefix_.end(), r);
    std::size_t lu = static_cast<std::size_t>(it - lu_prefix_.begin()) - 1;
    r -= lu_prefix_[lu];
    u64 li = lu / u_n_, ui = lu % u_n_;
    p.c_raw.resize(n_);
    p.l_raw.resize(n_);
    p.u_raw.resize(n_);
    p.x_raw.resize(n_);
    decode_axes(l_axes_, li, p.l_raw);
    decode_axes(u_axes_, ui, p.u_raw);
    u64 xcount = lu_sizes_[lu] / c_n_;
    u64 ci = r / xcount;
    u64 xi = r % xcount;
    decode_axes(c_axes_, ci, p.c_raw);
    // x: mixed radix over lifted per-coordinate ranges, coordinate 0 most
    // significant
    for (std::size_t i = n_; i-- > 0;) {
      u64 cnt = static_cast<u64>((p.u_raw[i] - p.l_raw[i]) << shift_) + 1;
      p.x_raw[i] = (p.l_raw[i] << shift_) + static_cast<std::int64_t>(xi % cnt);
      xi /= cnt;
    }
  }

  static Axis make_axis(std::int64_t lo, std::int64_t hi, std::int64_t stride) {
    Axis a;
    a.lo = lo;
    a.stride = stride;
    a.count = hi >= lo ? static_cast<u64>((hi - lo) / stride) + 1 : 0;
    return a;
  }

  static void decode_axes(const std::vector<Axis>& axes, u64 idx, std::vector<std::int64_t>& out) {
    for (std::size_t i = axes.size(); i-- > 0;) {
      out[i] = axes[i].decode(idx % axes[i].count);
      idx /= axes[i].count;
    }
  }

 private:
  static u64 prod(const std::vector<Axis>& axes) {
    u128 p = 1;
    for (const auto& a : axes) {
      p *= a.count;
      if (p > (u128{1} << 62)) throw SearchSpaceTooLargeError("axis product exceeds 2^62");
    }
    return static_cast<u64>(p);
  }
  static u64 check_mul(u64 a, u64 b) {
    u128 p = static_cast<u128>(a) * b;
    if (p > (u128{1} << 40)) throw SearchSpaceTooLargeError("l/u grid product too large");
    return static_cast<u64>(p);
  }

  const ProblemFamily* fam_;
  FxValue tau_, eps_hat_;
  std::size_t n_ = 0;
  int shift_ = 0;
  std::vector<Axis> c_axes_, l_axes_, u_axes_;
  u64 q_n_ = 1, c_n_ = 1, l_n_ = 1, u_n_ = 1;
  std::vector<u64> lu_sizes_, lu_prefix_;
  u64 per_q_u64_ = 0;
  u64 total_ = 0;
  u128 total128_ = 0;
  bool countable_ = false;
};

// Tracked-path quantities for one point (the slow, fully general route).
struct TrackedQuant {
  bool overflow = false;
  bool exited = false;
  Rat err_g_sq, delta_sq, omega_sq, theta_sq;
};

TrackedQuant tracked_quantities(const ProblemFamily& fam, const DecodedPoint& p, FxValue tau,
                                FxValue eps_hat) {
  TrackedQuant out;
  BoxQp qp = fam.realization(p.qi, p.c_raw, p.l_raw, p.u_raw);
  try {
    TrackedStep step = tracked_step(qp, fam.solver_fmt, fam.rounding, tau, p.x_raw);
    out.exited = step.d2.fx.raw < eps_hat.raw;
    out.err_g_sq = 0;
    out.delta_sq = 0;
    out.omega_sq = 0;
    out.theta_sq = 0;
    for (std::size_t i = 0; i < qp.n; ++i) {
      Rat x_i = rat_from_raw(p.x_raw[i], fam.solver_fmt.frac_bits);
      Rat eg = step.g[i].err();
      out.err_g_sq += eg * eg;
      Rat sd = x_i - step.x_next[i].shadow;
      out.delta_sq += sd * sd;
      Rat en = step.x_next[i].err();
      out.omega_sq += en * en;
      Rat vd = x_i - step.x_next[i].value();
      out.theta_sq += vd * vd;
    }
  } catch (const OverflowError&) {
    out.overflow = true;
  }
  return out;
}

Rat query_quantity(const TrackedQuant& t, QueryKind which) {
  switch (which) {
    case QueryKind::OmegaSq: return t.err_g_sq;
    case QueryKind::AssumptionEps: return t.delta_sq;  // exact(d)
    case QueryKind::DeltaSq: return t.delta_sq;
    case QueryKind::OmegaSmallSq: return t.omega_sq;
    case QueryKind::ThetaSq: return t.theta_sq;
    case QueryKind::NoOverflow: return Rat(t.overflow ? 1 : 0);
  }
  return Rat(0);
}

u128 kernel_quantity(const StepKernel::Result& r, QueryKind which) {
  switch (which) {
    case QueryKind::OmegaSq: return r.err_g_sq;
    case QueryKind::AssumptionEps: return r.delta_sq;
    case QueryKind::DeltaSq: return r.delta_sq;
    case QueryKind::OmegaSmallSq: return r.omega_sq;
    case QueryKind::ThetaSq: return r.theta_sq;
    case QueryKind::NoOverflow: return 0;
  }
  return 0;
}

// violation predicates -------------------------------------------------------

bool kernel_violates(const StepKernel::Result& r, QueryKind which, const ScaledThreshold& st) {
  if (which == QueryKind::NoOverflow) return r.overflow;
  switch (which) {
    case QueryKind::OmegaSq:
      if (st.negative) return true;
      return !st.saturated && r.err_g_sq > st.floor_val;
    case QueryKind::AssumptionEps:
      if (r.exited) return false;
      if (st.negative) return false;
      return st.saturated || r.delta_sq < st.ceil_val;
    case QueryKind::DeltaSq:
      return r.exited && (st.negative || (!st.saturated && r.delta_sq > st.floor_val));
    case QueryKind::OmegaSmallSq:
      return r.exited && (st.negative || (!st.saturated && r.omega_sq > st.floor_val));
    case QueryKind::ThetaSq:
      return r.exited && (st.negative || (!st.saturated && r.theta_sq > st.floor_val));
    default: return false;
  }
}

bool tracked_violates(const TrackedQuant& t, QueryKind which, const Rat& thr) {
  if (which == QueryKind::NoOverflow) return t.overflow;
  switch (which) {
    case QueryKind::OmegaSq: return t.err_g_sq > thr;
    case QueryKind::AssumptionEps: return !t.exited && t.delta_sq < thr;
    case QueryKind::DeltaSq: return t.exited && t.delta_sq > thr;
    case QueryKind::OmegaSmallSq: return t.exited && t.omega_sq > thr;
    case QueryKind::ThetaSq: return t.exited && t.theta_sq > thr;
    default: return false;
  }
}

// ---------------------------------------------------------------------------
// Parallel deterministic scan. The enumeration index space is split into
// contiguous chunks; the reported event is always the smallest enumeration
// index regardless of completion order.
// ---------------------------------------------------------------------------

struct ScanShared {
  std::atomic<u64> first_violation{kNoIndex};
  std::atomic<u64> first_overflow{kNoIndex};  // overflow where it is an error
};

struct RealizationCursor {
  // Reusable state for a realization block (fixed qi, l, u).
  std::optional<StepKernel> kernel;
  bool use_kernel = false;
  BoxQp qp_template;  // c filled per realization
};

class Scanner {
 public:
  Scanner(const SearchSpace& space, QueryKind which, Rat threshold)
      : space_(space), which_(which), threshold_(std::move(threshold)) {
    two_f_ = 6 * space.family().solver_fmt.frac_bits;
    scaled_ = scale_threshold(threshold_, two_f_);
    want_ = want_mask(which_);
  }

  // Scans [beg, end); returns through `shared` (check mode) or local extremum
  // state (extremum mode).
  struct ExtremumState {
    bool have_kernel_best = false;
    u128 kernel_best = 0;
    u64 kernel_best_idx = kNoIndex;
    bool have_rat_best = false;
    Rat rat_best;
    u64 rat_best_idx = kNoIndex;
    u64 points = 0;
    bool minimize = false;

    void offer_kernel(u128 v, u64 idx) {
      if (!have_kernel_best || (minimize ? v < kernel_best : v > kernel_best)) {
        have_kernel_best = true;
        kernel_best = v;
        kernel_best_idx = idx;
      }
    }
    void offer_rat(const Rat& v, u64 idx) {
      if (!have_rat_best || (minimize ? v < rat_best : v > rat_best)) {
        have_rat_best = true;
        rat_best = v;
        rat_best_idx = idx;
      }
    }
  };

  void scan_check(u64 beg, u64 end, ScanShared& shared) const {
    run(beg, end, &shared, nullptr);
  }
  void scan_extremum(u64 beg, u64 end, ScanShared& shared, ExtremumState& ext) const {
    run(beg, end, &shared, &ext);
  }

 private:
  void run(u64 beg, u64 end, ScanShared* shared, ExtremumState* ext) const {
    if (beg >= end) return;
    DecodedPoint p;
    space_.decode(beg, p);
    const std::size_t n = space_.n();
    const auto& fam = space_.family();
    const int shift = space_.shift();

    // realization block state
    RealizationCursor cur;
    std::vector<std::int64_t> cur_l = p.l_raw, cur_u = p.u_raw;
    std::size_t cur_qi = p.qi;
    std::vector<std::int64_t> cur_c = p.c_raw;
    auto rebuild_block = [&]() {
      std::vector<std::int64_t> c_cap(n);
      for (std::size_t i = 0; i < n; ++i)
        c_cap[i] = std::max(std::llabs(fam.c_min[i]), std::llabs(fam.c_max[i]));
      cur.qp_template = fam.realization(cur_qi, c_cap, cur_l, cur_u);
      cur.kernel.emplace(cur.qp_template, fam.solver_fmt, fam.rounding, space_.tau(),
                         space_.eps_hat());
      cur.use_kernel = cur.kernel->supported();
      if (cur.use_kernel) cur.kernel->set_c(cur_c);
    };
    auto apply_c = [&]() {
      if (cur.use_kernel) cur.kernel->set_c(cur_c);
    };
    rebuild_block();

    StepKernel::Result res;
    DecodedPoint tracked_point;
    tracked_point.x_raw.resize(n);

    u64 g = beg;
    while (g < end) {
      if (shared) {
        u64 fv = shared->first_violation.load(std::memory_order_relaxed);
        u64 fo = shared->first_overflow.load(std::memory_order_relaxed);
        // nothing with a smaller enumeration index can be found past here
        if (!ext && std::min(fv, fo) < g) return;
        if (ext && fo < g) return;
      }
      bool violated = false;
      bool overflowed = false;
      if (cur.use_kernel) {
        cur.kernel->eval(p.x_raw.data(), want_, res);
        if (res.overflow) {
          overflowed = true;
          violated = which_ == QueryKind::NoOverflow;
        } else if (ext) {
          if (which_ == QueryKind::AssumptionEps) {
            if (!res.exited) ext->offer_kernel(kernel_quantity(res, which_), g);
          } else if (exit_conditioned(which_)) {
            if (res.exited) ext->offer_kernel(kernel_quantity(res, which_), g);
          } else {
            ext->offer_kernel(kernel_quantity(res, which_), g);
          }
        } else {
          violated = kernel_violates(res, which_, scaled_);
        }
      } else {
        tracked_point.qi = cur_qi;
        tracked_point.c_raw = cur_c;
        tracked_point.l_raw = cur_l;
        tracked_point.u_raw = cur_u;
        tracked_point.x_raw = p.x_raw;
        TrackedQuant t = tracked_quantities(fam, tracked_point, space_.tau(), space_.eps_hat());
        if (t.overflow) {
          overflowed = true;
          violated = which_ == QueryKind::NoOverflow;
        } else if (ext) {
          if (which_ == QueryKind::AssumptionEps) {
            if (!t.exited) ext->offer_rat(query_quantity(t, which_), g);
          } else if (exit_conditioned(which_)) {
            if (t.exited) ext->offer_rat(query_quantity(t, which_), g);
          } else {
            ext->offer_rat(query_quantity(t, which_), g);
          }
        } else {
          violated = tracked_violates(t, which_, threshold_);
        }
      }
      if (ext) ext->points++;

      if (overflowed && which_ != QueryKind::NoOverflow) {
        atomic_min(shared->first_overflow, g);
        return;
      }
      if (violated && shared) {
        atomic_min(shared->first_violation, g);
        return;
      }

      // advance: x odometer, then c, then (qi, l, u) block
      ++g;
      if (g >= end) break;
      if (!advance_x(p, cur_l, cur_u, shift)) {
        if (!advance_axes(space_.c_axes(), cur_c)) {
          // next (qi, l, u) block: decode fresh (rare)
          space_.decode(g, p);
          cur_qi = p.qi;
          cur_l = p.l_raw;
          cur_u = p.u_raw;
          cur_c = p.c_raw;
          rebuild_block();
          continue;
        }
        // reset x to block start
        for (std::size_t i = 0; i < n; ++i) p.x_raw[i] = cur_l[i] << shift;
        apply_c();
      }
    }
  }

  static bool exit_conditioned(QueryKind k) {
    return k == QueryKind::DeltaSq || k == QueryKind::OmegaSmallSq || k == QueryKind::ThetaSq;
  }

  static void atomic_min(std::atomic<u64>& a, u64 v) {
    u64 cur = a.load(std::memory_order_relaxed);
    while (v < cur && !a.compare_exchange_weak(cur, v, std::memory_order_relaxed)) {
    }
  }

  static bool advance_x(DecodedPoint& p, const std::vector<std::int64_t>& l,
                        const std::vector<std::int64_t>& u, int shift) {
    for (std::size_t i = p.x_raw.size(); i-- > 0;) {
      if (p.x_raw[i] < (u[i] << shift)) {
        ++p.x_raw[i];
        for (std::size_t j = i + 1; j < p.x_raw.size(); ++j) p.x_raw[j] = l[j] << shift;
        return true;
      }
    }
    return false;
  }

  static bool advance_axes(const std::vector<Axis>& axes, std::vector<std::int64_t>& vals) {
    for (std::size_t i = axes.size(); i-- > 0;) {
      std::int64_t hi = axes[i].decode(axes[i].count - 1);
      if (vals[i] < hi) {
        vals[i] += axes[i].stride;
        for (std::size_t j = i + 1; j < axes.size(); ++j) vals[j] = axes[j].lo;
        return true;
      }
    }
    return false;
  }

  const SearchSpace& space_;
  QueryKind which_;
  Rat threshold_;
  int two_f_;
  ScaledThreshold scaled_;
  unsigned want_ = 0;
};

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

Witness make_witness(const SearchSpace& space, u64 index, QueryKind which) {
  DecodedPoint p;
  space.decode(index, p);
  Witness w;
  w.q_index = p.qi;
  w.c_raw = p.c_raw;
  w.l_raw = p.l_raw;
  w.u_raw = p.u_raw;
  w.xhat_raw = p.x_raw;
  w.quantity = to_string(which);
  TrackedQuant t = tracked_quantities(space.family(), p, space.tau(), space.eps_hat());
  w.offending = query_quantity(t, which);
  return w;
}

[[noreturn]] void throw_overflow_at(const SearchSpace& space, u64 index) {
  DecodedPoint p;
  space.decode(index, p);
  std::string msg = "overflow during verification at x=[";
  for (std::size_t i = 0; i < p.x_raw.size(); ++i)
    msg += (i ? "," : "") + std::to_string(p.x_raw[i]);
  msg += "]; integer precision p is too small (run the overflow validation)";
  throw OverflowError(msg);
}

Verdict exhaustive_check(const ProblemFamily& fam, const BoundQuery& q, const ExhaustiveBackend& b) {
  SearchSpace space(fam, q.tau, q.eps_hat, b.c_stride);
  if (!space.countable() || space.total() > b.cap)
    throw SearchSpaceTooLargeError("exhaustive enumeration exceeds cap of " + std::to_string(b.cap) +
                                   " points");
  Scanner scanner(space, q.which, q.threshold);
  ScanShared shared;
  const u64 total = space.total();
  int threads = static_cast<int>(std::min<u64>(
      static_cast<u64>(resolve_threads(b.threads)), std::max<u64>(total / 4096, 1)));
  if (threads <= 1) {
    scanner.scan_check(0, total, shared);
  } else {
    std::vector<std::thread> pool;
    u64 chunk = total / threads + 1;
    for (int t = 0; t < threads; ++t) {
      u64 beg = t * chunk, end = std::min(total, beg + chunk);
      pool.emplace_back([&, beg, end] { scanner.scan_check(beg, end, shared); });
    }
    for (auto& th : pool) th.join();
  }
  u64 fo = shared.first_overflow.load();
  u64 fv = shared.first_violation.load();
  if (q.which != QueryKind::NoOverflow && fo < fv) throw_overflow_at(space, fo);
  if (fv != kNoIndex) return Verdict::fail(make_witness(space, fv, q.which));
  if (b.c_stride > 1)
    return Verdict::unknown("no violation on the coarsened c grid (stride " +
                            std::to_string(b.c_stride) + "); PASS is not sound under coarsening");
  return Verdict::pass();
}

Verdict falsify_check(const ProblemFamily& fam, const BoundQuery& q, const RandomFalsifyBackend& b) {
  SearchSpace space(fam, q.tau, q.eps_hat, 1);
  std::mt19937_64 rng(b.seed);
  const std::size_t n = fam.n;
  const int shift = space.shift();
  Rat thr = q.threshold;
  DecodedPoint p;
  p.c_raw.resize(n);
  p.l_raw.resize(n);
  p.u_raw.resize(n);
  p.x_raw.resize(n);
  for (u64 s = 0; s < b.samples; ++s) {
    p.qi = space.q_count() <= 1 ? 0 : static_cast<std::size_t>(rng() % space.q_count());
    for (std::size_t i = 0; i < n; ++i) {
      const auto& ca = space.c_axes()[i];
      p.c_raw[i] = ca.decode(rng() % ca.count);
      const auto& la = space.l_axes()[i];
      p.l_raw[i] = la.decode(rng() % la.count);
      const auto& ua = space.u_axes()[i];
      p.u_raw[i] = ua.decode(rng() % ua.count);
      u64 cnt = static_cast<u64>((p.u_raw[i] - p.l_raw[i]) << shift) + 1;
      p.x_raw[i] = (p.l_raw[i] << shift) + static_cast<std::int64_t>(rng() % cnt);
    }
    TrackedQuant t = tracked_quantities(fam, p, q.tau, q.eps_hat);
    bool violated = q.which == QueryKind::NoOverflow ? t.overflow
                                                     : tracked_violates(t, q.which, thr);
    if (t.overflow && q.which != QueryKind::NoOverflow)
      throw OverflowError("overflow during falsification sampling; integer precision too small");
    if (violated) {
      Witness w;
      w.q_index = p.qi;
      w.c_raw = p.c_raw;
      w.l_raw = p.l_raw;
      w.u_raw = p.u_raw;
      w.xhat_raw = p.x_raw;
      w.quantity = to_string(q.which);
      w.offending = query_quantity(t, q.which);
      return Verdict::fail(std::move(w));
    }
  }
  return Verdict::unknown("falsifier drew " + std::to_string(b.samples) +
                          " samples without finding a counterexample");
}

// Conservative closed-form bounds (the "standard theoretical" route).
struct AnalyticBounds {
  Rat err_comp;      // per-component gradient error
  Rat omega_an_sq;   // ||err(g)||^2 bound
  Rat theta_an_sq;   // exit-region ||x - x_next||^2 bound
  Rat delta_an_sq;
  Rat assumption_slack;  // exact(d) >= eps_hat - slack on the non-exit region
};

AnalyticBounds analytic_bounds(const ProblemFamily& fam, FxValue tau, FxValue eps_hat) {
  const int q = fam.solver_fmt.frac_bits;
  const Rat res = rat_pow2(-q);
  const Rat nn(static_cast<long>(fam.n));
  const Rat tau_rat = tau.value();
  AnalyticBounds ab;
  ab.err_comp = tau_rat * nn * res + res;
  ab.omega_an_sq = nn * ab.err_comp * ab.err_comp;
  Rat eps_hat_rat = eps_hat.value();
  ab.theta_an_sq = eps_hat_rat - res + nn * res;
  if (ab.theta_an_sq < 0) ab.theta_an_sq = 0;
  Rat delta = sqrt_upper(ab.theta_an_sq) + sqrt_upper(ab.omega_an_sq);
  ab.delta_an_sq = delta * delta;
  Rat slack = nn * res;
  for (std::size_t i = 0; i < fam.n; ++i) {
    Rat width = rat_from_raw(fam.u_max[i] - fam.l_min[i], fam.data_fmt.frac_bits);
    slack += ab.err_comp * (2 * width + ab.err_comp);
  }
  ab.assumption_slack = slack;
  return ab;
}

Verdict analytic_check(const ProblemFamily& fam, const BoundQuery& q) {
  AnalyticBounds ab = analytic_bounds(fam, q.tau, q.eps_hat);
  auto pass_if = [&](const Rat& bound) {
    if (q.threshold >= bound) return Verdict::pass();
    return Verdict::unknown("analytic worst-case bound " + rat_to_decimal(bound, 12) +
                            " exceeds the queried threshold");
  };
  switch (q.which) {
    case QueryKind::OmegaSq: return pass_if(ab.omega_an_sq);
    case QueryKind::OmegaSmallSq: return pass_if(ab.omega_an_sq);
    case QueryKind::ThetaSq: return pass_if(ab.theta_an_sq);
    case QueryKind::DeltaSq: return pass_if(ab.delta_an_sq);
    case QueryKind::AssumptionEps: {
      Rat floor_bound = q.eps_hat.value() - ab.assumption_slack;
      if (q.threshold <= floor_bound) return Verdict::pass();
      return Verdict::unknown("analytic bound admits exact(d) as low as " +
                              rat_to_decimal(floor_bound, 12));
    }
    case QueryKind::NoOverflow: {
      // interval bound on every intermediate magnitude
      const int qbits = fam.solver_fmt.frac_bits;
      const Rat res = rat_pow2(-qbits);
      const Rat lim = rat_pow2(fam.solver_fmt.int_bits);
      const Rat tau_rat = q.tau.value();
      bool ok = true;
      Rat dsum = 0;
      for (std::size_t i = 0; i < fam.n; ++i) {
        Rat xmax_i = 0;
        Rat lmin = rat_from_raw(fam.l_min[i], fam.data_fmt.frac_bits);
        Rat umax = rat_from_raw(fam.u_max[i], fam.data_fmt.frac_bits);
        xmax_i = abs(lmin) > abs(umax) ? abs(lmin) : abs(umax);
        if (xmax_i >= lim) ok = false;
        Rat width = umax - lmin;
        if (width >= lim) ok = false;
        dsum += width * width + res;
      }
      if (dsum >= lim) ok = false;
      for (const auto& qm : fam.q_set) {
        for (std::size_t i = 0; i < fam.n; ++i) {
          Rat row = 0;
          for (std::size_t j = 0; j < fam.n; ++j) {
            Rat entry = abs(rat_from_raw(qm.at(i, j), fam.data_fmt.frac_bits));
            if (entry >= lim) ok = false;
            Rat xmax_j;
            {
              Rat lmin = rat_from_raw(fam.l_min[j], fam.data_fmt.frac_bits);
              Rat umax = rat_from_raw(fam.u_max[j], fam.data_fmt.frac_bits);
              xmax_j = abs(lmin) > abs(umax) ? abs(lmin) : abs(umax);
            }
            row += entry * xmax_j + res;
          }
          Rat cmax = std::max(abs(rat_from_raw(fam.c_min[i], fam.data_fmt.frac_bits)),
                              abs(rat_from_raw(fam.c_max[i], fam.data_fmt.frac_bits)));
          if (cmax >= lim) ok = false;
          Rat s = row + cmax;
          if (s >= lim) ok = false;
          Rat g = tau_rat * s + res;
          if (g >= lim) ok = false;
          Rat lmin = rat_from_raw(fam.l_min[i], fam.data_fmt.frac_bits);
          Rat umax = rat_from_raw(fam.u_max[i], fam.data_fmt.frac_bits);
          Rat xmax_i = abs(lmin) > abs(umax) ? abs(lmin) : abs(umax);
          if (xmax_i + g >= lim) ok = false;
        }
      }
      if (ok) return Verdict::pass();
      return Verdict::unknown("interval magnitude analysis cannot exclude overflow at p = " +
                              std::to_string(fam.solver_fmt.int_bits));
    }
  }
  return Verdict::unknown("unhandled query");
}

}  // namespace

Verdict run_check(const ProblemFamily& fam, const BoundQuery& query, const Backend& backend) {
  if (query.which != QueryKind::NoOverflow && query.which != QueryKind::AssumptionEps &&
      query.threshold < 0)
    throw std::invalid_argument("run_check: negative squared threshold");
  if (std::holds_alternative<ExhaustiveBackend>(backend))
    return exhaustive_check(fam, query, std::get<ExhaustiveBackend>(backend));
  if (std::holds_alternative<RandomFalsifyBackend>(backend))
    return falsify_check(fam, query, std::get<RandomFalsifyBackend>(backend));
  return analytic_check(fam, query);
}

Verdict check_omega(const ProblemFamily& fam, FxValue tau, const Rat& omega_sq, const Backend& b) {
  return run_check(fam, {QueryKind::OmegaSq, omega_sq, tau, FxValue{1, fam.solver_fmt}}, b);
}

Verdict check_assumption(const ProblemFamily& fam, FxValue tau, FxValue eps_hat, const Rat& eps_sq,
                         const Backend& b) {
  if (eps_hat.raw < 1) throw std::invalid_argument("check_assumption: eps_hat below 2^-q");
  return run_check(fam, {QueryKind::AssumptionEps, eps_sq, tau, eps_hat}, b);
}

Verdict check_exit_bound(const ProblemFamily& fam, FxValue tau, FxValue eps_hat, QueryKind which,
                         const Rat& b_sq, const Backend& b) {
  if (which != QueryKind::DeltaSq && which != QueryKind::OmegaSmallSq && which != QueryKind::ThetaSq)
    throw std::invalid_argument("check_exit_bound: not an exit-conditioned query");
  return run_check(fam, {which, b_sq, tau, eps_hat}, b);
}

Verdict validate_integer_bits(const ProblemFamily& fam, FxValue tau, FxValue eps_hat,
                              const Backend& b) {
  return run_check(fam, {QueryKind::NoOverflow, Rat(0), tau, eps_hat}, b);
}

Rat replay_witness(const ProblemFamily& fam, FxValue tau, FxValue eps_hat, QueryKind which,
                   const Witness& w) {
  DecodedPoint p;
  p.qi = w.q_index;
  p.c_raw = w.c_raw;
  p.l_raw = w.l_raw;
  p.u_raw = w.u_raw;
  p.x_raw = w.xhat_raw;
  TrackedQuant t = tracked_quantities(fam, p, tau, eps_hat);
  return query_quantity(t, which);
}

ExtremumResult exhaustive_extremum(const ProblemFamily& fam, FxValue tau, FxValue eps_hat,
                                   QueryKind which, const ExhaustiveBackend& b) {
  if (which == QueryKind::NoOverflow)
    throw std::invalid_argument("exhaustive_extremum: overflow has no extremum");
  SearchSpace space(fam, tau, eps_hat, b.c_stride);
  if (!space.countable() || space.total() > b.cap)
    throw SearchSpaceTooLargeError("exhaustive enumeration exceeds cap");
  Scanner scanner(space, which, Rat(0));
  ScanShared shared;
  const u64 total = space.total();
  int threads = static_cast<int>(std::min<u64>(
      static_cast<u64>(resolve_threads(b.threads)), std::max<u64>(total / 4096, 1)));
  std::vector<Scanner::ExtremumState> states(static_cast<std::size_t>(threads));
  for (auto& s : states) s.minimize = which == QueryKind::AssumptionEps;
  if (threads <= 1) {
    scanner.scan_extremum(0, total, shared, states[0]);
  } else {
    std::vector<std::thread> pool;
    u64 chunk = total / threads + 1;
    for (int t = 0; t < threads; ++t) {
      u64 beg = t * chunk, end = std::min(total, beg + chunk);
      pool.emplace_back([&, beg, end, t] { scanner.scan_extremum(beg, end, shared, states[t]); });
    }
    for (auto& th : pool) th.join();
  }
  u64 fo = shared.first_overflow.load();
  if (fo != kNoIndex) throw_overflow_at(space, fo);

  const int two_f = 6 * fam.solver_fmt.frac_bits;
  ExtremumResult out;
  out.points = 0;
  const bool minimize = which == QueryKind::AssumptionEps;
  u64 best_idx = kNoIndex;
  Rat best;
  bool have = false;
  for (const auto& s : states) {
    out.points += s.points;
    auto offer = [&](const Rat& v, u64 idx) {
      if (idx == kNoIndex) return;
      bool better = !have || (minimize ? v < best : v > best) || (v == best && idx < best_idx);
      if (better) {
        best = v;
        best_idx = idx;
        have = true;
      }
    };
    if (s.have_kernel_best)
      offer(rat_from_i128_scaled(static_cast<__int128>(s.kernel_best), two_f), s.kernel_best_idx);
    if (s.have_rat_best) offer(s.rat_best, s.rat_best_idx);
  }
  out.attained = have;
  if (have) {
    out.value = best;
    out.arg = make_witness(space, best_idx, which);
    out.arg.offending = best;
  }
  return out;
}

BisectResult bisect_bound(const ProblemFamily& fam, FxValue tau, FxValue eps_hat, QueryKind which,
                          Rat lo, Rat hi, const Rat& tol, const Backend& backend) {
  if (!(tol > 0)) throw std::invalid_argument("bisect_bound: tol must be positive");
  if (!(lo < hi)) throw std::invalid_argument("bisect_bound: requires lo < hi");
  const bool pass_above = which != QueryKind::AssumptionEps;

  BisectResult out;
  out.stats.tol = tol;
  out.stats.init = hi;
  auto t_start = std::chrono::steady_clock::now();

  auto timed_check = [&](const Rat& b_sq) {
    auto t0 = std::chrono::steady_clock::now();
    Verdict v = run_check(fam, {which, b_sq, tau, eps_hat}, backend);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (v.is_pass()) {
      out.stats.n_pass++;
      out.stats.pass_seconds += secs;
    } else if (v.is_fail()) {
      out.stats.n_fail++;
      out.stats.fail_seconds += secs;
    }
    return v;
  };

  // verify the bracket; a zero failing endpoint is accepted unchecked
  {
    const Rat& pass_end = pass_above ? hi : lo;
    const Rat& fail_end = pass_above ? lo : hi;
    Verdict vp = timed_check(pass_end);
    if (!vp.is_pass()) {
      if (vp.kind == Verdict::Kind::Unknown)
        throw BackendInconclusiveError("bisect_bound: backend UNKNOWN at the passing endpoint: " +
                                       vp.note);
      throw std::invalid_argument("bisect_bound: supplied passing endpoint FAILs");
    }
    if (!pass_above || fail_end != 0) {
      Verdict vf = timed_check(fail_end);
      if (vf.kind == Verdict::Kind::Unknown)
        throw BackendInconclusiveError("bisect_bound: backend UNKNOWN at the failing endpoint: " +
                                       vf.note);
      if (!vf.is_fail())
        throw std::invalid_argument("bisect_bound: supplied failing endpoint does not FAIL");
    }
  }

  while (hi - lo > tol) {
    Rat mid = (lo + hi) / 2;
    Verdict v = timed_check(mid);
    if (v.kind == Verdict::Kind::Unknown) {
      out.conclusive = false;
      out.note = "backend UNKNOWN at threshold " + rat_to_decimal(mid, 12) + ": " + v.note;
      break;
    }
    // PASS-above: a passing mid moves hi down; PASS-below mirrors.
    if (pass_above == v.is_pass()) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  // normalize ends
  if (pass_above) {
    out.fail_end = lo;
    out.pass_end = hi;
    out.bound = sqrt_upper(out.pass_end);
  } else {
    out.pass_end = lo;
    out.fail_end = hi;
    out.bound = sqrt_lower(out.pass_end);
  }
  out.stats.total_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return out;
}

BisectResult auto_bisect(const ProblemFamily& fam, FxValue tau, FxValue eps_hat, QueryKind which,
                         const Rat& init, const Rat& tol, const Backend& backend) {
  const bool pass_above = which != QueryKind::AssumptionEps;
  const Rat ceiling = rat_pow2(2 * fam.solver_fmt.int_bits);

  auto check_at = [&](const Rat& b_sq) {
    return run_check(fam, {which, b_sq, tau, eps_hat}, backend);
  };

  int extra_pass = 0, extra_fail = 0;
  double extra_pass_s = 0, extra_fail_s = 0;
  auto timed = [&](const Rat& b_sq) {
    auto t0 = std::chrono::steady_clock::now();
    Verdict v = check_at(b_sq);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (v.is_pass()) {
      extra_pass++;
      extra_pass_s += secs;
    } else if (v.is_fail()) {
      extra_fail++;
      extra_fail_s += secs;
    }
    return v;
  };

  Rat lo, hi;
  if (pass_above) {
    hi = init;
    Verdict v = timed(hi);
    if (v.kind == Verdict::Kind::Unknown)
      throw BackendInconclusiveError("auto_bisect: backend UNKNOWN at the initial threshold: " +
                                     v.note);
    lo = 0;
    while (v.is_fail()) {
      lo = hi;
      hi = hi * 4;
      if (hi > ceiling)
        throw BackendInconclusiveError("auto_bisect: no passing threshold below the 2^{2p} ceiling");
      v = timed(hi);
      if (v.kind == Verdict::Kind::Unknown)
        throw BackendInconclusiveError("auto_bisect: backend UNKNOWN while doubling: " + v.note);
    }
    // v PASSes at hi; lo is 0 or the last FAIL
  } else {
    lo = init;
    Verdict v = timed(lo);
    if (!v.is_pass()) {
      if (v.kind == Verdict::Kind::Unknown)
        throw BackendInconclusiveError("auto_bisect: backend UNKNOWN at the initial threshold: " +
                                       v.note);
      throw BackendInconclusiveError(
          "auto_bisect: the minimum useful eps^2 already fails the exit-test implication");
    }
    hi = lo * 4;
    Verdict vf = timed(hi);
    while (!vf.is_fail()) {
      if (vf.kind == Verdict::Kind::Unknown)
        throw BackendInconclusiveError("auto_bisect: backend UNKNOWN while doubling: " + vf.note);
      lo = hi;
      hi = hi * 4;
      if (hi > ceiling) {
        // vacuously true for every eps: the non-exit region is empty
        BisectResult out;
        out.pass_end = lo;
        out.fail_end = ceiling;
        out.bound = sqrt_lower(lo);
        out.conclusive = true;
        out.note = "implication holds up to the 2^{2p} ceiling (non-exit region likely empty)";
        out.stats.n_pass = extra_pass;
        out.stats.n_fail = extra_fail;
        out.stats.pass_seconds = extra_pass_s;
        out.stats.fail_seconds = extra_fail_s;
        out.stats.init = init;
        out.stats.tol = tol;
        return out;
      }
      vf = timed(hi);
    }
  }

  BisectResult res = bisect_bound(fam, tau, eps_hat, which, lo, hi, tol, backend);
  res.stats.n_pass += extra_pass;
  res.stats.n_fail += extra_fail;
  res.stats.pass_seconds += extra_pass_s;
  res.stats.fail_seconds += extra_fail_s;
  res.stats.total_seconds += extra_pass_s + extra_fail_s;
  res.stats.init = init;
  return res;
}

InnerProductAssertReport run_assertion_example(const InnerProductAssertParams& p) {
  if (p.m <= 0) throw std::invalid_argument("run_assertion_example: m must be positive");
  const int q = p.fmt.frac_bits;
  const std::int64_t a_lim = floor_scaled(p.a_max, q);
  if (a_lim >= p.fmt.raw_limit()) throw OverflowError("run_assertion_example: a_max not representable");

  InnerProductAssertReport rep;
  Rat max_err = 0, min_err = 0;
  std::int64_t arg_max = 0, arg_min = 0;
  for (std::int64_t k = -a_lim; k <= a_lim; ++k) {
    __int128 wide = static_cast<__int128>(k) * k;  // 2q bits
    __int128 rounded = round_shift(wide, q, p.rounding);
    Rat err = rat_from_i128_scaled(wide, 2 * q) - rat_from_i128_scaled(rounded, q);
    if (err > max_err) {
      max_err = err;
      arg_max = k;
    }
    if (err < min_err) {
      min_err = err;
      arg_min = k;
    }
  }
  const Rat m_rat(static_cast<long>(p.m));
  Rat plus = m_rat * max_err, minus = -(m_rat * min_err);
  bool positive_side = plus >= minus;
  rep.tight_bound = positive_side ? plus : minus;
  rep.theory_bound = m_rat * rat_pow2(-q);
  rep.improvement_pct = rep.tight_bound > 0
                            ? (rep.theory_bound - rep.tight_bound) / rep.tight_bound * 100
                            : Rat(0);
  rep.witness_raw.assign(static_cast<std::size_t>(p.m), positive_side ? arg_max : arg_min);

  // exact(mu) = b * <a, a> exactly; minimize over the box
  Rat amax_sq = rat_from_raw(a_lim, q) * rat_from_raw(a_lim, q);
  rep.mu_min = p.b >= 0 ? Rat(0) : p.b * m_rat * amax_sq;

  if (rep.tight_bound > p.chi) {
    Witness w;
    w.xhat_raw = rep.witness_raw;
    w.offending = rep.tight_bound;
    w.quantity = "inner_product_err";
    rep.verdict = Verdict::fail(std::move(w));
  } else if (rep.mu_min < p.xi) {
    Witness w;
    w.xhat_raw.assign(static_cast<std::size_t>(p.m), p.b >= 0 ? 0 : a_lim);
    w.offending = rep.mu_min;
    w.quantity = "exact_mu";
    rep.verdict = Verdict::fail(std::move(w));
  } else {
    rep.verdict = Verdict::pass();
  }
  return rep;
}

}  // namespace fpcert
