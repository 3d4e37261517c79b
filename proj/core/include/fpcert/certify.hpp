#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fpcert/fixedpoint.hpp"
#include "fpcert/qp.hpp"

namespace fpcert {

class SearchSpaceTooLargeError : public std::runtime_error {
 public:
  explicit SearchSpaceTooLargeError(const std::string& w) : std::runtime_error(w) {}
};
class BackendInconclusiveError : public std::runtime_error {
 public:
  explicit BackendInconclusiveError(const std::string& w) : std::runtime_error(w) {}
};

// Which quantified assertion a backend decides. All quantities are squared
// norms; the assertion program runs a single PGM step.
enum class QueryKind {
  OmegaSq,       // sup ||err(g)||^2                 over all x, realizations
  AssumptionEps, // d >= eps_hat implies exact(d) >= eps^2
  DeltaSq,       // sup ||x - T(x)||^2       over the exit region d < eps_hat
  OmegaSmallSq,  // sup ||x_next - T(x)||^2  over the exit region
  ThetaSq,       // sup ||x - x_next||^2     over the exit region
  NoOverflow,    // no operation of the step overflows at integer width p
};

std::string to_string(QueryKind k);

// A concrete input assignment that replays a violation bit-exactly.
struct Witness {
  std::size_t q_index = 0;
  std::vector<std::int64_t> c_raw, l_raw, u_raw;  // data format
  std::vector<std::int64_t> xhat_raw;             // solver format
  Rat offending;                                  // exact violating quantity
  std::string quantity;
};

struct Verdict {
  enum class Kind { Pass, Fail, Unknown };
  Kind kind = Kind::Unknown;
  std::optional<Witness> witness;
  std::string note;

  bool is_pass() const { return kind == Kind::Pass; }
  bool is_fail() const { return kind == Kind::Fail; }
  static Verdict pass() { return {Kind::Pass, std::nullopt, ""}; }
  static Verdict fail(Witness w) { return {Kind::Fail, std::move(w), ""}; }
  static Verdict unknown(std::string note) { return {Kind::Unknown, std::nullopt, std::move(note)}; }
};

std::string to_string(Verdict::Kind k);

// Sound and complete while the enumerated space stays within `cap` points.
struct ExhaustiveBackend {
  std::uint64_t cap = 100'000'000;
  int threads = 0;          // 0: hardware concurrency
  std::uint64_t c_stride = 1;  // >1 coarsens the c grid; PASS degrades to UNKNOWN
};

// Random search for counterexamples; never returns PASS.
struct RandomFalsifyBackend {
  std::uint64_t samples = 100000;
  std::uint64_t seed = 1;
};

// Conservative worst-case per-operation error accumulation; never FAILs.
struct AnalyticBackend {};

using Backend = std::variant<ExhaustiveBackend, RandomFalsifyBackend, AnalyticBackend>;

std::string backend_name(const Backend& b);

struct BoundQuery {
  QueryKind which;
  Rat threshold;   // squared bound (eps^2 for AssumptionEps; unused for NoOverflow)
  FxValue tau;
  FxValue eps_hat;
};

Verdict run_check(const ProblemFamily& fam, const BoundQuery& query, const Backend& backend);

// Spec'd entry points.
Verdict check_omega(const ProblemFamily& fam, FxValue tau, const Rat& omega_sq, const Backend& b);
Verdict check_assumption(const ProblemFamily& fam, FxValue tau, FxValue eps_hat, const Rat& eps_sq,
                         const Backend& b);
Verdict check_exit_bound(const ProblemFamily& fam, FxValue tau, FxValue eps_hat, QueryKind which,
                         const Rat& b_sq, const Backend& b);
Verdict validate_integer_bits(const ProblemFamily& fam, FxValue tau, FxValue eps_hat,
                              const Backend& b);

// Recomputes the offending quantity of a witness through the tracked
// arithmetic path. Exact; used to confirm every FAIL.
Rat replay_witness(const ProblemFamily& fam, FxValue tau, FxValue eps_hat, QueryKind which,
                   const Witness& w);

// Exhaustively computed extremum of a query quantity: the supremum for the
// bound queries, the infimum of exact(d) over the non-exit region for
// AssumptionEps (attained == false when that region is empty).
struct ExtremumResult {
  Rat value;
  bool attained = false;
  Witness arg;
  std::uint64_t points = 0;
};
ExtremumResult exhaustive_extremum(const ProblemFamily& fam, FxValue tau, FxValue eps_hat,
                                   QueryKind which, const ExhaustiveBackend& b);

// Bisection over a verification oracle. For PASS-above queries (Omega,
// delta, omega, Theta) the caller supplies lo with FAIL (or 0) and hi with
// PASS; for AssumptionEps the roles are mirrored (PASS below, FAIL above).
struct BisectStats {
  int n_pass = 0, n_fail = 0;
  double pass_seconds = 0, fail_seconds = 0, total_seconds = 0;
  Rat init;  // initial guess of the squared bound
  Rat tol;
};

struct BisectResult {
  Rat fail_end, pass_end;  // bracket on the squared quantity
  Rat bound;               // sqrt of the certified squared bound, rounded outward
  BisectStats stats;
  bool conclusive = true;
  std::string note;
};

BisectResult bisect_bound(const ProblemFamily& fam, FxValue tau, FxValue eps_hat, QueryKind which,
                          Rat lo, Rat hi, const Rat& tol, const Backend& backend);

// Doubles hi (by 4x) until PASS, then bisects; mirrored for AssumptionEps.
// The ceiling for doubling is 2^{2p}.
BisectResult auto_bisect(const ProblemFamily& fam, FxValue tau, FxValue eps_hat, QueryKind which,
                         const Rat& init, const Rat& tol, const Backend& backend);

// The worked inner-product assertion: r = <a, a> over the box |a|_inf <=
// a_max, mu = b * r, asserting |err(r)| <= chi and exact(mu) >= xi. The
// per-element maximum is exhausted (addition is exact, so the vector
// maximum is m times the element maximum).
struct InnerProductAssertParams {
  FxFormat fmt{8, 8};
  RoundingMode rounding = RoundingMode::Floor;
  int m = 20;
  Rat a_max = Rat(1, 8);
  Rat b = Rat(3, 2);
  Rat xi = 0;
  Rat chi = 0;
};

struct InnerProductAssertReport {
  Verdict verdict;
  Rat tight_bound;      // exhausted max |err(<a,a>)|
  Rat theory_bound;     // m * 2^-q
  Rat improvement_pct;  // (theory - tight) / tight * 100
  Rat mu_min;           // min exact(mu) over the box
  std::vector<std::int64_t> witness_raw;  // element raws attaining the max
};

InnerProductAssertReport run_assertion_example(const InnerProductAssertParams& p);

}  // namespace fpcert
