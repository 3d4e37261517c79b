#pragma once

#include <map>
#include <string>
#include <vector>

#include "fpcert/certify.hpp"
#include "fpcert/fixedpoint.hpp"
#include "fpcert/qp.hpp"

namespace fpcert {

class PreconditionError : public std::runtime_error {
 public:
  explicit PreconditionError(const std::string& w) : std::runtime_error(w) {}
};

// How a certified bound was obtained; timings are reported separately so
// certificate files stay byte-reproducible.
struct BoundProvenance {
  std::string backend;
  Rat value_sq;  // certified squared bound (PASS endpoint)
  Rat init;
  Rat tol;
  int n_pass = 0, n_fail = 0;
  double pass_seconds = 0, fail_seconds = 0, total_seconds = 0;
  std::string note;
};

struct Certificate {
  FxFormat solver_fmt, data_fmt;
  RoundingMode rounding = RoundingMode::Floor;
  std::string gradient_order = "row-dot, exact c addition, one rounded tau multiply";

  Rat tau, smooth, convex;           // tau, L, sigma
  Rat omega_cap;                     // Omega
  Rat eps, eps_hat;                  // exact-space threshold and exit tolerance
  Rat delta, omega_small, theta;     // exit-conditioned bounds
  bool omega_substituted = true;     // omega_small taken equal to Omega

  Rat cond_t;     // T = (1/sigma)(1/tau + L)
  Rat contraction;  // C
  Rat dist0_sq;   // D
  bool d_inferred = true;
  long k_max = 0;
  long k_exact = 0;

  Rat dist_exit, fgap_exit;    // tolerance-exit guarantees
  Rat dist_kmax, fgap_kmax;    // k_max-exit guarantees

  std::map<std::string, BoundProvenance> provenance;
  std::string family_note;  // finite Q-set restriction and similar caveats
};

// Smallest k with (1 - tau*sigma)^k <= eps_target_sq / dist0_sq.
long kmax_exact(const Rat& eps_target_sq, const Rat& dist0_sq, const Rat& tau, const Rat& sigma);

// C = (1 - tau*sigma) / (1 - 4*Omega/eps); requires eps*tau*sigma > 4*Omega.
Rat contraction_C(const Rat& tau, const Rat& sigma, const Rat& omega_cap, const Rat& eps);

// Smallest k with C^k <= eps^2 / (4 D).
long kmax_fixed(const Rat& contraction, const Rat& dist0_sq, const Rat& eps);

// (omega + delta*T, (1/tau)((Theta+Omega)(omega+delta*T) + Theta^2/2)).
std::pair<Rat, Rat> exit_bounds(const Rat& delta, const Rat& omega_small, const Rat& theta,
                                const Rat& omega_cap, const Rat& tau, const Rat& smooth,
                                const Rat& convex);

// (eps/2, (eps^2 - 4*Omega*eps) / (8*tau)); requires eps >= 4*Omega.
std::pair<Rat, Rat> kmax_mode_bounds(const Rat& eps, const Rat& omega_cap, const Rat& tau);

// Sound bound on max_{x0} ||x0 - x*||^2: the optimum lies in the box, so
// each coordinate contributes max((x0-l_min)^2, (u_max-x0)^2).
Rat bound_D(const ProblemFamily& fam, const std::vector<std::vector<std::int64_t>>& x0_set_raw);

struct CertificateInputs {
  FxFormat solver_fmt, data_fmt;
  RoundingMode rounding = RoundingMode::Floor;
  Rat tau, smooth, convex;
  Rat omega_cap, eps, eps_hat;
  Rat delta, theta;
  Rat omega_small;  // ignored when omega_substituted
  bool omega_substituted = true;
  Rat dist0_sq = Rat(1);
  bool d_inferred = true;
  std::map<std::string, BoundProvenance> provenance;
  std::string family_note;
};

// Fills every certificate field; refuses assembly when eps*tau*sigma <= 4*Omega.
Certificate assemble_certificate(const CertificateInputs& in);

std::string certificate_to_json(const Certificate& c);
Certificate certificate_from_json(const std::string& text);
void save_certificate(const Certificate& c, const std::string& path);
Certificate load_certificate(const std::string& path);

// Human-readable report table: bound | value | b^2 | tol | #P/F | timings.
std::string certificate_report(const Certificate& c);

}  // namespace fpcert
