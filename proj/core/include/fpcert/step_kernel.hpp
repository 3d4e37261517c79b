#pragma once

#include <cstdint>
#include <vector>

#include "fpcert/pgm.hpp"
#include "fpcert/qp.hpp"

namespace fpcert {

// Exact scaled-integer evaluator for one fixed-point PGM step plus the
// error quantities the verification programs assert on. Produces bit-exact
// agreement with tracked_step (differentially tested) at a fraction of the
// cost; prepare() rejects configurations whose exact intermediates could
// leave 128 bits, in which case callers fall back to the tracked path.
//
// Exact (shadow) quantities are integers scaled by 2^F with F = 3q;
// squared norms are scaled by 2^{2F}.
class StepKernel {
 public:
  StepKernel(const BoxQp& qp, FxFormat solver_fmt, RoundingMode rounding, FxValue tau,
             FxValue eps_hat);

  bool supported() const { return supported_; }
  int shadow_frac() const { return shadow_frac_; }  // F

  enum Want : unsigned {
    WantErrG = 1u,
    WantExit = 2u,
    WantDelta = 4u,
    WantOmega = 8u,
    WantTheta = 16u,
  };

  struct Result {
    bool overflow = false;
    std::int64_t dhat2_raw = 0;
    bool exited = false;                // dhat2 < eps_hat
    unsigned __int128 err_g_sq = 0;     // ||tau*grad - g||^2        * 2^{2F}
    unsigned __int128 delta_sq = 0;     // ||x - T(x)||^2            * 2^{2F}
    unsigned __int128 omega_sq = 0;     // ||x_next - T(x)||^2       * 2^{2F}
    unsigned __int128 theta_sq = 0;     // ||x - x_next||^2 (values) * 2^{2F}
    std::vector<std::int64_t> x_next;
  };

  // x_raw: n raws at the solver format. Requires supported().
  void eval(const std::int64_t* x_raw, unsigned want, Result& out) const;

  // Swaps in a new c realization (data-format raws). The applicability
  // analysis ran against the c magnitudes supplied at construction, so each
  // |c_i| must not exceed the corresponding constructor value.
  void set_c(const std::vector<std::int64_t>& c_raw);

  std::size_t n() const { return n_; }

 private:
  std::size_t n_;
  FxFormat fmt_;
  RoundingMode mode_;
  int shadow_frac_;
  int data_shift_;
  bool supported_ = false;
  std::int64_t raw_lim_;
  std::int64_t tau_raw_;
  std::int64_t eps_hat_raw_;
  std::vector<std::int64_t> q_lift_;        // n*n at q bits
  std::vector<std::int64_t> c_lift_;        // at q bits
  std::vector<std::int64_t> c_cap_;         // |c| ceiling from construction
  std::vector<std::int64_t> l_lift_, u_lift_;
  std::vector<__int128> l_shadow_, u_shadow_;  // at F bits
};

}  // namespace fpcert
