#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "fpcert/fixedpoint.hpp"
#include "fpcert/rational.hpp"

namespace fpcert {

using RatVec = std::vector<Rat>;

// Row-major matrix of raw scaled integers on the data grid.
struct GridMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<std::int64_t> raw;

  GridMatrix() = default;
  GridMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), raw(r * c, 0) {}

  std::int64_t& at(std::size_t i, std::size_t j) { return raw[i * cols + j]; }
  std::int64_t at(std::size_t i, std::size_t j) const { return raw[i * cols + j]; }
  bool symmetric() const;

  Eigen::MatrixXd to_double(int frac_bits) const;
};

// One realization of the box-constrained strongly convex QP
//   min ½ xᵀ Q x + cᵀ x   s.t.  l <= x <= u,
// with every entry representable on the (p'.q') data grid.
struct BoxQp {
  std::size_t n = 0;
  GridMatrix q_mat;                       // n×n, symmetric positive definite
  std::vector<std::int64_t> c, lower, upper;
  FxFormat data_fmt;

  // Throws on asymmetry, l >= u, or entries off the representable range.
  void validate_shape() const;

  Rat q_rat(std::size_t i, std::size_t j) const { return rat_from_raw(q_mat.at(i, j), data_fmt.frac_bits); }
  Rat c_rat(std::size_t i) const { return rat_from_raw(c[i], data_fmt.frac_bits); }
  Rat lower_rat(std::size_t i) const { return rat_from_raw(lower[i], data_fmt.frac_bits); }
  Rat upper_rat(std::size_t i) const { return rat_from_raw(upper[i], data_fmt.frac_bits); }
};

// The uncertainty family: a finite set of admissible Q matrices and
// componentwise ranges for c, l and u, all on the data grid.
struct ProblemFamily {
  std::size_t n = 0;
  std::vector<GridMatrix> q_set;
  std::vector<std::int64_t> c_min, c_max;
  std::vector<std::int64_t> l_min, l_max, u_min, u_max;
  FxFormat data_fmt;    // (p'.q')
  FxFormat solver_fmt;  // (p.q), p >= p', q >= q'
  RoundingMode rounding = RoundingMode::Floor;

  void validate() const;

  BoxQp realization(std::size_t q_index, std::vector<std::int64_t> c_raw,
                    std::vector<std::int64_t> l_raw, std::vector<std::int64_t> u_raw) const;
  // Convenience when the box is fixed (l_min == l_max, u_min == u_max).
  BoxQp fixed_box_realization(std::size_t q_index, std::vector<std::int64_t> c_raw) const;
  bool box_fixed() const { return l_min == l_max && u_min == u_max; }
};

// Smoothness / strong-convexity constants over the family and the step size.
// L is rounded up and sigma down so downstream certificates stay valid.
struct SolverConstants {
  double smooth = 0;  // L
  double convex = 0;  // sigma
  FxValue tau;

  Rat smooth_rat() const { return rat_from_double(smooth); }
  Rat convex_rat() const { return rat_from_double(convex); }
};

// Extreme eigenvalues of a symmetric matrix to relative accuracy ~1e-10.
std::pair<double, double> eigen_extrema(const Eigen::MatrixXd& m);
std::pair<double, double> eigen_extrema(const GridMatrix& m, int frac_bits);

// (L, sigma) over the family with directed rounding applied.
std::pair<double, double> family_constants(const ProblemFamily& fam);

// Largest grid number tau with tau <= 1/L: floor(2^q / L) * 2^-q.
FxValue step_size(double smooth, FxFormat fmt);
FxValue step_size(const Rat& smooth, FxFormat fmt);

// Exact objective and gradient.
Rat f_value(const BoxQp& qp, const RatVec& x);
RatVec grad(const BoxQp& qp, const RatVec& x);

// Problem file (JSON, raw scaled integers; bit-exact across platforms).
ProblemFamily load_problem(const std::string& path);
ProblemFamily parse_problem(const std::string& json_text);
std::string problem_to_json(const ProblemFamily& fam);
void save_problem(const ProblemFamily& fam, const std::string& path);

}  // namespace fpcert
