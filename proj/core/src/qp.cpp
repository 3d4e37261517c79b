#include "fpcert/qp.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <sstream>

namespace fpcert {

using nlohmann::json;

bool GridMatrix::symmetric() const {
  if (rows != cols) return false;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = i + 1; j < cols; ++j)
      if (at(i, j) != at(j, i)) return false;
  return true;
}

Eigen::MatrixXd GridMatrix::to_double(int frac_bits) const {
  Eigen::MatrixXd m(rows, cols);
  const double scale = std::ldexp(1.0, -frac_bits);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = static_cast<double>(at(i, j)) * scale;
  return m;
}

void BoxQp::validate_shape() const {
  if (q_mat.rows != n || q_mat.cols != n || c.size() != n || lower.size() != n || upper.size() != n)
    throw std::invalid_argument("BoxQp: dimension mismatch");
  if (!q_mat.symmetric()) throw std::invalid_argument("BoxQp: Q not symmetric");
  const std::int64_t lim = data_fmt.raw_limit();
  auto in_range = [&](std::int64_t r) { return std::llabs(r) < lim; };
  for (auto r : q_mat.raw)
    if (!in_range(r)) throw OverflowError("BoxQp: Q entry outside data format");
  for (std::size_t i = 0; i < n; ++i) {
    if (!in_range(c[i]) || !in_range(lower[i]) || !in_range(upper[i]))
      throw OverflowError("BoxQp: vector entry outside data format");
    if (lower[i] >= upper[i]) throw std::invalid_argument("BoxQp: requires l < u componentwise");
  }
}

void ProblemFamily::validate() const {
  if (q_set.empty()) throw std::invalid_argument("ProblemFamily: empty Q set");
  for (const auto& q : q_set) {
    if (q.rows != n || q.cols != n) throw std::invalid_argument("ProblemFamily: Q dimension mismatch");
    if (!q.symmetric()) throw std::invalid_argument("ProblemFamily: Q not symmetric");
  }
  auto expect_n = [&](const std::vector<std::int64_t>& v, const char* name) {
    if (v.size() != n) throw std::invalid_argument(std::string("ProblemFamily: bad length for ") + name);
  };
  expect_n(c_min, "c_min");
  expect_n(c_max, "c_max");
  expect_n(l_min, "l_min");
  expect_n(l_max, "l_max");
  expect_n(u_min, "u_min");
  expect_n(u_max, "u_max");
  for (std::size_t i = 0; i < n; ++i) {
    if (c_min[i] > c_max[i]) throw std::invalid_argument("ProblemFamily: c_min > c_max");
    if (l_min[i] > l_max[i]) throw std::invalid_argument("ProblemFamily: l_min > l_max");
    if (u_min[i] > u_max[i]) throw std::invalid_argument("ProblemFamily: u_min > u_max");
    if (l_max[i] >= u_min[i]) throw std::invalid_argument("ProblemFamily: requires l_max < u_min");
  }
  if (solver_fmt.int_bits < data_fmt.int_bits || solver_fmt.frac_bits < data_fmt.frac_bits)
    throw std::invalid_argument("ProblemFamily: solver format must refine data format");
}

BoxQp ProblemFamily::realization(std::size_t q_index, std::vector<std::int64_t> c_raw,
                                 std::vector<std::int64_t> l_raw, std::vector<std::int64_t> u_raw) const {
  BoxQp qp;
  qp.n = n;
  qp.q_mat = q_set.at(q_index);
  qp.c = std::move(c_raw);
  qp.lower = std::move(l_raw);
  qp.upper = std::move(u_raw);
  qp.data_fmt = data_fmt;
  qp.validate_shape();
  return qp;
}

BoxQp ProblemFamily::fixed_box_realization(std::size_t q_index, std::vector<std::int64_t> c_raw) const {
  if (!box_fixed()) throw std::invalid_argument("ProblemFamily: box is not fixed");
  return realization(q_index, std::move(c_raw), l_min, u_min);
}

std::pair<double, double> eigen_extrema(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("eigen_extrema: not square");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() != 0.0)
    throw std::invalid_argument("eigen_extrema: not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigen_extrema: solver failed");
  const auto& ev = solver.eigenvalues();
  return {ev(0), ev(ev.size() - 1)};
}

std::pair<double, double> eigen_extrema(const GridMatrix& m, int frac_bits) {
  return eigen_extrema(m.to_double(frac_bits));
}

std::pair<double, double> family_constants(const ProblemFamily& fam) {
  fam.validate();
  double smooth = -std::numeric_limits<double>::infinity();
  double convex = std::numeric_limits<double>::infinity();
  for (const auto& q : fam.q_set) {
    auto [lo, hi] = eigen_extrema(q, fam.data_fmt.frac_bits);
    Eigen::MatrixXd qd = q.to_double(fam.data_fmt.frac_bits);
    // directed slack keeps L an upper and sigma a lower bound
    double slack = 10.0 * std::numeric_limits<double>::epsilon() *
                   qd.cwiseAbs().rowwise().sum().maxCoeff();
    smooth = std::max(smooth, hi + slack);
    convex = std::min(convex, lo - slack);
  }
  if (!(convex > 0)) throw std::invalid_argument("family_constants: family not positive definite");
  return {smooth, convex};
}

FxValue step_size(double smooth, FxFormat fmt) { return step_size(rat_from_double(smooth), fmt); }

FxValue step_size(const Rat& smooth, FxFormat fmt) {
  if (!(smooth > 0)) throw std::invalid_argument("step_size: L must be positive");
  Rat inv = 1 / smooth;
  if (inv >= rat_pow2(fmt.int_bits)) throw OverflowError("step_size: 1/L exceeds 2^p");
  std::int64_t raw = floor_scaled(inv, fmt.frac_bits);
  if (raw <= 0) throw std::underflow_error("step_size: floor(2^q / L) = 0; increase q");
  return FxValue{raw, fmt};
}

Rat f_value(const BoxQp& qp, const RatVec& x) {
  if (x.size() != qp.n) throw std::invalid_argument("f_value: dimension mismatch");
  Rat acc = 0;
  for (std::size_t i = 0; i < qp.n; ++i) {
    Rat row = 0;
    for (std::size_t j = 0; j < qp.n; ++j) row += qp.q_rat(i, j) * x[j];
    acc += x[i] * row;
  }
  acc /= 2;
  for (std::size_t i = 0; i < qp.n; ++i) acc += qp.c_rat(i) * x[i];
  return acc;
}

RatVec grad(const BoxQp& qp, const RatVec& x) {
  if (x.size() != qp.n) throw std::invalid_argument("grad: dimension mismatch");
  RatVec g(qp.n);
  for (std::size_t i = 0; i < qp.n; ++i) {
    Rat row = 0;
    for (std::size_t j = 0; j < qp.n; ++j) row += qp.q_rat(i, j) * x[j];
    g[i] = row + qp.c_rat(i);
  }
  return g;
}

namespace {

std::vector<std::int64_t> vec_from_json(const json& j) {
  std::vector<std::int64_t> v;
  for (const auto& e : j) v.push_back(e.get<std::int64_t>());
  return v;
}

GridMatrix mat_from_json(const json& j) {
  GridMatrix m;
  m.rows = j.size();
  m.cols = m.rows > 0 ? j.at(0).size() : 0;
  for (const auto& row : j) {
    if (row.size() != m.cols) throw std::invalid_argument("problem file: ragged Q matrix");
    for (const auto& e : row) m.raw.push_back(e.get<std::int64_t>());
  }
  return m;
}

json mat_to_json(const GridMatrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows; ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < m.cols; ++j) row.push_back(m.at(i, j));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

ProblemFamily parse_problem(const std::string& text) {
  json j = json::parse(text);
  ProblemFamily fam;
  const auto& f = j.at("format");
  fam.solver_fmt = FxFormat(f.at("p").get<int>(), f.at("q").get<int>());
  fam.data_fmt = FxFormat(f.at("p_prime").get<int>(), f.at("q_prime").get<int>());
  fam.rounding = rounding_from_string(f.value("rounding", "floor"));
  if (j.contains("Q_set")) {
    for (const auto& q : j.at("Q_set")) fam.q_set.push_back(mat_from_json(q));
  } else {
    fam.q_set.push_back(mat_from_json(j.at("Q")));
  }
  fam.n = fam.q_set.front().rows;
  fam.c_min = vec_from_json(j.at("c_min"));
  fam.c_max = vec_from_json(j.at("c_max"));
  fam.l_min = fam.l_max = vec_from_json(j.at("l"));
  fam.u_min = fam.u_max = vec_from_json(j.at("u"));
  fam.validate();
  return fam;
}

ProblemFamily load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open problem file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_problem(ss.str());
}

std::string problem_to_json(const ProblemFamily& fam) {
  if (!fam.box_fixed())
    throw std::invalid_argument("problem_to_json: file format stores a fixed box");
  json j;
  j["format"] = {{"p", fam.solver_fmt.int_bits},
                 {"q", fam.solver_fmt.frac_bits},
                 {"p_prime", fam.data_fmt.int_bits},
                 {"q_prime", fam.data_fmt.frac_bits},
                 {"rounding", to_string(fam.rounding)}};
  j["Q"] = mat_to_json(fam.q_set.front());
  if (fam.q_set.size() > 1) {
    json qs = json::array();
    for (const auto& q : fam.q_set) qs.push_back(mat_to_json(q));
    j["Q_set"] = qs;
  }
  j["c_min"] = fam.c_min;
  j["c_max"] = fam.c_max;
  j["l"] = fam.l_min;
  j["u"] = fam.u_min;
  return j.dump(2) + "\n";
}

void save_problem(const ProblemFamily& fam, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write problem file: " + path);
  out << problem_to_json(fam);
}

}  // namespace fpcert
