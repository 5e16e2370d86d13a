#include "bilevel/problem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace bilevel {

ParseError::ParseError(int line, const std::string& what)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
      line_(line) {}

void BilevelProblem::validate() const {
  if (layout.n_lam != 0) throw SemanticError("bilevel problem layout must not carry multipliers");
  if (layout.n_x < 0 || layout.n_y < 0) throw SemanticError("negative dimension");
  if (layout.n_y < 1) throw SemanticError("lower level needs at least one variable (m >= 1)");
  auto check_layout = [this](const Polynomial& q, const std::string& what) {
    if (q.layout() != layout) {
      throw SemanticError(what + " has layout " + to_string(q.layout()) + ", expected " +
                          to_string(layout));
    }
  };
  check_layout(f, "upper objective");
  check_layout(G, "lower objective");
  for (std::size_t i = 0; i < g.size(); ++i) check_layout(g[i], "upper constraint " + std::to_string(i + 1));
  for (std::size_t j = 0; j < h.size(); ++j) {
    check_layout(h[j], "lower constraint " + std::to_string(j + 1));
    if (h[j].degree_x() != 0) {
      throw SemanticError("lower constraint " + std::to_string(j + 1) + " depends on x");
    }
  }
  if (!(box_M > 0.0) || !std::isfinite(box_M)) throw SemanticError("box_M must be a positive finite number");
  if (bounds) {
    if (!(bounds->n1 >= 0.0) || !(bounds->n2 > 0.0)) {
      throw SemanticError("bounds must satisfy N1 >= 0 and N2 > 0");
    }
    if (box_M < bounds->n1) {
      throw SemanticError("box_M must be at least N1 so that the box contains the upper projection");
    }
  }
}

// -------------------------------------------------------- PolynomialProgram

PolynomialProgram::PolynomialProgram(Polynomial objective, std::vector<Polynomial> ineq,
                                     std::vector<Polynomial> eq)
    : objective_(std::move(objective)), ineq_(std::move(ineq)), eq_(std::move(eq)) {
  for (const auto& p : ineq_) {
    if (p.layout() != objective_.layout()) throw StructuralError("PolynomialProgram: inequality layout mismatch");
    ineq_deg_.push_back(p.degree());
  }
  for (const auto& q : eq_) {
    if (q.layout() != objective_.layout()) throw StructuralError("PolynomialProgram: equality layout mismatch");
    eq_deg_.push_back(q.degree());
  }
}

int PolynomialProgram::max_degree() const {
  int d = objective_.degree();
  for (int u : ineq_deg_) d = std::max(d, u);
  for (int v : eq_deg_) d = std::max(d, v);
  return d;
}

PolynomialProgram::Residuals PolynomialProgram::check(std::span<const double> point, double tol) const {
  if (point.size() != static_cast<std::size_t>(layout().total())) {
    throw StructuralError("PolynomialProgram::check: point dimension mismatch");
  }
  Residuals r;
  for (const auto& p : ineq_) {
    const double v = p.eval(point);
    r.ineq.push_back(v);
    r.max_violation = std::max(r.max_violation, v);
  }
  for (const auto& q : eq_) {
    const double v = q.eval(point);
    r.eq.push_back(v);
    r.max_violation = std::max(r.max_violation, std::abs(v));
  }
  r.feasible = r.max_violation <= tol;
  return r;
}

// --------------------------------------------------------------- augmentation

BilevelProblem augment_with_balls(const BilevelProblem& p) {
  if (!p.bounds) throw SemanticError("augment_with_balls: instance has no N1/N2 bounds");
  BilevelProblem out = p;
  const VarLayout& L = p.layout;
  const double n1 = p.bounds->n1;
  const double n2 = p.bounds->n2;
  Polynomial ball_xy = Polynomial::constant(L, -(n1 * n1 + n2 * n2));
  Polynomial ball_y = Polynomial::constant(L, -(n2 * n2));
  for (int i = 0; i < L.n_x + L.n_y; ++i) {
    const Polynomial v = Polynomial::variable(L, i);
    ball_xy += v * v;
    if (i >= L.y_offset()) ball_y += v * v;
  }
  out.g.push_back(std::move(ball_xy));
  out.h.push_back(std::move(ball_y));
  return out;
}

// ---------------------------------------------------------------- Hoelder

long long holder_R(int m, int d) {
  if (m < 1 || d < 1) throw std::invalid_argument("holder_R: requires m >= 1 and d >= 1");
  if (d == 1) return 1;
  long long r = d;
  for (int i = 1; i < m; ++i) r *= 3LL * d - 3;
  return r;
}

HolderEstimate holder_exponent(int m, int r, int d) {
  if (m < 1 || r < 0 || d < 1) {
    throw std::invalid_argument("holder_exponent: requires m >= 1, r >= 0, d >= 1");
  }
  HolderEstimate est;
  est.m = m;
  est.r = r;
  est.d = d;
  est.R1 = holder_R(m + r + 1, d + 1);
  est.R2 = holder_R(m + r, 2 * d);
  // max(1/R1, 2/R2): compare cross products.
  long long num = 1;
  long long den = est.R1;
  if (2 * est.R1 > est.R2) {
    num = 2;
    den = est.R2;
  }
  if (num >= den) {
    num = 1;
    den = 1;
  }
  const long long g = std::gcd(num, den);
  est.tau0_num = num / g;
  est.tau0_den = den / g;
  est.tau0 = static_cast<double>(est.tau0_num) / static_cast<double>(est.tau0_den);
  return est;
}

// -------------------------------------------------------------- grid oracle

std::vector<double> join_xy(std::span<const double> x, std::span<const double> y) {
  std::vector<double> w(x.begin(), x.end());
  w.insert(w.end(), y.begin(), y.end());
  return w;
}

int default_oracle_grid(int m) { return m <= 1 ? 2001 : (m == 2 ? 201 : 41); }

double lower_value_oracle(const BilevelProblem& p, std::span<const double> x, int grid_per_dim) {
  if (grid_per_dim < 2) throw std::invalid_argument("lower_value_oracle: grid_per_dim must be >= 2");
  if (!p.bounds) throw SemanticError("lower_value_oracle: instance needs N2 to bound the lower feasible set");
  if (x.size() != static_cast<std::size_t>(p.n())) throw StructuralError("lower_value_oracle: x dimension mismatch");
  const int n = p.n();
  const int m = p.m();
  const double n2 = p.bounds->n2;
  const double step = 2.0 * n2 / (grid_per_dim - 1);

  std::vector<double> w(static_cast<std::size_t>(n + m), 0.0);
  std::copy(x.begin(), x.end(), w.begin());
  std::vector<int> idx(static_cast<std::size_t>(m), 0);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    for (int j = 0; j < m; ++j) w[n + j] = -n2 + step * idx[j];
    bool ok = true;
    for (const auto& hj : p.h) {
      if (hj.eval(w) > kFeasibilityTol) {
        ok = false;
        break;
      }
    }
    if (ok) best = std::min(best, p.G.eval(w));
    int j = 0;
    while (j < m && ++idx[j] == grid_per_dim) idx[j++] = 0;
    if (j == m) break;
  }
  return best;
}

}  // namespace bilevel
