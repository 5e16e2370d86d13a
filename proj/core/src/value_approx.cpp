#include "bilevel/value_approx.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

namespace bilevel {

double BoxMoments::operator()(const Monomial& beta) const {
  const long i = index.find(beta);
  if (i < 0) throw StructuralError("box moment requested beyond the computed degree");
  return gamma[static_cast<std::size_t>(i)];
}

BoxMoments box_moments(int n, double M, int t) {
  if (!(M > 0.0)) throw std::invalid_argument("box_moments: M must be positive");
  if (t < 0 || n < 0) throw std::invalid_argument("box_moments: n and t must be nonnegative");
  BoxMoments bm;
  bm.n = n;
  bm.M = M;
  bm.t = t;
  bm.index = MonomialIndex(n, t);
  bm.gamma.reserve(bm.index.size());
  for (const Monomial& beta : bm.index.basis()) {
    double g = 1.0;
    for (int l = 0; l < n; ++l) {
      const int b = beta[static_cast<std::size_t>(l)];
      if (b % 2 != 0) {
        g = 0.0;
        break;
      }
      g *= std::pow(M, b) / (b + 1);
    }
    bm.gamma.push_back(g);
  }
  return bm;
}

int value_order_min(const BilevelProblem& p) {
  int k0 = std::max(1, (p.G.degree() + 1) / 2);
  for (const auto& h : p.h) k0 = std::max(k0, (h.degree() + 1) / 2);
  return k0;
}

namespace {

Polynomial gram(const MomentRelaxation& r, const Eigen::MatrixXd& Y) {
  Polynomial::TermMap terms;
  for (int a = 0; a < Y.rows(); ++a) {
    for (int c = 0; c < Y.cols(); ++c) terms[r.basis[a] * r.basis[c]] += Y(a, c);
  }
  return Polynomial(r.layout, std::move(terms));
}

Monomial embed_x(const Monomial& beta, int total) {
  std::vector<int> e(static_cast<std::size_t>(total), 0);
  std::copy(beta.exponents().begin(), beta.exponents().end(), e.begin());
  return Monomial(std::move(e));
}

}  // namespace

ValuePolyApprox approximate_value_function(const BilevelProblem& p, int k, sdp::Solver& solver,
                                           const ValueApproxOptions& opts) {
  if (!p.bounds) throw SemanticError("value approximation needs N2 to bound the lower variables");
  const int k0 = value_order_min(p);
  if (k < k0) {
    throw RelaxationOrderError("value approximation order " + std::to_string(k) + " is below k0 = " +
                               std::to_string(k0));
  }
  const int n = p.n();
  const int m = p.m();
  const VarLayout L = p.layout;
  const double M = p.box_M;
  const double n2 = p.bounds->n2;

  ValuePolyApprox out;
  out.k = k;
  std::vector<Polynomial> ineq = p.h;
  for (int l = 0; l < n; ++l) {
    const Polynomial xl = Polynomial::variable(L, l);
    const Polynomial xt = Polynomial::variable(VarLayout(n, 0, 0), l);
    out.theta.push_back(xt * xt - M * M);
    ineq.push_back(xl * xl - M * M);
  }

  // Work in coordinates scaled to the unit box.
  std::vector<double> scale(static_cast<std::size_t>(n + m), M);
  std::fill(scale.begin() + n, scale.end(), n2);
  const ConditionedProgram cp = condition_program(PolynomialProgram(p.G, ineq, {}), scale);
  const double sG = cp.objective_scale;

  const MomentRelaxation r = build_relaxation(cp.program, k);
  sdp::Problem sp = r.to_sdp();
  const BoxMoments unit = box_moments(n, 1.0, 2 * k);
  const long first_marginal = static_cast<long>(sp.equalities.size());
  for (std::size_t i = 1; i < unit.index.size(); ++i) {
    sdp::SparseRow row;
    row.coeffs.emplace_back(static_cast<int>(r.moments.at(embed_x(unit.index[i], n + m))), 1.0);
    row.rhs = unit.gamma[i];
    sp.equalities.push_back(std::move(row));
  }

  const sdp::Solution sol = solver.solve(sp);
  if (sol.status != sdp::Status::optimal) {
    throw SolverFailure(std::string("value approximation SDP: ") + sdp::to_string(sol.status) + " (" +
                        sol.diagnostics + ")");
  }
  if (sol.equality_duals.size() != static_cast<long>(sp.equalities.size()) ||
      sol.block_duals.size() != r.psd_blocks.size()) {
    throw UnsupportedBySolver("solver did not return the multipliers of the value approximation");
  }
  out.near_optimal = sol.near_optimal;
  out.diagnostics = sol.diagnostics;

  // lambda'_beta in scaled coordinates; J_k(x) = sG * sum lambda'_beta (x / M)^beta.
  const VarLayout Lx(n, 0, 0);
  std::vector<double> lam(unit.index.size());
  lam[0] = sol.equality_duals[0];
  for (std::size_t i = 1; i < unit.index.size(); ++i) {
    lam[i] = sol.equality_duals[first_marginal + static_cast<long>(i) - 1];
  }
  Polynomial::TermMap jt;
  double gap = 0.0;
  for (std::size_t i = 0; i < unit.index.size(); ++i) {
    const Monomial& beta = unit.index[i];
    gap += lam[i] * unit.gamma[i];
    if (lam[i] != 0.0) jt.emplace(beta, sG * lam[i] / std::pow(M, beta.degree()));
  }
  out.Jk = Polynomial(Lx, std::move(jt));
  out.certificate_gap = sG * gap;
  out.eps_k = sG * std::abs(sol.primal_objective - sol.dual_objective);

  // Certificate identity in scaled coordinates, reported in original units.
  const Polynomial sigma0 = gram(r, sol.block_duals[0]);
  std::vector<Polynomial> sigma;
  for (std::size_t b = 1; b < sol.block_duals.size(); ++b) sigma.push_back(gram(r, sol.block_duals[b]));
  Polynomial::TermMap jst;
  for (std::size_t i = 0; i < unit.index.size(); ++i) {
    if (lam[i] != 0.0) jst.emplace(embed_x(unit.index[i], n + m), lam[i]);
  }
  const Polynomial lhs = cp.program.objective() - Polynomial(L, std::move(jst));
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<double> w(static_cast<std::size_t>(n + m));
  double worst = 0.0;
  for (int s = 0; s < opts.samples; ++s) {
    for (double& wi : w) wi = unif(rng);
    double rhs = sigma0.eval(w);
    for (std::size_t j = 0; j < sigma.size(); ++j) rhs -= sigma[j].eval(w) * cp.program.ineq()[j].eval(w);
    worst = std::max(worst, std::abs(lhs.eval(w) - rhs));
  }
  out.sos_residual = sG * worst;
  out.sos_ok = out.sos_residual <= opts.residual_tol;
  return out;
}

std::vector<GridRow> sample_grid(const ValuePolyApprox& v, const BilevelProblem& p, int points, int oracle_grid) {
  if (points < 2) throw std::invalid_argument("sample_grid: need at least 2 points");
  const int n = p.n();
  const double M = p.box_M;
  const int og = oracle_grid > 0 ? oracle_grid : default_oracle_grid(p.m());
  std::vector<GridRow> rows;
  rows.reserve(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    const double s = i == points - 1 ? M : -M + 2.0 * M * i / (points - 1);
    const std::vector<double> x(static_cast<std::size_t>(n), s);
    GridRow row;
    row.x = s;
    row.Jk = v.eval(x);
    row.Joracle = n == 1 ? lower_value_oracle(p, x, og) : std::numeric_limits<double>::quiet_NaN();
    rows.push_back(row);
  }
  return rows;
}

void write_grid_csv(const std::vector<GridRow>& rows, std::ostream& out) {
  std::ostringstream buf;
  buf << std::setprecision(17);
  buf << "x,Jk,Joracle\n";
  for (const auto& r : rows) buf << r.x << ',' << r.Jk << ',' << r.Joracle << '\n';
  out << buf.str();
}

}  // namespace bilevel
