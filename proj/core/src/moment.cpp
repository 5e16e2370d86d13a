#include "bilevel/moment.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

namespace bilevel {

int localization_order(int k, int deg) { return k - (deg + 1) / 2; }

int minimal_order(const PolynomialProgram& p) {
  int k = std::max(1, (p.objective().degree() + 1) / 2);
  for (int u : p.ineq_degrees()) k = std::max(k, (u + 1) / 2);
  for (int v : p.eq_degrees()) k = std::max(k, (v + 1) / 2);
  return k;
}

namespace {

// Symbolic localization matrix of `g` over the first basis_size(v, t) basis
// elements, upper triangle only.
sdp::LmiBlock localize(const MomentRelaxation& r, const Polynomial& g, int t) {
  sdp::LmiBlock b;
  b.size = static_cast<int>(basis_size(r.layout.total(), t));
  for (int a = 0; a < b.size; ++a) {
    for (int c = a; c < b.size; ++c) {
      const Monomial ac = r.basis[a] * r.basis[c];
      for (const auto& [gamma, coeff] : g.terms()) {
        const long idx = r.moments.find(ac * gamma);
        b.terms.push_back({static_cast<int>(idx), a, c, coeff});
      }
    }
  }
  return b;
}

std::string describe(const char* kind, int index, int deg) {
  std::ostringstream os;
  os << kind << " constraint " << index << " (degree " << deg << ")";
  return os.str();
}

}  // namespace

MomentRelaxation build_relaxation(const PolynomialProgram& p, int k) {
  const int kmin = minimal_order(p);
  if (k < kmin) {
    std::string culprit;
    if (2 * k < p.objective().degree()) {
      culprit = "objective (degree " + std::to_string(p.objective().degree()) + ")";
    }
    for (std::size_t i = 0; culprit.empty() && i < p.ineq().size(); ++i) {
      if (localization_order(k, p.ineq_degrees()[i]) < 0) {
        culprit = describe("inequality", static_cast<int>(i), p.ineq_degrees()[i]);
      }
    }
    for (std::size_t q = 0; culprit.empty() && q < p.eq().size(); ++q) {
      if (localization_order(k, p.eq_degrees()[q]) < 0) {
        culprit = describe("equality", static_cast<int>(q), p.eq_degrees()[q]);
      }
    }
    if (culprit.empty()) culprit = "order must be at least 1";
    throw RelaxationOrderError("relaxation order " + std::to_string(k) + " is below the minimum " +
                               std::to_string(kmin) + ": " + culprit);
  }

  MomentRelaxation r;
  r.order = k;
  r.layout = p.layout();
  const int v = r.layout.total();
  r.moments = MonomialIndex(v, 2 * k);
  r.basis = MonomialIndex(v, k);

  for (const auto& [gamma, coeff] : p.objective().terms()) {
    r.objective.emplace_back(static_cast<int>(r.moments.at(gamma)), coeff);
  }

  r.psd_blocks.push_back(localize(r, Polynomial::constant(r.layout, 1.0), k));
  r.psd_orders.push_back(k);
  for (std::size_t i = 0; i < p.ineq().size(); ++i) {
    const int t = localization_order(k, p.ineq_degrees()[i]);
    r.psd_blocks.push_back(localize(r, -p.ineq()[i], t));
    r.psd_orders.push_back(t);
  }
  for (std::size_t q = 0; q < p.eq().size(); ++q) {
    const int t = localization_order(k, p.eq_degrees()[q]);
    r.zero_blocks.push_back(localize(r, p.eq()[q], t));
    r.zero_orders.push_back(t);
    // Entry (a, c) depends on alpha_a + alpha_c only, which ranges over all
    // monomials of degree <= 2t.
    for (const Monomial& gamma : monomial_basis(v, 2 * t)) {
      r.zero_rows.push_back({static_cast<int>(q), gamma});
    }
  }
  return r;
}

sdp::Problem MomentRelaxation::to_sdp() const {
  sdp::Problem sp;
  sp.num_vars = static_cast<int>(moments.size());
  sp.objective = objective;
  sp.blocks = psd_blocks;
  sp.equalities.push_back(sdp::SparseRow{{{0, 1.0}}, 1.0});
  for (const ZeroRowTag& tag : zero_rows) {
    // The equality polynomial is recovered from the diagonal-free form of the
    // block: coefficients of H_q are those attached to the (0, 0) entry.
    sdp::SparseRow row;
    const sdp::LmiBlock& blk = zero_blocks[tag.constraint];
    for (const auto& t : blk.terms) {
      if (t.row != 0 || t.col != 0) continue;
      const Monomial shifted = moments[t.var] * tag.gamma;
      row.coeffs.emplace_back(static_cast<int>(moments.at(shifted)), t.value);
    }
    sp.equalities.push_back(std::move(row));
  }
  return sp;
}

void MomentRelaxation::dump(std::ostream& out) const {
  const int v = layout.total();
  out << "moment_relaxation 1\n";
  out << "order " << order << "\n";
  out << "variables " << v << "\n";
  out << "moments " << moments.size() << "\n";
  out << "psd_blocks " << psd_blocks.size();
  for (const auto& b : psd_blocks) out << ' ' << b.size;
  out << "\nzero_blocks " << zero_blocks.size();
  for (const auto& b : zero_blocks) out << ' ' << b.size;
  out << "\nobjective " << objective.size() << "\n";
  out.precision(17);
  for (const auto& [i, c] : objective) out << "  " << i << ' ' << c << "\n";

  // Zero blocks are numbered after the PSD blocks.
  std::vector<std::vector<std::tuple<int, int, int, double>>> by_moment(moments.size());
  auto collect = [&](const std::vector<sdp::LmiBlock>& blocks, int offset) {
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      for (const auto& t : blocks[b].terms) {
        by_moment[t.var].emplace_back(static_cast<int>(b) + offset, t.row, t.col, t.value);
      }
    }
  };
  collect(psd_blocks, 0);
  collect(zero_blocks, static_cast<int>(psd_blocks.size()));
  for (std::size_t i = 0; i < moments.size(); ++i) {
    out << "moment " << i;
    for (int e : moments[i].exponents()) out << ' ' << e;
    out << "\n";
    for (const auto& [b, row, col, val] : by_moment[i]) {
      out << "  " << b << ' ' << row << ' ' << col << ' ' << val << "\n";
    }
  }
}

double localization_entry(const MomentRelaxation& r, const Polynomial& g, int a, int b,
                          const Eigen::VectorXd& z) {
  const Monomial ab = r.basis[a] * r.basis[b];
  double s = 0.0;
  for (const auto& [gamma, coeff] : g.terms()) s += coeff * z[static_cast<long>(r.moments.at(ab * gamma))];
  return s;
}

MomentSolution solve_relaxation(const MomentRelaxation& r, sdp::Solver& solver) {
  MomentSolution ms;
  ms.order = r.order;
  ms.raw = solver.solve(r.to_sdp());
  ms.status = ms.raw.status;
  ms.near_optimal = ms.raw.near_optimal;
  ms.z = ms.raw.z;
  ms.value = ms.raw.primal_objective;
  ms.dual_value = ms.raw.dual_objective;
  ms.diagnostics = ms.raw.diagnostics;
  return ms;
}

// --------------------------------------------------------------- certificate

namespace {

Polynomial gram_polynomial(const MomentRelaxation& r, const Eigen::MatrixXd& Y) {
  Polynomial::TermMap terms;
  for (int a = 0; a < Y.rows(); ++a) {
    for (int c = 0; c < Y.cols(); ++c) terms[r.basis[a] * r.basis[c]] += Y(a, c);
  }
  return Polynomial(r.layout, std::move(terms));
}

}  // namespace

SosCertificate certificate_from_solution(const MomentRelaxation& r, const MomentSolution& sol,
                                         const PolynomialProgram& p) {
  const auto& raw = sol.raw;
  if (raw.block_duals.size() != r.psd_blocks.size() ||
      raw.equality_duals.size() != static_cast<long>(1 + r.zero_rows.size())) {
    throw UnsupportedBySolver("solver did not return the dual multipliers of the relaxation");
  }
  SosCertificate c;
  c.mu = raw.equality_duals[0];
  c.sigma0 = gram_polynomial(r, raw.block_duals[0]);
  for (std::size_t i = 0; i < p.ineq().size(); ++i) {
    c.sigma.push_back(gram_polynomial(r, raw.block_duals[1 + i]));
  }
  std::vector<Polynomial::TermMap> phi(p.eq().size());
  for (std::size_t e = 0; e < r.zero_rows.size(); ++e) {
    const auto& tag = r.zero_rows[e];
    phi[tag.constraint][tag.gamma] -= raw.equality_duals[static_cast<long>(1 + e)];
  }
  for (auto& t : phi) c.phi.emplace_back(r.layout, std::move(t));
  return c;
}

double certificate_residual(const SosCertificate& c, const PolynomialProgram& p, int samples,
                            double radius, std::uint64_t seed) {
  const int v = p.layout().total();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double worst = 0.0;
  std::vector<double> w(v);
  for (int s = 0; s < samples; ++s) {
    double norm = 0.0;
    for (double& wi : w) {
      wi = gauss(rng);
      norm += wi * wi;
    }
    norm = std::sqrt(norm);
    const double scale = radius * std::pow(unif(rng), 1.0 / v) / (norm > 0 ? norm : 1.0);
    for (double& wi : w) wi *= scale;

    const double lhs = p.objective().eval(w) - c.mu;
    double rhs = c.sigma0.eval(w);
    for (std::size_t i = 0; i < c.sigma.size(); ++i) rhs -= c.sigma[i].eval(w) * p.ineq()[i].eval(w);
    for (std::size_t q = 0; q < c.phi.size(); ++q) rhs -= c.phi[q].eval(w) * p.eq()[q].eval(w);
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return worst;
}

SosCheck sos_residual_check(const PolynomialProgram& p, int k, sdp::Solver& solver, int samples,
                            double radius, std::uint64_t seed) {
  const MomentRelaxation r = build_relaxation(p, k);
  SosCheck out;
  out.solution = solve_relaxation(r, solver);
  if (!out.solution.ok()) {
    throw UnsupportedBySolver(std::string("relaxation not solved: ") + sdp::to_string(out.solution.status));
  }
  const SosCertificate c = certificate_from_solution(r, out.solution, p);
  out.mu = c.mu;
  out.residual = certificate_residual(c, p, samples, radius, seed);
  return out;
}

// ------------------------------------------------------------- Gram form

SosProgram build_sos_program(const PolynomialProgram& p, int k, std::optional<double> fixed_mu) {
  // Building the relaxation validates k and gives us the monomial tables.
  const MomentRelaxation r = build_relaxation(p, k);
  const int v = r.layout.total();
  SosProgram out;
  sdp::Problem& sp = out.problem;

  // Coefficient-matching rows, one per moment.
  std::vector<sdp::SparseRow> rows(r.moments.size());
  int next = 0;

  auto add_gram = [&](const Polynomial& weight, int t) {
    const int n = static_cast<int>(basis_size(v, t));
    sdp::LmiBlock blk;
    blk.size = n;
    for (int a = 0; a < n; ++a) {
      for (int c = a; c < n; ++c) {
        const int var = next++;
        blk.terms.push_back({var, a, c, 1.0});
        const double mult = a == c ? 1.0 : 2.0;
        const Monomial ac = r.basis[a] * r.basis[c];
        for (const auto& [gamma, coeff] : weight.terms()) {
          rows[r.moments.at(ac * gamma)].coeffs.emplace_back(var, mult * coeff);
        }
      }
    }
    sp.blocks.push_back(std::move(blk));
  };

  // f - mu = sigma0 + sum sigma_p (-G_p) + sum psi_q H_q
  add_gram(Polynomial::constant(r.layout, 1.0), r.order);
  for (std::size_t i = 0; i < p.ineq().size(); ++i) add_gram(-p.ineq()[i], r.psd_orders[1 + i]);
  for (std::size_t q = 0; q < p.eq().size(); ++q) {
    for (const Monomial& gamma : monomial_basis(v, 2 * r.zero_orders[q])) {
      const int var = next++;
      for (const auto& [delta, coeff] : p.eq()[q].terms()) {
        rows[r.moments.at(gamma * delta)].coeffs.emplace_back(var, coeff);
      }
    }
  }
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].rhs = p.objective().coefficient(r.moments[i]);
  if (fixed_mu) {
    rows[0].rhs -= *fixed_mu;
  } else {
    out.mu_var = next++;
    rows[0].coeffs.emplace_back(out.mu_var, 1.0);
    sp.objective = {{out.mu_var, -1.0}};
  }
  sp.num_vars = next;
  for (auto& row : rows) {
    if (!row.coeffs.empty() || row.rhs != 0.0) sp.equalities.push_back(std::move(row));
  }
  return out;
}

}  // namespace bilevel

namespace bilevel {

namespace {

Polynomial substitute_scaled(const Polynomial& p, const std::vector<double>& scale, double& max_coeff) {
  Polynomial::TermMap terms;
  max_coeff = 0.0;
  for (const auto& [m, c] : p.terms()) {
    double v = c;
    for (std::size_t i = 0; i < m.size(); ++i) v *= std::pow(scale[i], m[i]);
    terms.emplace(m, v);
    max_coeff = std::max(max_coeff, std::abs(v));
  }
  return Polynomial(p.layout(), std::move(terms));
}

Polynomial normalized(const Polynomial& p, const std::vector<double>& scale) {
  double mx = 0.0;
  Polynomial q = substitute_scaled(p, scale, mx);
  return mx > 0.0 ? q * (1.0 / mx) : q;
}

}  // namespace

ConditionedProgram condition_program(const PolynomialProgram& p, std::vector<double> scale,
                                     bool normalize_objective) {
  const auto v = static_cast<std::size_t>(p.layout().total());
  if (scale.size() != v) throw StructuralError("condition_program: scale vector has wrong length");
  for (double s : scale) {
    if (!(s > 0.0) || !std::isfinite(s)) throw StructuralError("condition_program: scales must be positive");
  }
  ConditionedProgram out;
  double mx = 0.0;
  Polynomial f = substitute_scaled(p.objective(), scale, mx);
  if (normalize_objective && mx > 0.0) {
    out.objective_scale = mx;
    f *= 1.0 / mx;
  }
  std::vector<Polynomial> in, eq;
  for (const auto& g : p.ineq()) in.push_back(normalized(g, scale));
  for (const auto& h : p.eq()) eq.push_back(normalized(h, scale));
  out.program = PolynomialProgram(std::move(f), std::move(in), std::move(eq));
  out.scale = std::move(scale);
  return out;
}

std::vector<double> ConditionedProgram::to_original(std::span<const double> w) const {
  std::vector<double> out(w.begin(), w.end());
  for (std::size_t i = 0; i < out.size() && i < scale.size(); ++i) out[i] *= scale[i];
  return out;
}

std::vector<double> ConditionedProgram::to_conditioned(std::span<const double> w) const {
  std::vector<double> out(w.begin(), w.end());
  for (std::size_t i = 0; i < out.size() && i < scale.size(); ++i) out[i] /= scale[i];
  return out;
}

}  // namespace bilevel
