// Atom extraction from a flat moment matrix (Henrion-Lasserre).

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <random>

#include "bilevel/moment.hpp"

namespace bilevel {

int numerical_rank(const Eigen::VectorXd& ev, double rank_tol) {
  if (ev.size() == 0 || ev[0] <= 0.0) return 0;
  int rank = 1;
  for (; rank < ev.size(); ++rank) {
    const double prev = ev[rank - 1];
    const double cur = ev[rank];
    if (cur <= 0.0 || cur < rank_tol * prev || cur < 1e-9 * ev[0]) break;
  }
  return rank;
}

namespace {

Eigen::MatrixXd moment_matrix(const MomentRelaxation& r, const Eigen::VectorXd& z, int t) {
  const int n = static_cast<int>(basis_size(r.layout.total(), t));
  Eigen::MatrixXd M(n, n);
  for (int a = 0; a < n; ++a) {
    for (int c = a; c < n; ++c) {
      M(a, c) = M(c, a) = z[static_cast<long>(r.moments.at(r.basis[a] * r.basis[c]))];
    }
  }
  return M;
}

struct Spectrum {
  Eigen::VectorXd values;  // descending
  Eigen::MatrixXd vectors;
};

Spectrum spectrum(const Eigen::MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  Spectrum s;
  s.values = es.eigenvalues().reverse();
  s.vectors = es.eigenvectors().rowwise().reverse();
  return s;
}

bool check_atoms(const std::vector<std::vector<double>>& pts, const PolynomialProgram& p, double bound) {
  const double tol = 1e-4;
  for (const auto& x : pts) {
    if (!p.is_feasible(x, tol)) return false;
    if (std::abs(p.objective().eval(x) - bound) > tol * std::max(1.0, std::abs(bound))) return false;
  }
  return true;
}

}  // namespace

ExtractionResult extract_minimizers(const MomentRelaxation& r, const MomentSolution& sol,
                                    const PolynomialProgram& p, double rank_tol) {
  ExtractionResult res;
  res.moment_value = sol.value;
  const int v = r.layout.total();
  const Eigen::VectorXd& z = sol.z;
  for (int i = 0; i < v; ++i) res.first_moments.push_back(z[static_cast<long>(r.moments.at(Monomial::unit(v, i)))]);

  auto fallback = [&](std::string note) {
    res.certified = false;
    res.points = {res.first_moments};
    res.note = std::move(note);
    return res;
  };

  int d0 = 1;
  for (int u : p.ineq_degrees()) d0 = std::max(d0, (u + 1) / 2);
  for (int w : p.eq_degrees()) d0 = std::max(d0, (w + 1) / 2);

  std::vector<Spectrum> spec;
  for (int t = 0; t <= r.order; ++t) {
    spec.push_back(spectrum(moment_matrix(r, z, t)));
    res.ranks.push_back(numerical_rank(spec.back().values, rank_tol));
  }
  if (res.ranks[r.order] == 0) throw DegenerateMomentMatrix("moment matrix has numerical rank 0");

  for (int t = d0; t <= r.order; ++t) {
    if (res.ranks[t] == res.ranks[t - d0]) {
      res.flat_order = t;
      break;
    }
  }
  if (res.flat_order < 0) return fallback("rank condition not met");

  const int t = res.flat_order;
  const int rank = res.ranks[t];
  const Spectrum& S = spec[t];
  const long n = S.values.size();
  // V V^T ~ M_t with V in R^{n x rank}.
  Eigen::MatrixXd V = S.vectors.leftCols(rank) * S.values.head(rank).cwiseSqrt().asDiagonal();

  // Greedy in-order row basis of V.
  std::vector<int> pivots;
  Eigen::MatrixXd Q(rank, 0);
  const double scale = V.rowwise().norm().maxCoeff();
  for (long i = 0; i < n && static_cast<int>(pivots.size()) < rank; ++i) {
    Eigen::VectorXd row = V.row(i).transpose();
    if (Q.cols() > 0) row -= Q * (Q.transpose() * row);
    if (row.norm() > 1e-6 * scale) {
      pivots.push_back(static_cast<int>(i));
      Q.conservativeResize(Eigen::NoChange, Q.cols() + 1);
      Q.col(Q.cols() - 1) = row.normalized();
    }
  }
  if (static_cast<int>(pivots.size()) < rank) return fallback("row basis incomplete");
  for (int pv : pivots) {
    if (r.basis[pv].degree() >= t) return fallback("basis monomial of full degree");
  }

  Eigen::MatrixXd W(rank, rank);
  for (int j = 0; j < rank; ++j) W.row(j) = V.row(pivots[j]);
  // Every row of V expressed in terms of the pivot rows.
  const Eigen::MatrixXd U = V * W.fullPivLu().inverse();

  std::vector<Eigen::MatrixXd> N(v, Eigen::MatrixXd(rank, rank));
  for (int i = 0; i < v; ++i) {
    for (int j = 0; j < rank; ++j) {
      const Monomial shifted = r.basis[pivots[j]] * Monomial::unit(v, i);
      N[i].row(j) = U.row(static_cast<long>(r.basis.at(shifted)));
    }
  }

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::MatrixXd comb = Eigen::MatrixXd::Zero(rank, rank);
  double total = 0.0;
  std::vector<double> c(v);
  for (double& ci : c) total += (ci = unif(rng));
  for (int i = 0; i < v; ++i) comb += (c[i] / total) * N[i];

  Eigen::RealSchur<Eigen::MatrixXd> schur(comb);
  const Eigen::MatrixXd& Qs = schur.matrixU();
  for (int j = 0; j < rank; ++j) {
    std::vector<double> pt(v);
    for (int i = 0; i < v; ++i) pt[i] = Qs.col(j).dot(N[i] * Qs.col(j));
    res.points.push_back(std::move(pt));
  }

  if (!check_atoms(res.points, p, sol.value)) {
    res.points.clear();
    return fallback("extracted atoms failed the feasibility or value check");
  }
  res.certified = true;
  return res;
}

}  // namespace bilevel
