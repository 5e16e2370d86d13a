#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "bilevel/sdp.hpp"

namespace bilevel::sdp {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Entry {
  int row;
  int col;
  double value;
};

// Coefficient matrix of one reduced variable inside one block. Entries list
// both triangles so that <F, M> = sum value * M(row, col) for any M.
struct VarMatrix {
  int var;
  std::vector<Entry> entries;
  std::vector<int> rows;
};

struct ReducedBlock {
  int size = 0;
  MatrixXd constant;
  std::vector<VarMatrix> vars;
};

// z = offset + sum_k t_k * column_k, with the equalities eliminated.
struct Reduction {
  bool consistent = true;
  double inconsistency = 0.0;
  VectorXd offset;
  std::vector<std::vector<std::pair<int, double>>> expr;  // per original variable
  int num_free = 0;
};

Reduction eliminate_equalities(const Problem& p) {
  const int n = p.num_vars;
  const int m = static_cast<int>(p.equalities.size());
  Reduction red;
  red.offset = VectorXd::Zero(n);
  red.expr.assign(static_cast<std::size_t>(n), {});
  if (m == 0) {
    red.num_free = n;
    for (int i = 0; i < n; ++i) red.expr[static_cast<std::size_t>(i)] = {{i, 1.0}};
    return red;
  }

  MatrixXd A = MatrixXd::Zero(m, n);
  VectorXd b(m);
  for (int e = 0; e < m; ++e) {
    for (const auto& [v, c] : p.equalities[static_cast<std::size_t>(e)].coeffs) A(e, v) += c;
    b[e] = p.equalities[static_cast<std::size_t>(e)].rhs;
    const double s = A.row(e).cwiseAbs().maxCoeff();
    if (s > 0) {
      A.row(e) /= s;
      b[e] /= s;
    }
  }
  const double bscale = 1.0 + b.cwiseAbs().maxCoeff();

  std::vector<bool> row_used(static_cast<std::size_t>(m), false);
  std::vector<bool> col_pivot(static_cast<std::size_t>(n), false);
  std::vector<std::pair<int, int>> pivots;  // (row, col)
  constexpr double kPivotTol = 1e-10;
  while (true) {
    double best = 0.0;
    int pr = -1, pc = -1;
    for (int i = 0; i < m; ++i) {
      if (row_used[static_cast<std::size_t>(i)]) continue;
      for (int j = 0; j < n; ++j) {
        if (col_pivot[static_cast<std::size_t>(j)]) continue;
        const double a = std::abs(A(i, j));
        if (a > best) {
          best = a;
          pr = i;
          pc = j;
        }
      }
    }
    if (pr < 0 || best <= kPivotTol) break;
    row_used[static_cast<std::size_t>(pr)] = true;
    col_pivot[static_cast<std::size_t>(pc)] = true;
    pivots.emplace_back(pr, pc);
    const double inv = 1.0 / A(pr, pc);
    A.row(pr) *= inv;
    b[pr] *= inv;
    A(pr, pc) = 1.0;
    for (int k = 0; k < m; ++k) {
      if (k == pr) continue;
      const double f = A(k, pc);
      if (f == 0.0) continue;
      A.row(k) -= f * A.row(pr);
      b[k] -= f * b[pr];
      A(k, pc) = 0.0;
    }
  }
  for (int i = 0; i < m; ++i) {
    if (row_used[static_cast<std::size_t>(i)]) continue;
    red.inconsistency = std::max(red.inconsistency, std::abs(b[i]) / bscale);
  }
  if (red.inconsistency > 1e-8) {
    red.consistent = false;
    return red;
  }

  std::vector<int> free_index(static_cast<std::size_t>(n), -1);
  for (int j = 0; j < n; ++j) {
    if (!col_pivot[static_cast<std::size_t>(j)]) {
      free_index[static_cast<std::size_t>(j)] = red.num_free++;
      red.expr[static_cast<std::size_t>(j)] = {{free_index[static_cast<std::size_t>(j)], 1.0}};
    }
  }
  for (const auto& [r, c] : pivots) {
    red.offset[c] = b[r];
    auto& ex = red.expr[static_cast<std::size_t>(c)];
    for (int j = 0; j < n; ++j) {
      const int k = free_index[static_cast<std::size_t>(j)];
      if (k < 0) continue;
      const double a = A(r, j);
      if (std::abs(a) > 1e-14) ex.emplace_back(k, -a);
    }
  }
  return red;
}

std::vector<ReducedBlock> reduce_blocks(const Problem& p, const Reduction& red) {
  std::vector<ReducedBlock> out;
  out.reserve(p.blocks.size());
  for (const auto& blk : p.blocks) {
    ReducedBlock rb;
    rb.size = blk.size;
    rb.constant = MatrixXd::Zero(blk.size, blk.size);
    const long long nn = static_cast<long long>(blk.size) * blk.size;
    std::unordered_map<long long, double> acc;
    auto put_const = [&](int r, int c, double v) {
      rb.constant(r, c) += v;
      if (r != c) rb.constant(c, r) += v;
    };
    for (const auto& t : blk.terms) {
      int r = t.row, c = t.col;
      if (r > c) std::swap(r, c);
      if (t.var < 0) {
        put_const(r, c, t.value);
        continue;
      }
      const double off = red.offset[t.var];
      if (off != 0.0) put_const(r, c, t.value * off);
      for (const auto& [k, coef] : red.expr[static_cast<std::size_t>(t.var)]) {
        acc[k * nn + static_cast<long long>(r) * blk.size + c] += t.value * coef;
      }
    }
    std::unordered_map<int, std::size_t> slot;
    for (const auto& [key, v] : acc) {
      if (std::abs(v) < 1e-15) continue;
      const int k = static_cast<int>(key / nn);
      const long long rc = key % nn;
      const int r = static_cast<int>(rc / blk.size);
      const int c = static_cast<int>(rc % blk.size);
      auto it = slot.find(k);
      if (it == slot.end()) {
        it = slot.emplace(k, rb.vars.size()).first;
        rb.vars.push_back(VarMatrix{k, {}, {}});
      }
      auto& vm = rb.vars[it->second];
      vm.entries.push_back({r, c, v});
      if (r != c) vm.entries.push_back({c, r, v});
    }
    std::sort(rb.vars.begin(), rb.vars.end(), [](const VarMatrix& a, const VarMatrix& b) { return a.var < b.var; });
    for (auto& vm : rb.vars) {
      for (const auto& e : vm.entries) vm.rows.push_back(e.row);
      std::sort(vm.rows.begin(), vm.rows.end());
      vm.rows.erase(std::unique(vm.rows.begin(), vm.rows.end()), vm.rows.end());
    }
    out.push_back(std::move(rb));
  }
  return out;
}

double inner(const VarMatrix& F, const MatrixXd& M) {
  double s = 0.0;
  for (const auto& e : F.entries) s += e.value * M(e.row, e.col);
  return s;
}

// Largest alpha with X + alpha dX PSD (infinity when unrestricted).
double max_step(const MatrixXd& X, const MatrixXd& dX) {
  Eigen::LLT<MatrixXd> llt(X);
  if (llt.info() != Eigen::Success) return 0.0;
  MatrixXd W = llt.matrixL().solve(dX);
  W = llt.matrixL().solve(W.transpose()).transpose();
  W = 0.5 * (W + W.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(W, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  if (lmin >= 0.0) return std::numeric_limits<double>::infinity();
  return -1.0 / lmin;
}

MatrixXd sym(const MatrixXd& M) { return 0.5 * (M + M.transpose()); }

struct IpmResult {
  VectorXd t;
  std::vector<MatrixXd> Y;
  std::vector<MatrixXd> X;
  double pinf = 0, dinf = 0, gap = 0;
  double pobj = 0, dobj = 0;
  int iterations = 0;
  bool converged = false;
  bool near = false;
  bool dual_diverged = false;
  bool primal_diverged = false;
  std::string note;
};

class ReducedIpm {
 public:
  ReducedIpm(const std::vector<ReducedBlock>& blocks, VectorXd c, double c0, const IpmSettings& s)
      : blocks_(blocks), c_(std::move(c)), c0_(c0), set_(s), nvar_(static_cast<int>(c_.size())) {}

  IpmResult run();

 private:
  void residuals(const VectorXd& t, const std::vector<MatrixXd>& X, const std::vector<MatrixXd>& Y,
                 std::vector<MatrixXd>& Rp, VectorXd& rd) const;
  bool schur(const std::vector<MatrixXd>& Xinv, const std::vector<MatrixXd>& Y, MatrixXd& B) const;
  VectorXd rhs(const std::vector<MatrixXd>& Q, const VectorXd& rd) const;

  const std::vector<ReducedBlock>& blocks_;

  VectorXd c_;
  double c0_;
  IpmSettings set_;
  int nvar_;
};

void ReducedIpm::residuals(const VectorXd& t, const std::vector<MatrixXd>& X, const std::vector<MatrixXd>& Y,
                           std::vector<MatrixXd>& Rp, VectorXd& rd) const {
  rd = c_;
  Rp.resize(blocks_.size());
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const auto& blk = blocks_[b];
    MatrixXd F = blk.constant;
    for (const auto& vm : blk.vars) {
      const double tv = t[vm.var];
      for (const auto& e : vm.entries) F(e.row, e.col) += tv * e.value;
      rd[vm.var] -= inner(vm, Y[b]);
    }
    Rp[b] = F - X[b];
  }
}

bool ReducedIpm::schur(const std::vector<MatrixXd>& Xinv, const std::vector<MatrixXd>& Y, MatrixXd& B) const {
  B.setZero(nvar_, nvar_);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const auto& blk = blocks_[b];
    const int n = blk.size;
    std::vector<int> local(static_cast<std::size_t>(n), -1);
    for (std::size_t i = 0; i < blk.vars.size(); ++i) {
      const auto& Fi = blk.vars[i];
      const int np = static_cast<int>(Fi.rows.size());
      for (int k = 0; k < np; ++k) local[static_cast<std::size_t>(Fi.rows[static_cast<std::size_t>(k)])] = k;
      // T = F_i X^{-1} restricted to the nonzero rows of F_i.
      MatrixXd T = MatrixXd::Zero(np, n);
      for (const auto& e : Fi.entries) T.row(local[static_cast<std::size_t>(e.row)]) += e.value * Xinv[b].row(e.col);
      // R = Y F_i X^{-1}.
      MatrixXd Ysub(n, np);
      for (int k = 0; k < np; ++k) Ysub.col(k) = Y[b].col(Fi.rows[static_cast<std::size_t>(k)]);
      const MatrixXd R = Ysub * T;
      for (std::size_t j = 0; j < blk.vars.size(); ++j) {
        const auto& Fj = blk.vars[j];
        double s = 0.0;
        for (const auto& e : Fj.entries) s += e.value * R(e.col, e.row);
        B(Fi.var, Fj.var) += s;
      }
    }
  }
  return B.allFinite();
}

VectorXd ReducedIpm::rhs(const std::vector<MatrixXd>& Q, const VectorXd& rd) const {
  VectorXd r = -rd;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    for (const auto& vm : blocks_[b].vars) r[vm.var] += inner(vm, Q[b]);
  }
  return r;
}

IpmResult ReducedIpm::run() {
  const std::size_t nb = blocks_.size();
  IpmResult res;
  res.t = VectorXd::Zero(nvar_);
  res.X.resize(nb);
  res.Y.resize(nb);

  int ntot = 0;
  double norm_fc = 0.0;
  for (std::size_t b = 0; b < nb; ++b) {
    const auto& blk = blocks_[b];
    ntot += blk.size;
    norm_fc += blk.constant.squaredNorm();
    double max_norm_f = blk.constant.norm();
    double max_ratio = 0.0;
    for (const auto& vm : blk.vars) {
      double nf = 0.0;
      for (const auto& e : vm.entries) nf += e.value * e.value;
      nf = std::sqrt(nf);
      max_norm_f = std::max(max_norm_f, nf);
      max_ratio = std::max(max_ratio, (1.0 + std::abs(c_[vm.var])) / (1.0 + nf));
    }
    const double n = blk.size;
    const double xi = std::max({10.0, std::sqrt(n), n * max_ratio});
    const double eta = std::max({10.0, std::sqrt(n), max_norm_f});
    res.X[b] = eta * MatrixXd::Identity(blk.size, blk.size);
    res.Y[b] = xi * MatrixXd::Identity(blk.size, blk.size);
  }
  norm_fc = std::sqrt(norm_fc);
  const double norm_c = c_.norm();

  std::vector<MatrixXd> Rp, Xinv(nb), Q(nb), dX(nb), dY(nb), dXa(nb), dYa(nb), XY(nb), G(nb), Gi(nb), Hs(nb);
  std::vector<VectorXd> lam(nb);
  VectorXd rd;
  MatrixXd B;
  int stall = 0;
  // Best iterate seen, by the worst of the three residual measures. Problems
  // without an interior tend to stall slightly above the target and can then
  // lose definiteness; the best point is returned in that case.
  IpmResult best;
  double best_merit = std::numeric_limits<double>::infinity();
  int since_best = 0;

  for (int it = 0; it <= set_.max_iterations; ++it) {
    res.iterations = it;
    residuals(res.t, res.X, res.Y, Rp, rd);
    double rp2 = 0.0, xy = 0.0, fcy = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
      rp2 += Rp[b].squaredNorm();
      xy += res.X[b].cwiseProduct(res.Y[b]).sum();
      fcy += blocks_[b].constant.cwiseProduct(res.Y[b]).sum();
    }
    res.pobj = c_.dot(res.t) + c0_;
    res.dobj = c0_ - fcy;
    res.pinf = std::sqrt(rp2) / (1.0 + norm_fc);
    res.dinf = rd.norm() / (1.0 + norm_c);
    const double denom = 1.0 + std::abs(res.pobj) + std::abs(res.dobj);
    res.gap = std::max(std::abs(res.pobj - res.dobj), std::abs(xy)) / denom;
    const double mu = xy / ntot;

    if (set_.verbose) {
      std::cerr << std::scientific << std::setprecision(3) << "ipm it " << it << " pobj " << res.pobj
                << " dobj " << res.dobj << " pinf " << res.pinf << " dinf " << res.dinf << " gap "
                << res.gap << " mu " << mu << '\n';
    }
    if (res.pinf <= set_.tolerance && res.dinf <= set_.tolerance && res.gap <= set_.tolerance) {
      res.converged = true;
      break;
    }
    const double merit = std::max({res.pinf, res.dinf, res.gap});
    if (merit < 0.5 * best_merit) {
      best = res;
      best_merit = merit;
      since_best = 0;
    } else if (++since_best >= 10 && best_merit <= set_.near_tolerance) {
      res.note = "no progress beyond the relaxed tolerance";
      break;
    }
    if (it == set_.max_iterations) {
      res.note = "iteration limit reached";
      break;
    }
    double ymax = 0.0, xmax = res.t.size() ? res.t.cwiseAbs().maxCoeff() : 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
      ymax = std::max(ymax, res.Y[b].cwiseAbs().maxCoeff());
      xmax = std::max(xmax, res.X[b].cwiseAbs().maxCoeff());
    }
    if (ymax > set_.divergence_limit) {
      res.dual_diverged = true;
      res.note = "dual iterates diverging";
      break;
    }
    if (xmax > set_.divergence_limit) {
      res.primal_diverged = true;
      res.note = "primal iterates diverging";
      break;
    }

    const bool nt = set_.direction == IpmDirection::nt;
    bool ok = true;
    for (std::size_t b = 0; b < nb && ok; ++b) {
      const int n = blocks_[b].size;
      Eigen::LLT<MatrixXd> llt(res.X[b]);
      if (llt.info() != Eigen::Success) {
        ok = false;
        break;
      }
      if (!nt) {
        Xinv[b] = sym(llt.solve(MatrixXd::Identity(n, n)));
        continue;
      }
      // NT scaling: G^{-1} X G^{-T} = G^T Y G = diag(lam).
      Eigen::LLT<MatrixXd> lly(res.Y[b]);
      if (lly.info() != Eigen::Success) {
        ok = false;
        break;
      }
      const MatrixXd L = llt.matrixL();
      const MatrixXd R = lly.matrixL();
      Eigen::JacobiSVD<MatrixXd> svd(R.transpose() * L, Eigen::ComputeFullU | Eigen::ComputeFullV);
      lam[b] = svd.singularValues();
      if (!(lam[b].minCoeff() > 0.0)) {
        ok = false;
        break;
      }
      const MatrixXd Linv = llt.matrixL().solve(MatrixXd::Identity(n, n));
      G[b] = L * svd.matrixV() * lam[b].cwiseSqrt().cwiseInverse().asDiagonal();
      Gi[b] = lam[b].cwiseSqrt().asDiagonal() * svd.matrixV().transpose() * Linv;
      Xinv[b] = sym(Gi[b].transpose() * Gi[b]);  // W^{-1}
    }
    if (!ok || !schur(Xinv, nt ? Xinv : res.Y, B)) {
      res.note = "primal slack lost definiteness";
      break;
    }
    // Regularize tiny pivots; free variables absent from every block give
    // zero rows.
    // With HKM, B is symmetric only in exact arithmetic. Its symmetric part is
    // factored; refinement below then solves with B itself, so that the dual
    // direction stays consistent with F^*(Y) = c.
    const MatrixXd Bs = sym(B);
    const double diag_max = nvar_ ? Bs.diagonal().cwiseAbs().maxCoeff() : 0.0;
    Eigen::LLT<MatrixXd> chol;
    double reg = 1e-14 * std::max(diag_max, 1e-300);
    for (int attempt = 0; attempt < 8; ++attempt) {
      chol.compute(Bs + reg * MatrixXd::Identity(nvar_, nvar_));
      if (chol.info() == Eigen::Success) break;
      reg *= 100.0;
    }
    if (chol.info() != Eigen::Success) {
      res.note = "Schur complement factorization failed";
      break;
    }

    // Rc is the complementarity residual: X Y space for HKM, scaled space
    // (diagonal lam) for NT.
    auto direction = [&](const std::vector<MatrixXd>& Rc, std::vector<MatrixXd>& dXo, std::vector<MatrixXd>& dYo,
                         VectorXd& dt) {
      for (std::size_t b = 0; b < nb; ++b) {
        if (nt) {
          const long n = lam[b].size();
          MatrixXd H(n, n);
          for (long i = 0; i < n; ++i)
            for (long j = 0; j < n; ++j) H(i, j) = 2.0 * Rc[b](i, j) / (lam[b][i] + lam[b][j]);
          Hs[b] = sym(Gi[b].transpose() * H * Gi[b]);
          Q[b] = Hs[b] - Xinv[b] * Rp[b] * Xinv[b];
        } else {
          Q[b] = Xinv[b] * (Rc[b] - Rp[b] * res.Y[b]);
        }
      }
      const VectorXd r0 = rhs(Q, rd);
      dt = chol.solve(r0);
      for (int pass = 0; pass < 5; ++pass) {
        const VectorXd res_r = r0 - B * dt;
        if (res_r.norm() <= 1e-15 * (1.0 + r0.norm())) break;
        dt += chol.solve(res_r);
      }
      for (std::size_t b = 0; b < nb; ++b) {
        dXo[b] = Rp[b];
        for (const auto& vm : blocks_[b].vars) {
          const double d = dt[vm.var];
          for (const auto& e : vm.entries) dXo[b](e.row, e.col) += d * e.value;
        }
        if (nt) {
          dYo[b] = sym(Hs[b] - Xinv[b] * dXo[b] * Xinv[b]);
        } else {
          dYo[b] = sym(Xinv[b] * (Rc[b] - dXo[b] * res.Y[b]));
        }
      }
    };
    auto steps = [&](const std::vector<MatrixXd>& dXo, const std::vector<MatrixXd>& dYo, double& ap, double& ad) {
      ap = std::numeric_limits<double>::infinity();
      ad = std::numeric_limits<double>::infinity();
      for (std::size_t b = 0; b < nb; ++b) {
        ap = std::min(ap, max_step(res.X[b], dXo[b]));
        ad = std::min(ad, max_step(res.Y[b], dYo[b]));
      }
    };

    // Predictor.
    std::vector<MatrixXd> Rc(nb);
    for (std::size_t b = 0; b < nb; ++b) {
      XY[b] = nt ? MatrixXd(lam[b].cwiseAbs2().asDiagonal()) : MatrixXd(res.X[b] * res.Y[b]);
      Rc[b] = -XY[b];
    }
    VectorXd dta;
    direction(Rc, dXa, dYa, dta);
    double apa, ada;
    steps(dXa, dYa, apa, ada);
    apa = std::min(1.0, apa);
    ada = std::min(1.0, ada);
    double mu_aff = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
      mu_aff += (res.X[b] + apa * dXa[b]).cwiseProduct(res.Y[b] + ada * dYa[b]).sum();
    }
    mu_aff /= ntot;
    double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);
    // Keep some centering while the iterate is far from feasible.
    if (std::max(res.pinf, res.dinf) > 1e-2) sigma = std::max(sigma, 0.1);

    // Corrector.
    for (std::size_t b = 0; b < nb; ++b) {
      const long n = blocks_[b].size;
      MatrixXd second;
      if (nt) {
        const MatrixXd sx = Gi[b] * dXa[b] * Gi[b].transpose();
        const MatrixXd sy = G[b].transpose() * dYa[b] * G[b];
        second = sym(sx * sy);
      } else {
        second = dXa[b] * dYa[b];
      }
      Rc[b] = sigma * mu * MatrixXd::Identity(n, n) - XY[b] - second;
    }
    VectorXd dt;
    direction(Rc, dX, dY, dt);
    double ap, ad;
    steps(dX, dY, ap, ad);
    const double frac =
        std::max(res.pinf, res.dinf) < 1e-4 ? std::max(set_.step_fraction, 0.98) : set_.step_fraction;
    ap = std::min(1.0, frac * ap);
    ad = std::min(1.0, frac * ad);
    if (!(ap > 0) || !(ad > 0) || !dt.allFinite()) {
      res.note = "search direction is not usable";
      break;
    }

    // Eigenvalue-based step bounds can overshoot by rounding when a block is
    // nearly singular; shorten until both iterates factor.
    std::vector<MatrixXd> Xn(nb), Yn(nb);
    bool factored = false;
    for (int shrink = 0; shrink < 12 && !factored; ++shrink) {
      factored = true;
      for (std::size_t b = 0; b < nb && factored; ++b) {
        Xn[b] = sym(res.X[b] + ap * dX[b]);
        Yn[b] = sym(res.Y[b] + ad * dY[b]);
        factored = Eigen::LLT<MatrixXd>(Xn[b]).info() == Eigen::Success &&
                   Eigen::LLT<MatrixXd>(Yn[b]).info() == Eigen::Success;
      }
      if (!factored) {
        ap *= 0.5;
        ad *= 0.5;
      }
    }
    if (!factored) {
      res.note = "primal slack lost definiteness";
      break;
    }
    res.t += ap * dt;
    res.X = std::move(Xn);
    res.Y = std::move(Yn);
    if (ap < 1e-8 && ad < 1e-8) {
      if (++stall >= 3) {
        res.note = "step lengths stalled";
        break;
      }
    } else {
      stall = 0;
    }
  }
  if (!res.converged) {
    const double nt = set_.near_tolerance;
    const double merit = std::max({res.pinf, res.dinf, res.gap});
    if (best_merit < merit && best_merit <= nt) {
      const std::string note = res.note;
      const int iterations = res.iterations;
      res = best;
      res.note = note + "; returning best iterate";
      res.iterations = iterations;
    }
    res.near = res.pinf <= nt && res.dinf <= nt && res.gap <= nt;
  }
  return res;
}

// Vectors in the common kernel of a block's affine data (after the equalities
// are substituted) annihilate F_b(z) at every feasible z, so F_b is singular
// on the whole feasible set. Restricting the block to the complement of that
// kernel gives an equivalent problem that can have an interior.
struct FaceReduction {
  bool changed = false;
  Problem problem;
  std::vector<int> source_block;  // per reduced block
  std::vector<MatrixXd> basis;    // per reduced block; empty when untouched
};

FaceReduction reduce_faces(const Problem& p, double rel_tol) {
  FaceReduction out;
  out.problem = p;
  const Reduction red = eliminate_equalities(p);
  if (!red.consistent) return out;
  const auto blocks = reduce_blocks(p, red);
  out.problem.blocks.clear();
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& rb = blocks[b];
    const int n = rb.size;
    MatrixXd S = rb.constant.transpose() * rb.constant;
    for (const auto& vm : rb.vars) {
      std::unordered_map<int, std::vector<std::pair<int, double>>> rows;
      for (const auto& e : vm.entries) rows[e.row].emplace_back(e.col, e.value);
      for (const auto& [r, list] : rows) {
        for (const auto& [c1, v1] : list) {
          for (const auto& [c2, v2] : list) S(c1, c2) += v1 * v2;
        }
      }
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
    const VectorXd& ev = es.eigenvalues();
    const double top = ev.size() ? ev.maxCoeff() : 0.0;
    int kernel = 0;
    while (kernel < n && ev[kernel] <= rel_tol * rel_tol * top) ++kernel;
    if (kernel == 0 || top <= 0.0) {
      out.problem.blocks.push_back(p.blocks[b]);
      out.source_block.push_back(static_cast<int>(b));
      out.basis.emplace_back();
      continue;
    }
    out.changed = true;
    if (kernel == n) continue;  // the block vanishes identically
    const int m = n - kernel;
    const MatrixXd N = es.eigenvectors().rightCols(m);

    // N^T A_v N for every variable (and the constant) touching the block.
    std::unordered_map<int, MatrixXd> acc;
    for (const auto& t : p.blocks[b].terms) {
      auto it = acc.find(t.var);
      if (it == acc.end()) it = acc.emplace(t.var, MatrixXd::Zero(m, m)).first;
      const auto nr = N.row(t.row);
      const auto nc = N.row(t.col);
      if (t.row == t.col) {
        it->second.noalias() += t.value * nr.transpose() * nr;
      } else {
        it->second.noalias() += t.value * (nr.transpose() * nc + nc.transpose() * nr);
      }
    }
    LmiBlock nb;
    nb.size = m;
    for (const auto& [var, A] : acc) {
      const double scale = A.cwiseAbs().maxCoeff();
      for (int i = 0; i < m; ++i) {
        for (int j = i; j < m; ++j) {
          if (std::abs(A(i, j)) > 1e-13 * scale) nb.terms.push_back({var, i, j, A(i, j)});
        }
      }
    }
    out.problem.blocks.push_back(std::move(nb));
    out.source_block.push_back(static_cast<int>(b));
    out.basis.push_back(N);
  }
  return out;
}

void lift_duals(const Problem& original, const FaceReduction& fr, Solution& sol) {
  std::vector<MatrixXd> Y(original.blocks.size());
  for (std::size_t b = 0; b < original.blocks.size(); ++b) {
    Y[b] = MatrixXd::Zero(original.blocks[b].size, original.blocks[b].size);
  }
  for (std::size_t i = 0; i < fr.source_block.size() && i < sol.block_duals.size(); ++i) {
    const auto& N = fr.basis[i];
    const auto src = static_cast<std::size_t>(fr.source_block[i]);
    Y[src] = N.size() ? MatrixXd(N * sol.block_duals[i] * N.transpose()) : sol.block_duals[i];
  }
  sol.block_duals = std::move(Y);
  if (sol.z.size() == original.num_vars) {
    sol.min_block_eigenvalue = std::numeric_limits<double>::infinity();
    for (const auto& blk : original.blocks) {
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(evaluate_block(blk, sol.z), Eigen::EigenvaluesOnly);
      sol.min_block_eigenvalue = std::min(sol.min_block_eigenvalue, es.eigenvalues().minCoeff());
    }
  }
}

}  // namespace

Solution InteriorPointSolver::solve(const Problem& problem) {
  problem.validate();
  if (settings_.facial_reduction) {
    const FaceReduction fr = reduce_faces(problem, settings_.kernel_tolerance);
    if (fr.changed) {
      Solution sol = solve_reduced(fr.problem);
      lift_duals(problem, fr, sol);
      return sol;
    }
  }
  return solve_reduced(problem);
}

FeasibilityResult InteriorPointSolver::check_feasibility(const Problem& problem) {
  problem.validate();
  if (settings_.facial_reduction) {
    const FaceReduction fr = reduce_faces(problem, settings_.kernel_tolerance);
    if (fr.changed) return Solver::check_feasibility(fr.problem);
  }
  return Solver::check_feasibility(problem);
}

Solution InteriorPointSolver::solve_reduced(const Problem& problem) {
  Solution sol;
  const int n = problem.num_vars;

  const Reduction red = eliminate_equalities(problem);
  if (!red.consistent) {
    sol.status = Status::infeasible;
    std::ostringstream os;
    os << "linear equalities are inconsistent (relative residual " << red.inconsistency << ")";
    sol.diagnostics = os.str();
    return sol;
  }

  VectorXd c = VectorXd::Zero(n);
  for (const auto& [v, w] : problem.objective) c[v] += w;
  VectorXd cr = VectorXd::Zero(red.num_free);
  double c0 = problem.objective_constant + c.dot(red.offset);
  for (int i = 0; i < n; ++i) {
    if (c[i] == 0.0) continue;
    for (const auto& [k, coef] : red.expr[static_cast<std::size_t>(i)]) cr[k] += c[i] * coef;
  }
  const auto blocks = reduce_blocks(problem, red);

  ReducedIpm ipm(blocks, cr, c0, settings_);
  const IpmResult r = ipm.run();

  sol.iterations = r.iterations;
  sol.diagnostics = r.note;
  sol.z = red.offset;
  for (int i = 0; i < n; ++i) {
    for (const auto& [k, coef] : red.expr[static_cast<std::size_t>(i)]) sol.z[i] += coef * r.t[k];
  }
  sol.block_duals = r.Y;
  sol.primal_objective = c.dot(sol.z) + problem.objective_constant;

  // Equality multipliers: A^T nu = c - F^*(Y).
  VectorXd resid = c;
  double fcy = 0.0;
  for (std::size_t b = 0; b < problem.blocks.size(); ++b) {
    for (const auto& t : problem.blocks[b].terms) {
      const double w = (t.row == t.col) ? r.Y[b](t.row, t.col) : 2.0 * r.Y[b](t.row, t.col);
      if (t.var < 0) {
        fcy += t.value * w;
      } else {
        resid[t.var] -= t.value * w;
      }
    }
  }
  const int m = static_cast<int>(problem.equalities.size());
  sol.equality_duals = VectorXd::Zero(m);
  double eq_resid = 0.0;
  if (m > 0) {
    MatrixXd At = MatrixXd::Zero(n, m);
    VectorXd rhs(m);
    for (int e = 0; e < m; ++e) {
      for (const auto& [v, w] : problem.equalities[static_cast<std::size_t>(e)].coeffs) At(v, e) += w;
      rhs[e] = problem.equalities[static_cast<std::size_t>(e)].rhs;
    }
    sol.equality_duals = At.completeOrthogonalDecomposition().solve(resid);
    eq_resid = (At.transpose() * sol.z - rhs).norm() / (1.0 + rhs.norm());
    sol.dual_objective = problem.objective_constant - fcy + rhs.dot(sol.equality_duals);
  } else {
    sol.dual_objective = problem.objective_constant - fcy;
  }
  sol.primal_infeasibility = std::max(r.pinf, eq_resid);
  sol.dual_infeasibility = r.dinf;
  sol.relative_gap = r.gap;

  sol.min_block_eigenvalue = std::numeric_limits<double>::infinity();
  for (const auto& blk : problem.blocks) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(evaluate_block(blk, sol.z), Eigen::EigenvaluesOnly);
    sol.min_block_eigenvalue = std::min(sol.min_block_eigenvalue, es.eigenvalues().minCoeff());
  }

  if (r.converged || r.near) {
    sol.status = Status::optimal;
    sol.near_optimal = !r.converged;
    return sol;
  }
  if (r.primal_diverged && r.pinf <= settings_.near_tolerance) {
    sol.status = Status::unbounded;
    return sol;
  }
  // Decide between infeasibility and a numerical breakdown.
  if (probe_infeasibility_ && problem.num_vars > 0) {
    InteriorPointSolver probe(settings_);
    probe.probe_infeasibility_ = false;
    const Solution p1 = probe.solve(phase_one_problem(problem));
    if (p1.status == Status::optimal && p1.z[n] > infeasibility_margin) {
      sol.status = Status::infeasible;
      std::ostringstream os;
      os << sol.diagnostics << "; phase-1 margin " << p1.z[n] << " certifies infeasibility";
      sol.diagnostics = os.str();
      return sol;
    }
  }
  sol.status = r.primal_diverged ? Status::unbounded : Status::numerical_failure;
  if (sol.diagnostics.empty()) sol.diagnostics = "did not converge";
  return sol;
}

}  // namespace bilevel::sdp
