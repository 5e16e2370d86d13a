#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "bilevel/moment.hpp"
#include "bilevel/problem.hpp"
#include "bilevel/sdp.hpp"

namespace bilevel {

/// Moments of the uniform probability measure on [-M, M]^n up to degree t.
struct BoxMoments {
  int n = 0;
  double M = 1.0;
  int t = 0;
  MonomialIndex index;        ///< N^n_t, graded lex
  std::vector<double> gamma;  ///< gamma[i] belongs to index[i]

  /// gamma_beta for |beta| <= t; throws StructuralError otherwise.
  double operator()(const Monomial& beta) const;
};

BoxMoments box_moments(int n, double M, int t);

/// Polynomial underestimator J_k of the lower-level value function on the
/// box Omega = [-M, M]^n, obtained from
///
///   max sum_beta lambda_beta gamma_beta
///   s.t. G - sum_beta lambda_beta x^beta
///          = sigma_0 - sum_j sigma_j h_j - sum_l sigma_{r+l} theta_l,
///
/// with theta_l = x_l^2 - M^2 and every term of degree <= 2k.
struct ValuePolyApprox {
  int k = 0;
  Polynomial Jk;  ///< over the layout (n, 0, 0)
  double certificate_gap = 0.0;  ///< sum_beta lambda_beta gamma_beta
  double eps_k = 0.0;            ///< solver duality gap, the epsilon_k of the solution
  std::vector<Polynomial> theta;
  bool sos_ok = false;
  double sos_residual = 0.0;  ///< worst identity residual over the samples
  bool near_optimal = false;
  std::string diagnostics;

  /// J_k re-expressed over (n, m, 0) so it can be combined with G.
  Polynomial on_layout(const VarLayout& layout) const { return Jk.embed(layout); }
  double eval(std::span<const double> x) const { return Jk.eval(x); }
};

/// k0 = max(ceil(deg G / 2), ceil(deg h_j / 2)), at least 1.
int value_order_min(const BilevelProblem& p);

struct ValueApproxOptions {
  int samples = 200;          ///< certificate sampling points
  double residual_tol = 1e-5;
  std::uint64_t seed = 42;
};

/// Throws RelaxationOrderError when k < k0 and SolverFailure when the SDP
/// is not solved to (near) optimality. The problem needs bounds (N2 is the
/// sampling box of the lower variables).
ValuePolyApprox approximate_value_function(const BilevelProblem& p, int k, sdp::Solver& solver,
                                           const ValueApproxOptions& opts = {});

struct GridRow {
  double x = 0.0;
  double Jk = 0.0;
  double Joracle = 0.0;
};

/// Uniform grid of `points` abscissae over [-M, M] (n = 1). For n > 1 the
/// grid runs along the diagonal x = (s, ..., s) and Joracle is NaN.
std::vector<GridRow> sample_grid(const ValuePolyApprox& v, const BilevelProblem& p, int points,
                                 int oracle_grid = 0);

/// CSV with header `x,Jk,Joracle`, 17 significant digits.
void write_grid_csv(const std::vector<GridRow>& rows, std::ostream& out);

}  // namespace bilevel
