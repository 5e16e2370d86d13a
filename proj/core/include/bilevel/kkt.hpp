#pragma once

#include <span>
#include <string>
#include <vector>

#include "bilevel/problem.hpp"

namespace bilevel {

/// Role of each constraint in the single-level KKT program.
enum class KktRole {
  upper,            ///< g_i(x,y) <= 0
  lower,            ///< h_j(y) <= 0
  multiplier_sign,  ///< -lambda_j <= 0, j = 0..r
  complementarity,  ///< lambda_j h_j(y) = 0, j = 1..r
  stationarity,     ///< (lambda_0 grad_y G + sum_j lambda_j grad h_j)_i = 0
  sphere,           ///< sum_j lambda_j^2 - 1 = 0
};

const char* to_string(KktRole role);

struct KktTag {
  KktRole role;
  int source;  ///< index within its family (i, j or coordinate), 0-based
};

/// Single-level program over (x, y, lambda_0..lambda_r) equivalent to a
/// bilevel problem whose lower level is convex and satisfies nondegeneracy
/// and Slater. Inequalities are ordered upper, lower, multiplier signs;
/// equalities complementarity, stationarity, sphere.
struct ReformulatedProgram {
  PolynomialProgram program;
  std::vector<KktTag> ineq_tags;
  std::vector<KktTag> eq_tags;
  BilevelProblem source;

  const VarLayout& layout() const { return program.layout(); }
};

/// Builds the KKT program. The caller asserts that the lower level is convex
/// with nondegenerate constraints and a Slater point; nothing is verified.
ReformulatedProgram reformulate(const BilevelProblem& p);

struct KktReport {
  std::vector<double> ineq;  ///< values of the inequality polynomials
  std::vector<double> eq;    ///< values of the equality polynomials
  std::vector<int> violated_ineq;
  std::vector<int> violated_eq;
  double max_violation = 0.0;
  bool feasible = true;
};

KktReport check_point(const ReformulatedProgram& rp, std::span<const double> x,
                      std::span<const double> y, std::span<const double> lam, double tol);

}  // namespace bilevel
