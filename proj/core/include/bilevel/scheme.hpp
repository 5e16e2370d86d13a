#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bilevel/kkt.hpp"
#include "bilevel/moment.hpp"
#include "bilevel/problem.hpp"
#include "bilevel/sdp.hpp"
#include "bilevel/value_approx.hpp"

namespace bilevel {

// ------------------------------------------------------------- hierarchy

/// One order of the moment hierarchy. Points are in the program's original
/// coordinates.
struct OrderResult {
  int k = 0;
  sdp::Status status = sdp::Status::numerical_failure;
  bool near_optimal = false;
  double bound = 0.0;  ///< L_z(f); a lower bound when status is optimal
  bool certified = false;
  std::vector<std::vector<double>> points;
  std::vector<int> ranks;
  int flat_order = -1;
  double primal_infeasibility = 0.0;
  double dual_infeasibility = 0.0;
  double relative_gap = 0.0;
  double wall_ms = 0.0;
  std::string note;

  bool ok() const { return status == sdp::Status::optimal; }
};

struct HierarchyRun {
  std::vector<OrderResult> orders;

  /// Last order that solved, if any.
  const OrderResult* last_ok() const;
  /// First certified order, if any.
  const OrderResult* certified() const;
};

struct HierarchyOptions {
  int k_min = 0;  ///< 0 selects the minimal order of the program
  int k_max = 0;  ///< 0 means k_min
  bool stop_on_certificate = true;
  /// Per-variable scales for conditioning; empty means none.
  std::vector<double> scale;
};

/// Solves orders k_min..k_max in turn, recording every order (failures
/// included) and stopping early once minimizers are certified.
HierarchyRun run_hierarchy(const PolynomialProgram& p, sdp::Solver& solver, const HierarchyOptions& opts);

/// Scales x by box_M and y by N2 (when bounds are given); extra trailing
/// variables such as multipliers keep scale 1.
std::vector<double> natural_scale(const BilevelProblem& p, int total_vars);

// ----------------------------------------------------------- convex path

struct ConvexPathReport {
  ReformulatedProgram kkt;
  HierarchyRun run;

  bool certified() const { return run.certified() != nullptr; }
  /// Bound of the deciding order: the certified one, else the last solved.
  std::optional<double> value() const;
  /// Splits a KKT point into (x, y, lambda).
  struct Split {
    std::vector<double> x, y, lambda;
  };
  Split split(const std::vector<double>& w) const;
};

/// Reformulates with KKT conditions (the caller asserts a convex lower level)
/// and runs the hierarchy from the minimal order up to `k_max`.
ConvexPathReport solve_convex_path(const BilevelProblem& p, int k_max, sdp::Solver& solver,
                                   int k_min = 0);

// ------------------------------------------------------- nonconvex path

/// (P_eps^k): min f s.t. g_i <= 0, h_j <= 0, G - J_k - eps <= 0, theta_l <= 0.
struct EpsProblem {
  PolynomialProgram program;
  double epsilon = 0.0;
  int k = 0;
  std::vector<double> scale;  ///< conditioning and sampling box per variable

  /// Index of the G - J_k - eps constraint within program.ineq().
  int value_constraint = -1;
};

EpsProblem make_eps_problem(const BilevelProblem& p, const ValuePolyApprox& v, double epsilon);

enum class SetVerdict { nonempty_witness, certified_empty, unknown };

const char* to_string(SetVerdict v);

struct FeasibilityVerdict {
  SetVerdict verdict = SetVerdict::unknown;
  std::vector<double> witness;
  double margin = 0.0;  ///< phase-1 margin of the moment relaxation when checked
  std::string diagnostics;
};

struct WitnessOptions {
  int samples = 4000;
  int grid = 201;  ///< x-grid per axis for lower-argmin candidates (n <= 2)
  double tol = 1e-6;
  std::uint64_t seed = 42;
};

/// Step 2 of the scheme. Looks for a feasible point among random samples
/// and lower-level argmin candidates; failing that, asks the order-k_check
/// moment relaxation for an infeasibility certificate.
FeasibilityVerdict step2_feasibility(const EpsProblem& ep, int k_check, sdp::Solver& solver,
                                     const BilevelProblem* source = nullptr, const WitnessOptions& opts = {});

struct SchemeIteration {
  int k = 0;
  double certificate_gap = 0.0;  ///< sum lambda_beta gamma_beta
  double eps_k = 0.0;
  bool sos_ok = false;
  Polynomial Jk;
  SetVerdict verdict = SetVerdict::unknown;
  std::optional<double> value;  ///< val(P_eps^k) from the inner hierarchy
  std::vector<double> point;    ///< (x, y)
  bool certified = false;
  int inner_order = 0;
  double wall_ms = 0.0;
  std::string note;
};

struct SchemeState {
  double epsilon = 0.0;
  int k = 0;
  std::vector<SchemeIteration> history;
  std::optional<double> v_best;
  std::vector<std::optional<double>> v_trace;  ///< v_best after each iteration
  std::vector<double> best_point;
  bool best_certified = false;
  std::string stop_reason;
  bool no_progress = false;  ///< no nonempty S_k up to k_max
};

struct SchemeOptions {
  int k_start = 0;      ///< 0 selects k0
  int k_max = 0;        ///< 0 means k_start
  int inner_order = 0;  ///< 0 means minimal order of P_eps^k plus 2
  double stable_tol = 1e-6;
  WitnessOptions witness;
};

SchemeState run_algorithm_4_5(const BilevelProblem& p, double epsilon, sdp::Solver& solver,
                              const SchemeOptions& opts = {});

/// One CSV row per outer iteration: k,sum_lambda_gamma,verdict,val,v_best.
void write_run_log(const SchemeState& s, std::ostream& out);

// ------------------------------------------------------------ validation

struct ValidationReport {
  std::vector<double> g;       ///< g_i(x, y)
  std::vector<double> h;       ///< h_j(y)
  double lower_value = 0.0;    ///< grid oracle J(x)
  double lower_gap = 0.0;      ///< G(x, y) - J(x)
  std::vector<int> violated_g;
  std::vector<int> violated_h;
  bool lower_ok = true;
  bool ok = true;
};

ValidationReport validate_solution(const BilevelProblem& p, std::span<const double> x, std::span<const double> y,
                                   double epsilon, double tol = 1e-3, int oracle_grid = 0);

}  // namespace bilevel
