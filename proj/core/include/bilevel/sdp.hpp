#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

namespace bilevel::sdp {

// Problem data
// ------------
// minimize    c^T z + c0
// subject to  F_b(z) = F_b0 + sum_i z_i F_bi  is PSD for every block b
//             a_e^T z = rhs_e                 for every equality e
//
// Lagrangian dual (the SOS side for moment relaxations):
// maximize    c0 - sum_b <F_b0, Y_b> + rhs^T nu
// subject to  sum_b <F_bi, Y_b> + (A^T nu)_i = c_i,   Y_b PSD.

/// One entry of a symmetric linear matrix form. `var` < 0 marks the
/// constant matrix. An off-diagonal entry (r, c) also sets (c, r); give each
/// off-diagonal position once (entries for the same position are summed).
struct LmiTerm {
  int var;
  int row;
  int col;
  double value;
};

struct LmiBlock {
  int size = 0;
  std::vector<LmiTerm> terms;
};

struct SparseRow {
  std::vector<std::pair<int, double>> coeffs;
  double rhs = 0.0;
};

struct Problem {
  int num_vars = 0;
  std::vector<std::pair<int, double>> objective;
  double objective_constant = 0.0;
  std::vector<LmiBlock> blocks;
  std::vector<SparseRow> equalities;

  /// Throws std::invalid_argument on out-of-range indices.
  void validate() const;
};

/// Dense value of block `b` at `z`.
Eigen::MatrixXd evaluate_block(const LmiBlock& block, const Eigen::VectorXd& z);

enum class Status { optimal, infeasible, unbounded, numerical_failure };

const char* to_string(Status s);

struct Solution {
  Status status = Status::numerical_failure;
  /// Optimal within the relaxed tolerance only.
  bool near_optimal = false;
  Eigen::VectorXd z;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  std::vector<Eigen::MatrixXd> block_duals;  ///< Y_b, one per block
  Eigen::VectorXd equality_duals;            ///< nu, one per equality row
  double primal_infeasibility = 0.0;         ///< relative, including equalities
  double dual_infeasibility = 0.0;           ///< relative
  double relative_gap = 0.0;
  double min_block_eigenvalue = 0.0;  ///< smallest eigenvalue over F_b(z)
  int iterations = 0;
  std::string diagnostics;
};

enum class Feasibility { feasible, infeasible, unknown };

const char* to_string(Feasibility f);

struct FeasibilityResult {
  Feasibility verdict = Feasibility::unknown;
  /// Optimal value of min { s : F_b(z) + s I PSD, A z = rhs, s >= -1 }.
  /// Positive means no feasible z exists.
  double margin = 0.0;
  std::string diagnostics;
};

/// Conic SDP back end. One solve at a time per instance; distinct instances
/// may run concurrently.
class Solver {
 public:
  virtual ~Solver() = default;
  virtual std::string name() const = 0;
  virtual Solution solve(const Problem& problem) = 0;
  /// Decides feasibility through the auxiliary phase-1 problem.
  virtual FeasibilityResult check_feasibility(const Problem& problem);
  /// Positive phase-1 margins above this are treated as infeasibility.
  double infeasibility_margin = 1e-6;
};

/// Phase-1 problem: variables (z, s), blocks F_b(z) + s I, extra block s + 1.
Problem phase_one_problem(const Problem& problem);

/// Search direction of the interior-point method.
enum class IpmDirection { hkm, nt };

struct IpmSettings {
  IpmDirection direction = IpmDirection::nt;
  double tolerance = 1e-8;         ///< relative infeasibility / gap target
  double near_tolerance = 1e-4;    ///< accepted as optimal-with-flag
  int max_iterations = 120;
  double step_fraction = 0.95;
  double divergence_limit = 1e12;  ///< |Y| or |z| beyond this stops the iteration
  bool verbose = false;
  /// Restrict blocks to the complement of the kernel shared by all feasible
  /// points before iterating (duals are mapped back afterwards).
  bool facial_reduction = true;
  /// Relative singular-value threshold for that common kernel.
  double kernel_tolerance = 1e-9;
};

/// Dense primal-dual path-following method (NT or HKM direction, Mehrotra
/// predictor-corrector, infeasible start). Linear equalities are eliminated
/// up front by Gauss-Jordan reduction; their multipliers are recovered after
/// the solve by least squares.
class InteriorPointSolver final : public Solver {
 public:
  InteriorPointSolver() = default;
  explicit InteriorPointSolver(IpmSettings settings) : settings_(settings) {}

  std::string name() const override { return "dense-ipm"; }
  Solution solve(const Problem& problem) override;
  FeasibilityResult check_feasibility(const Problem& problem) override;

  const IpmSettings& settings() const { return settings_; }
  IpmSettings& settings() { return settings_; }

 private:
  Solution solve_reduced(const Problem& problem);

  IpmSettings settings_;
  bool probe_infeasibility_ = true;
};

}  // namespace bilevel::sdp
