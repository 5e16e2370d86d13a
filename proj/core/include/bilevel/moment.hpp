#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bilevel/polynomial.hpp"
#include "bilevel/problem.hpp"
#include "bilevel/sdp.hpp"

namespace bilevel {

/// Requested relaxation order is too small for some constraint.
class RelaxationOrderError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The solver cannot provide what was asked (e.g. dual multipliers).
class UnsupportedBySolver : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A relaxation the caller needs solved came back without an optimal status.
class SolverFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised on a rank-0 moment matrix during extraction.
class DegenerateMomentMatrix : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Localization order k - ceil(deg/2) used for a constraint of degree `deg`.
int localization_order(int k, int deg);

/// Smallest k with 2k >= every degree in the program (and k >= 1).
int minimal_order(const PolynomialProgram& p);

/// Zero-block equality row: L_z(x^gamma * H_q) = 0.
struct ZeroRowTag {
  int constraint;  ///< index q of the equality
  Monomial gamma;
};

/// Order-k moment relaxation of a PolynomialProgram:
///
///   min L_z(f)  s.t.  M_k(z) PSD,  M_{k - ceil(u_p/2)}(-G_p z) PSD,
///                     M_{k - ceil(v_q/2)}(H_q z) = 0,  z_0 = 1,
///
/// with z indexed by all monomials of degree <= 2k in every variable of the
/// program's layout.
struct MomentRelaxation {
  int order = 0;
  VarLayout layout;
  MonomialIndex moments;  ///< N^v_{2k}
  MonomialIndex basis;    ///< N^v_k; localization bases are prefixes
  /// Block 0 is M_k(z); block 1 + p localizes inequality p.
  std::vector<sdp::LmiBlock> psd_blocks;
  std::vector<int> psd_orders;
  /// One matrix per equality, constrained to vanish.
  std::vector<sdp::LmiBlock> zero_blocks;
  std::vector<int> zero_orders;
  /// L_z(f) as a sparse form in z.
  std::vector<std::pair<int, double>> objective;

  /// Distinct zero-block rows, in the order `to_sdp` emits them after z_0 = 1.
  std::vector<ZeroRowTag> zero_rows;

  /// SDP with z_0 = 1 as equality 0 followed by `zero_rows`.
  sdp::Problem to_sdp() const;

  /// Text export: header with block sizes, then per moment the
  /// `block row col value` triplets in which it appears.
  void dump(std::ostream& out) const;
};

MomentRelaxation build_relaxation(const PolynomialProgram& p, int k);

/// Entry (a, b) of the localization matrix of `g` at order t, evaluated at a
/// concrete moment vector: sum_gamma g_gamma z_{alpha_a + beta_b + gamma}.
double localization_entry(const MomentRelaxation& r, const Polynomial& g, int a, int b,
                          const Eigen::VectorXd& z);

struct MomentSolution {
  sdp::Status status = sdp::Status::numerical_failure;
  bool near_optimal = false;
  Eigen::VectorXd z;
  double value = 0.0;       ///< L_z(f), a lower bound on the program when optimal
  double dual_value = 0.0;  ///< mu read from the SOS side
  sdp::Solution raw;
  int order = 0;
  std::string diagnostics;

  bool ok() const { return status == sdp::Status::optimal; }
};

MomentSolution solve_relaxation(const MomentRelaxation& r, sdp::Solver& solver);

struct ExtractionResult {
  std::vector<std::vector<double>> points;
  bool certified = false;
  double moment_value = 0.0;
  std::vector<int> ranks;  ///< rank M_t(z), t = 0..k
  int flat_order = -1;     ///< order t where the rank condition held
  std::vector<double> first_moments;
  std::string note;
};

/// Flat-extension test and atom extraction. Falls back to the first-moment
/// point (uncertified) when the rank condition fails or the atoms do not
/// check out against the program.
ExtractionResult extract_minimizers(const MomentRelaxation& r, const MomentSolution& sol,
                                    const PolynomialProgram& p, double rank_tol = 1e-3);

/// Numerical rank from sorted eigenvalues: stops at the first consecutive
/// ratio below `rank_tol`.
int numerical_rank(const Eigen::VectorXd& eigenvalues_desc, double rank_tol);

/// Putinar certificate read off a solved relaxation:
///   f - mu = sigma_0 - sum_p sigma_p G_p - sum_q phi_q H_q.
struct SosCertificate {
  double mu = 0.0;
  Polynomial sigma0;
  std::vector<Polynomial> sigma;  ///< per inequality
  std::vector<Polynomial> phi;    ///< per equality
};

SosCertificate certificate_from_solution(const MomentRelaxation& r, const MomentSolution& sol,
                                         const PolynomialProgram& p);

/// Largest |LHS - RHS| of the certificate identity over `samples` points drawn
/// uniformly from the ball of radius `radius`.
double certificate_residual(const SosCertificate& c, const PolynomialProgram& p, int samples,
                            double radius = 1.0, std::uint64_t seed = 42);

struct SosCheck {
  double residual = 0.0;
  double mu = 0.0;
  MomentSolution solution;
};

/// Solves the order-k relaxation, recovers the SOS multipliers and evaluates
/// the certificate identity at random points.
SosCheck sos_residual_check(const PolynomialProgram& p, int k, sdp::Solver& solver, int samples,
                            double radius = 1.0, std::uint64_t seed = 42);

/// Explicit Gram-matrix form of the SOS program at order k: variables are the
/// Gram entries of sigma_0..sigma_P, the coefficients of phi_q and (when
/// `fixed_mu` is empty) mu itself, which is maximized. With `fixed_mu` the
/// program is a pure feasibility problem.
struct SosProgram {
  sdp::Problem problem;
  int mu_var = -1;
};

/// Program after the change of variables w = scale .* w' with every
/// constraint divided by its largest coefficient magnitude. Relaxations of
/// the conditioned program are far better behaved numerically when the
/// original variables range over boxes much wider than [-1, 1].
struct ConditionedProgram {
  PolynomialProgram program;
  std::vector<double> scale;
  double objective_scale = 1.0;  ///< original objective = objective_scale * conditioned one

  std::vector<double> to_original(std::span<const double> w) const;
  std::vector<double> to_conditioned(std::span<const double> w) const;
};

ConditionedProgram condition_program(const PolynomialProgram& p, std::vector<double> scale,
                                     bool normalize_objective = true);

SosProgram build_sos_program(const PolynomialProgram& p, int k, std::optional<double> fixed_mu = std::nullopt);

}  // namespace bilevel
