#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bilevel/polynomial.hpp"

namespace bilevel {

/// Absolute tolerance for evaluation-based feasibility checks.
inline constexpr double kFeasibilityTol = 1e-9;

/// Malformed problem text. `line()` is 1-based; 0 when not line-specific.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& what);
  int line() const { return line_; }

 private:
  int line_;
};

/// Well-formed text that describes an invalid instance.
class SemanticError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NormBounds {
  double n1 = 0.0;  ///< bound on ||x|| over the upper feasible set
  double n2 = 0.0;  ///< bound on ||y|| over the lower feasible set
  friend bool operator==(const NormBounds&, const NormBounds&) = default;
};

/// min f(x,y) s.t. g_i(x,y) <= 0, y in argmin_w { G(x,w) : h_j(w) <= 0 }.
///
/// Every polynomial lives on the layout (n, m, 0). The h_j carry zero
/// exponents on the x block.
struct BilevelProblem {
  VarLayout layout{1, 1, 0};
  Polynomial f;
  std::vector<Polynomial> g;
  Polynomial G;
  std::vector<Polynomial> h;
  std::optional<NormBounds> bounds;
  double box_M = 1.0;  ///< half-width of the box Omega containing Pr_1 K

  int n() const { return layout.n_x; }
  int m() const { return layout.n_y; }
  int s() const { return static_cast<int>(g.size()); }
  int r() const { return static_cast<int>(h.size()); }

  /// Throws SemanticError on a violated invariant.
  void validate() const;

  friend bool operator==(const BilevelProblem&, const BilevelProblem&) = default;
};

/// Single-level program: min objective s.t. ineq_p <= 0, eq_q = 0.
class PolynomialProgram {
 public:
  PolynomialProgram() = default;
  PolynomialProgram(Polynomial objective, std::vector<Polynomial> ineq,
                    std::vector<Polynomial> eq);

  const VarLayout& layout() const { return objective_.layout(); }
  const Polynomial& objective() const { return objective_; }
  const std::vector<Polynomial>& ineq() const { return ineq_; }
  const std::vector<Polynomial>& eq() const { return eq_; }
  /// Degrees u_p of the inequality polynomials.
  const std::vector<int>& ineq_degrees() const { return ineq_deg_; }
  /// Degrees v_q of the equality polynomials.
  const std::vector<int>& eq_degrees() const { return eq_deg_; }
  int max_degree() const;

  struct Residuals {
    std::vector<double> ineq;  ///< p(w), feasible when <= tol
    std::vector<double> eq;    ///< q(w), feasible when |.| <= tol
    double max_violation = 0.0;
    bool feasible = true;
  };
  Residuals check(std::span<const double> point, double tol = kFeasibilityTol) const;
  bool is_feasible(std::span<const double> point, double tol = kFeasibilityTol) const {
    return check(point, tol).feasible;
  }

 private:
  Polynomial objective_;
  std::vector<Polynomial> ineq_;
  std::vector<Polynomial> eq_;
  std::vector<int> ineq_deg_;
  std::vector<int> eq_deg_;
};

// ------------------------------------------------------------------ file I/O

BilevelProblem parse_problem(std::istream& in);
BilevelProblem parse_problem(const std::string& text);
BilevelProblem load_problem(const std::string& path);
void serialize_problem(const BilevelProblem& p, std::ostream& out);
std::string serialize_problem(const BilevelProblem& p);

// ------------------------------------------------------------ transformations

/// Appends the redundant balls ||(x,y)||^2 - (N1^2 + N2^2) <= 0 to g and
/// ||y||^2 - N2^2 <= 0 to h. Requires bounds.
BilevelProblem augment_with_balls(const BilevelProblem& p);

// ------------------------------------------------------- Hoelder exponent

struct HolderEstimate {
  int m = 0;
  int r = 0;
  int d = 0;
  long long R1 = 0;  ///< R(m + r + 1, d + 1)
  long long R2 = 0;  ///< R(m + r, 2d)
  /// tau0 as an exact fraction num/den with num in {1, 2}, capped at 1.
  long long tau0_num = 1;
  long long tau0_den = 1;
  double tau0 = 1.0;
};

/// R(m, d) = 1 if d = 1, else d (3d - 3)^(m - 1).
long long holder_R(int m, int d);
HolderEstimate holder_exponent(int m, int r, int d);

// ---------------------------------------------------------- grid oracle

/// Brute-force lower-level value min_w { G(x, w) : h_j(w) <= 1e-9 } over a
/// uniform grid of [-N2, N2]^m with `grid_per_dim` points per axis.
/// Returns +infinity when no grid point is feasible. Test oracle only.
double lower_value_oracle(const BilevelProblem& p, std::span<const double> x, int grid_per_dim);

/// Grid resolution the oracle uses by default for lower dimension m.
int default_oracle_grid(int m);

/// Concatenate x and y into a point on the (n, m, 0) layout.
std::vector<double> join_xy(std::span<const double> x, std::span<const double> y);

}  // namespace bilevel
