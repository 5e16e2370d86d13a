#pragma once

#include <cstddef>
#include <initializer_list>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace bilevel {

/// Raised when operands or arguments do not fit together structurally
/// (mismatched layouts, wrong vector lengths, indices out of range).
class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Variable blocks of a polynomial: upper variables x, lower variables y and
/// KKT multipliers lambda, laid out contiguously in that order.
struct VarLayout {
  int n_x = 0;
  int n_y = 0;
  int n_lam = 0;

  VarLayout() = default;
  VarLayout(int nx, int ny, int nlam = 0);

  int total() const { return n_x + n_y + n_lam; }
  int x_offset() const { return 0; }
  int y_offset() const { return n_x; }
  int lam_offset() const { return n_x + n_y; }

  friend bool operator==(const VarLayout&, const VarLayout&) = default;
};

std::string to_string(const VarLayout& layout);

/// Exponent vector over a full layout.
class Monomial {
 public:
  Monomial() = default;
  explicit Monomial(std::vector<int> exponents);
  Monomial(std::initializer_list<int> exponents);
  static Monomial one(std::size_t size) { return Monomial(std::vector<int>(size, 0)); }
  static Monomial unit(std::size_t size, std::size_t var);

  std::size_t size() const { return exps_.size(); }
  int operator[](std::size_t i) const { return exps_[i]; }
  const std::vector<int>& exponents() const { return exps_; }
  int degree() const { return degree_; }
  /// Sum of exponents over the half-open range [begin, end).
  int degree_in(std::size_t begin, std::size_t end) const;

  Monomial operator*(const Monomial& other) const;
  double eval(std::span<const double> point) const;

  friend bool operator==(const Monomial& a, const Monomial& b) { return a.exps_ == b.exps_; }

 private:
  std::vector<int> exps_;
  int degree_ = 0;
};

/// Graded lexicographic order: lower total degree first, ties broken so that
/// x1 > x2 > ... (so the degree-1 basis reads 1, x1, x2, ...).
struct GrlexLess {
  bool operator()(const Monomial& a, const Monomial& b) const;
};

struct MonomialHash {
  std::size_t operator()(const Monomial& m) const noexcept;
};

/// All monomials in `size` variables of total degree <= t, graded
/// lexicographic order. Count is C(size + t, t).
std::vector<Monomial> monomial_basis(int size, int t);

/// Number of monomials of degree <= t in `size` variables.
std::size_t basis_size(int size, int t);

/// Position lookup for a monomial basis; used to index moment vectors.
class MonomialIndex {
 public:
  MonomialIndex() = default;
  explicit MonomialIndex(std::vector<Monomial> basis);
  MonomialIndex(int size, int t) : MonomialIndex(monomial_basis(size, t)) {}

  std::size_t size() const { return basis_.size(); }
  const Monomial& operator[](std::size_t i) const { return basis_[i]; }
  const std::vector<Monomial>& basis() const { return basis_; }
  /// Index of `m`, or -1 when it is not in the basis.
  long find(const Monomial& m) const;
  std::size_t at(const Monomial& m) const;

 private:
  std::vector<Monomial> basis_;
  std::unordered_map<Monomial, std::size_t, MonomialHash> pos_;
};

/// Sparse real polynomial over a VarLayout. No stored coefficient is exactly
/// zero. Value type; all operations return new polynomials.
class Polynomial {
 public:
  using TermMap = std::map<Monomial, double, GrlexLess>;

  Polynomial() = default;
  explicit Polynomial(VarLayout layout) : layout_(layout) {}
  Polynomial(VarLayout layout, TermMap terms);

  static Polynomial constant(VarLayout layout, double c);
  /// The coordinate polynomial w_i for a flat variable index.
  static Polynomial variable(VarLayout layout, int var_index);
  static Polynomial monomial(VarLayout layout, const Monomial& m, double coeff = 1.0);

  const VarLayout& layout() const { return layout_; }
  const TermMap& terms() const { return terms_; }
  std::size_t num_terms() const { return terms_.size(); }
  bool is_zero() const { return terms_.empty(); }
  /// Total degree; the zero polynomial has degree 0.
  int degree() const;
  int degree_x() const;
  int degree_y() const;
  int degree_lam() const;
  double coefficient(const Monomial& m) const;

  double eval(std::span<const double> point) const;

  Polynomial operator-() const;
  Polynomial& operator+=(const Polynomial& q);
  Polynomial& operator-=(const Polynomial& q);
  Polynomial& operator*=(double s);

  friend Polynomial operator+(Polynomial p, const Polynomial& q) { return p += q; }
  friend Polynomial operator-(Polynomial p, const Polynomial& q) { return p -= q; }
  friend Polynomial operator*(const Polynomial& p, const Polynomial& q);
  friend Polynomial operator*(Polynomial p, double s) { return p *= s; }
  friend Polynomial operator*(double s, Polynomial p) { return p *= s; }
  friend Polynomial operator+(Polynomial p, double c);
  friend Polynomial operator-(Polynomial p, double c) { return std::move(p) + (-c); }
  friend Polynomial operator+(double c, Polynomial p) { return std::move(p) + c; }
  friend Polynomial operator-(double c, const Polynomial& p) { return -p + c; }

  /// Structural equality: same layout and identical term maps.
  friend bool operator==(const Polynomial& a, const Polynomial& b) {
    return a.layout_ == b.layout_ && a.terms_ == b.terms_;
  }

  Polynomial partial(int var_index) const;
  Polynomial pow(int e) const;

  /// Re-express over a layout with at least as many variables in each block;
  /// exponents are copied block-wise and new variables get exponent 0.
  Polynomial embed(VarLayout target) const;

  /// Copy with coefficients |c| <= threshold removed. Display use only.
  Polynomial cleaned(double threshold = 1e-12) const;

  std::string to_string(int precision = 6) const;

 private:
  void add_term(const Monomial& m, double c);

  VarLayout layout_;
  TermMap terms_;
};

Polynomial add(const Polynomial& p, const Polynomial& q);
Polynomial mul(const Polynomial& p, const Polynomial& q);
Polynomial partial(const Polynomial& p, int var_index);
double eval(const Polynomial& p, std::span<const double> point);

}  // namespace bilevel
