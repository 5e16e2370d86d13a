#include "bilevel/polynomial.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <utility>

namespace bilevel {

VarLayout::VarLayout(int nx, int ny, int nlam) : n_x(nx), n_y(ny), n_lam(nlam) {
  if (nx < 0 || ny < 0 || nlam < 0) {
    throw StructuralError("VarLayout: negative block size");
  }
  if (nx + ny + nlam < 1) {
    throw StructuralError("VarLayout: at least one variable is required");
  }
}

std::string to_string(const VarLayout& layout) {
  std::ostringstream os;
  os << "(n_x=" << layout.n_x << ", n_y=" << layout.n_y << ", n_lam=" << layout.n_lam << ")";
  return os.str();
}

// ---------------------------------------------------------------- Monomial

Monomial::Monomial(std::vector<int> exponents) : exps_(std::move(exponents)) {
  for (int e : exps_) {
    if (e < 0) throw StructuralError("Monomial: negative exponent");
    degree_ += e;
  }
}

Monomial::Monomial(std::initializer_list<int> exponents)
    : Monomial(std::vector<int>(exponents)) {}

Monomial Monomial::unit(std::size_t size, std::size_t var) {
  if (var >= size) throw StructuralError("Monomial::unit: variable index out of range");
  std::vector<int> e(size, 0);
  e[var] = 1;
  return Monomial(std::move(e));
}

int Monomial::degree_in(std::size_t begin, std::size_t end) const {
  end = std::min(end, exps_.size());
  int d = 0;
  for (std::size_t i = begin; i < end; ++i) d += exps_[i];
  return d;
}

Monomial Monomial::operator*(const Monomial& other) const {
  if (other.size() != size()) throw StructuralError("Monomial product: size mismatch");
  std::vector<int> e(exps_);
  for (std::size_t i = 0; i < e.size(); ++i) e[i] += other.exps_[i];
  return Monomial(std::move(e));
}

double Monomial::eval(std::span<const double> point) const {
  double v = 1.0;
  for (std::size_t i = 0; i < exps_.size(); ++i) {
    for (int k = 0; k < exps_[i]; ++k) v *= point[i];
  }
  return v;
}

bool GrlexLess::operator()(const Monomial& a, const Monomial& b) const {
  if (a.degree() != b.degree()) return a.degree() < b.degree();
  // Same degree: the monomial with the larger leading exponent comes first.
  return a.exponents() > b.exponents();
}

std::size_t MonomialHash::operator()(const Monomial& m) const noexcept {
  std::size_t h = 1469598103934665603ull;
  for (int e : m.exponents()) {
    h ^= static_cast<std::size_t>(e) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  }
  return h;
}

// ----------------------------------------------------------- basis helpers

std::size_t basis_size(int size, int t) {
  if (size < 0 || t < 0) return 0;
  // C(size + t, t) computed incrementally; exact for the sizes used here.
  std::size_t c = 1;
  for (int i = 1; i <= t; ++i) {
    c = c * static_cast<std::size_t>(size + i) / static_cast<std::size_t>(i);
  }
  return c;
}

namespace {

// Exponent vectors of exactly degree d in `size` variables, emitted in
// decreasing lexicographic order.
void exact_degree(int size, int d, int var, std::vector<int>& cur,
                  std::vector<Monomial>& out) {
  if (var == size - 1) {
    cur[var] = d;
    out.emplace_back(cur);
    cur[var] = 0;
    return;
  }
  for (int e = d; e >= 0; --e) {
    cur[var] = e;
    exact_degree(size, d - e, var + 1, cur, out);
  }
  cur[var] = 0;
}

}  // namespace

std::vector<Monomial> monomial_basis(int size, int t) {
  if (t < 0) throw StructuralError("monomial_basis: negative degree");
  if (size < 0) throw StructuralError("monomial_basis: negative size");
  std::vector<Monomial> out;
  out.reserve(basis_size(size, t));
  if (size == 0) {
    out.emplace_back(std::vector<int>{});
    return out;
  }
  std::vector<int> cur(static_cast<std::size_t>(size), 0);
  for (int d = 0; d <= t; ++d) exact_degree(size, d, 0, cur, out);
  return out;
}

MonomialIndex::MonomialIndex(std::vector<Monomial> basis) : basis_(std::move(basis)) {
  pos_.reserve(basis_.size());
  for (std::size_t i = 0; i < basis_.size(); ++i) pos_.emplace(basis_[i], i);
}

long MonomialIndex::find(const Monomial& m) const {
  auto it = pos_.find(m);
  return it == pos_.end() ? -1 : static_cast<long>(it->second);
}

std::size_t MonomialIndex::at(const Monomial& m) const {
  auto it = pos_.find(m);
  if (it == pos_.end()) throw StructuralError("MonomialIndex: monomial outside basis");
  return it->second;
}

// -------------------------------------------------------------- Polynomial

Polynomial::Polynomial(VarLayout layout, TermMap terms) : layout_(layout) {
  for (auto& [m, c] : terms) add_term(m, c);
}

Polynomial Polynomial::constant(VarLayout layout, double c) {
  Polynomial p(layout);
  p.add_term(Monomial::one(static_cast<std::size_t>(layout.total())), c);
  return p;
}

Polynomial Polynomial::variable(VarLayout layout, int var_index) {
  if (var_index < 0 || var_index >= layout.total()) {
    throw StructuralError("Polynomial::variable: index out of range");
  }
  Polynomial p(layout);
  p.add_term(Monomial::unit(static_cast<std::size_t>(layout.total()),
                            static_cast<std::size_t>(var_index)),
             1.0);
  return p;
}

Polynomial Polynomial::monomial(VarLayout layout, const Monomial& m, double coeff) {
  if (m.size() != static_cast<std::size_t>(layout.total())) {
    throw StructuralError("Polynomial::monomial: exponent length does not match layout");
  }
  Polynomial p(layout);
  p.add_term(m, coeff);
  return p;
}

void Polynomial::add_term(const Monomial& m, double c) {
  if (m.size() != static_cast<std::size_t>(layout_.total())) {
    throw StructuralError("Polynomial: exponent length does not match layout");
  }
  if (c == 0.0) return;
  auto [it, inserted] = terms_.try_emplace(m, c);
  if (!inserted) {
    it->second += c;
    if (it->second == 0.0) terms_.erase(it);
  }
}

int Polynomial::degree() const {
  int d = 0;
  for (const auto& [m, c] : terms_) d = std::max(d, m.degree());
  return d;
}

int Polynomial::degree_x() const {
  int d = 0;
  for (const auto& [m, c] : terms_) {
    d = std::max(d, m.degree_in(0, static_cast<std::size_t>(layout_.n_x)));
  }
  return d;
}

int Polynomial::degree_y() const {
  int d = 0;
  const auto b = static_cast<std::size_t>(layout_.y_offset());
  for (const auto& [m, c] : terms_) {
    d = std::max(d, m.degree_in(b, b + static_cast<std::size_t>(layout_.n_y)));
  }
  return d;
}

int Polynomial::degree_lam() const {
  int d = 0;
  const auto b = static_cast<std::size_t>(layout_.lam_offset());
  for (const auto& [m, c] : terms_) {
    d = std::max(d, m.degree_in(b, b + static_cast<std::size_t>(layout_.n_lam)));
  }
  return d;
}

double Polynomial::coefficient(const Monomial& m) const {
  auto it = terms_.find(m);
  return it == terms_.end() ? 0.0 : it->second;
}

double Polynomial::eval(std::span<const double> point) const {
  if (point.size() != static_cast<std::size_t>(layout_.total())) {
    throw StructuralError("Polynomial::eval: point has " + std::to_string(point.size()) +
                          " coordinates, layout has " + std::to_string(layout_.total()));
  }
  double s = 0.0;
  for (const auto& [m, c] : terms_) s += c * m.eval(point);
  return s;
}

Polynomial Polynomial::operator-() const {
  Polynomial p(*this);
  for (auto& [m, c] : p.terms_) c = -c;
  return p;
}

Polynomial& Polynomial::operator+=(const Polynomial& q) {
  if (q.layout_ != layout_) {
    throw StructuralError("Polynomial add: layout mismatch " + bilevel::to_string(layout_) +
                          " vs " + bilevel::to_string(q.layout_));
  }
  for (const auto& [m, c] : q.terms_) add_term(m, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& q) {
  if (q.layout_ != layout_) {
    throw StructuralError("Polynomial sub: layout mismatch " + bilevel::to_string(layout_) +
                          " vs " + bilevel::to_string(q.layout_));
  }
  for (const auto& [m, c] : q.terms_) add_term(m, -c);
  return *this;
}

Polynomial& Polynomial::operator*=(double s) {
  if (s == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto it = terms_.begin(); it != terms_.end();) {
    it->second *= s;
    if (it->second == 0.0) {
      it = terms_.erase(it);  // underflow
    } else {
      ++it;
    }
  }
  return *this;
}

Polynomial operator*(const Polynomial& p, const Polynomial& q) {
  if (p.layout_ != q.layout_) {
    throw StructuralError("Polynomial mul: layout mismatch " + to_string(p.layout_) + " vs " +
                          to_string(q.layout_));
  }
  Polynomial r(p.layout_);
  for (const auto& [mp, cp] : p.terms_) {
    for (const auto& [mq, cq] : q.terms_) r.add_term(mp * mq, cp * cq);
  }
  return r;
}

Polynomial operator+(Polynomial p, double c) {
  p.add_term(Monomial::one(static_cast<std::size_t>(p.layout_.total())), c);
  return p;
}

Polynomial Polynomial::partial(int var_index) const {
  if (var_index < 0 || var_index >= layout_.total()) {
    throw StructuralError("Polynomial::partial: variable index " + std::to_string(var_index) +
                          " out of range for " + bilevel::to_string(layout_));
  }
  Polynomial r(layout_);
  const auto v = static_cast<std::size_t>(var_index);
  for (const auto& [m, c] : terms_) {
    const int e = m[v];
    if (e == 0) continue;
    std::vector<int> ex = m.exponents();
    ex[v] -= 1;
    r.add_term(Monomial(std::move(ex)), c * e);
  }
  return r;
}

Polynomial Polynomial::pow(int e) const {
  if (e < 0) throw StructuralError("Polynomial::pow: negative exponent");
  Polynomial r = constant(layout_, 1.0);
  for (int i = 0; i < e; ++i) r = r * *this;
  return r;
}

Polynomial Polynomial::embed(VarLayout target) const {
  if (target.n_x < layout_.n_x || target.n_y < layout_.n_y || target.n_lam < layout_.n_lam) {
    throw StructuralError("Polynomial::embed: target layout " + bilevel::to_string(target) +
                          " is smaller than " + bilevel::to_string(layout_));
  }
  Polynomial r(target);
  for (const auto& [m, c] : terms_) {
    std::vector<int> ex(static_cast<std::size_t>(target.total()), 0);
    for (int i = 0; i < layout_.n_x; ++i) ex[i] = m[i];
    for (int i = 0; i < layout_.n_y; ++i) {
      ex[target.y_offset() + i] = m[layout_.y_offset() + i];
    }
    for (int i = 0; i < layout_.n_lam; ++i) {
      ex[target.lam_offset() + i] = m[layout_.lam_offset() + i];
    }
    r.add_term(Monomial(std::move(ex)), c);
  }
  return r;
}

Polynomial Polynomial::cleaned(double threshold) const {
  Polynomial r(layout_);
  for (const auto& [m, c] : terms_) {
    if (std::abs(c) > threshold) r.terms_.emplace(m, c);
  }
  return r;
}

std::string Polynomial::to_string(int precision) const {
  if (terms_.empty()) return "0";
  auto var_name = [this](int i) {
    if (i < layout_.n_x) return (layout_.n_x == 1 ? std::string("x") : "x" + std::to_string(i + 1));
    i -= layout_.n_x;
    if (i < layout_.n_y) return (layout_.n_y == 1 ? std::string("y") : "y" + std::to_string(i + 1));
    i -= layout_.n_y;
    return "lam" + std::to_string(i);
  };
  std::ostringstream os;
  os << std::setprecision(precision);
  bool first = true;
  for (const auto& [m, c] : terms_) {
    double a = c;
    if (first) {
      if (a < 0) os << "-";
    } else {
      os << (a < 0 ? " - " : " + ");
    }
    a = std::abs(a);
    first = false;
    const bool unit = (a == 1.0) && m.degree() > 0;
    if (!unit) os << a;
    bool need_star = !unit;
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (m[i] == 0) continue;
      if (need_star) os << "*";
      os << var_name(static_cast<int>(i));
      if (m[i] > 1) os << "^" << m[i];
      need_star = true;
    }
  }
  return os.str();
}

Polynomial add(const Polynomial& p, const Polynomial& q) { return p + q; }
Polynomial mul(const Polynomial& p, const Polynomial& q) { return p * q; }
Polynomial partial(const Polynomial& p, int var_index) { return p.partial(var_index); }
double eval(const Polynomial& p, std::span<const double> point) { return p.eval(point); }

}  // namespace bilevel
