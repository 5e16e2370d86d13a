#include "bilevel/kkt.hpp"

#include <algorithm>
#include <cmath>

namespace bilevel {

const char* to_string(KktRole role) {
  switch (role) {
    case KktRole::upper: return "upper";
    case KktRole::lower: return "lower";
    case KktRole::multiplier_sign: return "multiplier_sign";
    case KktRole::complementarity: return "complementarity";
    case KktRole::stationarity: return "stationarity";
    case KktRole::sphere: return "sphere";
  }
  return "?";
}

ReformulatedProgram reformulate(const BilevelProblem& p) {
  p.validate();
  const int n = p.n();
  const int m = p.m();
  const int r = p.r();
  const VarLayout L(n, m, r + 1);

  auto lam = [&](int j) { return Polynomial::variable(L, L.lam_offset() + j); };

  const Polynomial G = p.G.embed(L);
  std::vector<Polynomial> h;
  h.reserve(static_cast<std::size_t>(r));
  for (const auto& hj : p.h) h.push_back(hj.embed(L));

  std::vector<Polynomial> ineq;
  std::vector<KktTag> ineq_tags;
  for (int i = 0; i < p.s(); ++i) {
    ineq.push_back(p.g[static_cast<std::size_t>(i)].embed(L));
    ineq_tags.push_back({KktRole::upper, i});
  }
  for (int j = 0; j < r; ++j) {
    ineq.push_back(h[static_cast<std::size_t>(j)]);
    ineq_tags.push_back({KktRole::lower, j});
  }
  for (int j = 0; j <= r; ++j) {
    ineq.push_back(-lam(j));
    ineq_tags.push_back({KktRole::multiplier_sign, j});
  }

  std::vector<Polynomial> eq;
  std::vector<KktTag> eq_tags;
  for (int j = 0; j < r; ++j) {
    eq.push_back(lam(j + 1) * h[static_cast<std::size_t>(j)]);
    eq_tags.push_back({KktRole::complementarity, j});
  }
  for (int i = 0; i < m; ++i) {
    const int yi = L.y_offset() + i;
    Polynomial row = lam(0) * G.partial(yi);
    for (int j = 0; j < r; ++j) row += lam(j + 1) * h[static_cast<std::size_t>(j)].partial(yi);
    eq.push_back(std::move(row));
    eq_tags.push_back({KktRole::stationarity, i});
  }
  Polynomial sphere = Polynomial::constant(L, -1.0);
  for (int j = 0; j <= r; ++j) sphere += lam(j) * lam(j);
  eq.push_back(std::move(sphere));
  eq_tags.push_back({KktRole::sphere, 0});

  return ReformulatedProgram{PolynomialProgram(p.f.embed(L), std::move(ineq), std::move(eq)),
                             std::move(ineq_tags), std::move(eq_tags), p};
}

KktReport check_point(const ReformulatedProgram& rp, std::span<const double> x,
                      std::span<const double> y, std::span<const double> lam, double tol) {
  const VarLayout& L = rp.layout();
  if (x.size() != static_cast<std::size_t>(L.n_x) || y.size() != static_cast<std::size_t>(L.n_y) ||
      lam.size() != static_cast<std::size_t>(L.n_lam)) {
    throw StructuralError("check_point: expected (x, y, lambda) of sizes (" + std::to_string(L.n_x) +
                          ", " + std::to_string(L.n_y) + ", " + std::to_string(L.n_lam) + ")");
  }
  std::vector<double> w(x.begin(), x.end());
  w.insert(w.end(), y.begin(), y.end());
  w.insert(w.end(), lam.begin(), lam.end());

  KktReport rep;
  for (std::size_t i = 0; i < rp.program.ineq().size(); ++i) {
    const double v = rp.program.ineq()[i].eval(w);
    rep.ineq.push_back(v);
    if (v > tol) rep.violated_ineq.push_back(static_cast<int>(i));
    rep.max_violation = std::max(rep.max_violation, v);
  }
  for (std::size_t q = 0; q < rp.program.eq().size(); ++q) {
    const double v = rp.program.eq()[q].eval(w);
    rep.eq.push_back(v);
    if (std::abs(v) > tol) rep.violated_eq.push_back(static_cast<int>(q));
    rep.max_violation = std::max(rep.max_violation, std::abs(v));
  }
  rep.feasible = rep.violated_ineq.empty() && rep.violated_eq.empty();
  return rep;
}

}  // namespace bilevel
