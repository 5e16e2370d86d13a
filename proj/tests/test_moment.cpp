#include <algorithm>
#include <cmath>
#include <random>

#include "bilevel/kkt.hpp"
#include "bilevel/moment.hpp"
#include "doctest.h"

using namespace bilevel;

namespace {

VarLayout L1{1, 0, 0};

Polynomial X() { return Polynomial::variable(L1, 0); }

std::string corpus(const char* name) { return std::string(BILEVEL_CORPUS_DIR) + "/" + name; }

}  // namespace

TEST_CASE("unconstrained min x^2 at order 1") {
  PolynomialProgram p(X() * X(), {}, {});
  const auto r = build_relaxation(p, 1);
  CHECK(r.psd_blocks.size() == 1);
  CHECK(r.psd_blocks[0].size == 2);
  CHECK(r.moments.size() == 3);
  REQUIRE(r.objective.size() == 1);
  CHECK(r.objective[0].first == 2);

  sdp::InteriorPointSolver s;
  const auto sol = solve_relaxation(r, s);
  REQUIRE(sol.ok());
  CHECK(std::abs(sol.value) < 1e-6);
  const auto ex = extract_minimizers(r, sol, p);
  CHECK(ex.certified);
  REQUIRE(ex.points.size() == 1);
  CHECK(std::abs(ex.points[0][0]) < 1e-3);
}

TEST_CASE("min -x on [-1, 1] is exact at order 1") {
  PolynomialProgram p(-X(), {X() * X() - 1.0}, {});
  sdp::InteriorPointSolver s;
  const auto r = build_relaxation(p, 1);
  const auto sol = solve_relaxation(r, s);
  REQUIRE(sol.ok());
  CHECK(sol.value == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(sol.z[1] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(sol.z[0] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("empty feasible set is reported infeasible") {
  PolynomialProgram p(X(), {X() + 1.0, 1.0 - X()}, {});
  sdp::InteriorPointSolver s;
  const auto sol = solve_relaxation(build_relaxation(p, 1), s);
  CHECK(sol.status == sdp::Status::infeasible);
}

TEST_CASE("order below the minimum names the constraint") {
  const VarLayout L{1, 1, 0};
  const Polynomial x = Polynomial::variable(L, 0), y = Polynomial::variable(L, 1);
  PolynomialProgram p(x, {x * x * y * y - 1.0}, {});
  CHECK(minimal_order(p) == 2);
  try {
    build_relaxation(p, 1);
    FAIL("expected RelaxationOrderError");
  } catch (const RelaxationOrderError& e) {
    CHECK(std::string(e.what()).find("inequality constraint 0") != std::string::npos);
  }
}

TEST_CASE("assembled localization entries match the direct moment sum") {
  const VarLayout L{1, 1, 1};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Polynomial g(L);
  for (const Monomial& m : monomial_basis(3, 2)) g += Polynomial::monomial(L, m, u(rng));
  PolynomialProgram p(Polynomial::variable(L, 0), {g}, {g});
  const auto r = build_relaxation(p, 3);
  Eigen::VectorXd z(static_cast<long>(r.moments.size()));
  for (long i = 0; i < z.size(); ++i) z[i] = u(rng);

  for (const auto* blocks : {&r.psd_blocks, &r.zero_blocks}) {
    const sdp::LmiBlock& blk = blocks == &r.psd_blocks ? (*blocks)[1] : (*blocks)[0];
    const Eigen::MatrixXd M = sdp::evaluate_block(blk, z);
    const Polynomial w = blocks == &r.psd_blocks ? -g : g;
    for (int a = 0; a < blk.size; ++a) {
      for (int b = 0; b < blk.size; ++b) {
        // Independent sum straight from the definition.
        double direct = 0.0;
        for (const auto& [gamma, c] : w.terms()) {
          std::vector<int> e(3);
          for (int i = 0; i < 3; ++i) e[i] = r.basis[a][i] + r.basis[b][i] + gamma[i];
          direct += c * z[static_cast<long>(r.moments.at(Monomial(e)))];
        }
        CHECK(M(a, b) == doctest::Approx(direct).epsilon(1e-12));
      }
    }
  }
  CHECK(r.psd_blocks[1].size == static_cast<int>(basis_size(3, 2)));
  CHECK(r.zero_blocks[0].size == static_cast<int>(basis_size(3, 2)));
}

TEST_CASE("two-minimizer KKT program at order 3: value -2 and both minimizers") {
  const auto rp = reformulate(load_problem(corpus("ex3_7.blv")));
  sdp::InteriorPointSolver s;
  const auto r = build_relaxation(rp.program, 3);
  const auto sol = solve_relaxation(r, s);
  REQUIRE(sol.ok());
  CHECK(sol.value == doctest::Approx(-2.0).epsilon(1e-3));
  const auto ex = extract_minimizers(r, sol, rp.program);
  INFO(ex.note);
  CHECK(ex.certified);
  REQUIRE(ex.points.size() == 2);
  auto pts = ex.points;
  std::sort(pts.begin(), pts.end());
  CHECK(pts[0][0] == doctest::Approx(-1.0).epsilon(1e-3));
  CHECK(pts[0][1] == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(pts[1][0] == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(pts[1][1] == doctest::Approx(-1.0).epsilon(1e-3));
}

TEST_CASE("convex corpus programs at order 2, conditioned") {
  sdp::InteriorPointSolver s;
  for (auto [file, fstar] : {std::pair{"ex5_1.blv", 9.0}, std::pair{"ex5_2.blv", 1.5}}) {
    const auto bp = load_problem(corpus(file));
    const auto rp = reformulate(bp);
    std::vector<double> scale(static_cast<std::size_t>(rp.layout().total()), 1.0);
    scale[0] = bp.box_M;
    scale[1] = bp.bounds->n2;
    const auto cp = condition_program(rp.program, scale);
    const auto r = build_relaxation(cp.program, 2);
    const auto sol = solve_relaxation(r, s);
    INFO(file);
    REQUIRE(sol.ok());
    CHECK(std::abs(sol.value * cp.objective_scale - fstar) < 1e-3);
    const auto ex = extract_minimizers(r, sol, cp.program);
    REQUIRE(ex.certified);
    const auto w = cp.to_original(ex.points.front());
    CHECK(rp.program.is_feasible(w, 1e-3));
  }
}

TEST_CASE("conditioning preserves values and feasibility") {
  PolynomialProgram p(X() * X() * 3.0 - X() * 12.0, {X() * X() - 100.0}, {X() - 2.0});
  const auto cp = condition_program(p, {10.0});
  const std::vector<double> w{2.0};
  const auto wc = cp.to_conditioned(w);
  CHECK(wc[0] == doctest::Approx(0.2));
  CHECK(cp.program.objective().eval(wc) * cp.objective_scale == doctest::Approx(p.objective().eval(w)));
  CHECK(cp.program.is_feasible(wc));
  CHECK(cp.program.ineq()[0].eval(wc) == doctest::Approx((4.0 - 100.0) / 100.0));
  CHECK_THROWS_AS(condition_program(p, {0.0}), StructuralError);
}

TEST_CASE("certificate identity for min -x on [-1, 1] at order 2") {
  PolynomialProgram p(-X(), {X() * X() - 1.0}, {});
  sdp::InteriorPointSolver s;
  const auto chk = sos_residual_check(p, 2, s, 100);
  CHECK(chk.mu == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(chk.residual <= 1e-6);
}

TEST_CASE("zero objective without constraints has mu = 0") {
  PolynomialProgram p(Polynomial(L1), {}, {});
  sdp::InteriorPointSolver s;
  const auto chk = sos_residual_check(p, 1, s, 20);
  CHECK(std::abs(chk.mu) < 1e-6);
  CHECK(chk.residual < 1e-6);
}

TEST_CASE("Gram form: max mu matches the moment bound, mu above optimum is infeasible") {
  PolynomialProgram p(-X(), {X() * X() - 1.0}, {});
  sdp::InteriorPointSolver s;
  const auto gram = build_sos_program(p, 2);
  const auto sol = s.solve(gram.problem);
  REQUIRE(sol.status == sdp::Status::optimal);
  CHECK(sol.z[gram.mu_var] == doctest::Approx(-1.0).epsilon(1e-6));

  const auto above = build_sos_program(p, 2, -1.0 + 0.1);
  CHECK(s.check_feasibility(above.problem).verdict == sdp::Feasibility::infeasible);
  const auto below = build_sos_program(p, 2, -1.0 - 0.1);
  CHECK(s.check_feasibility(below.problem).verdict == sdp::Feasibility::feasible);
}
