// Finite-order shadow of convergence: bounds are nondecreasing in the order
// and never exceed the program's optimum (known, or bracketed by a grid).
#include <cmath>
#include <optional>

#include "bilevel/corpus.hpp"
#include "doctest.h"

using namespace bilevel;

namespace {

// Bounds are compared against the optimum with the accuracy of a near-optimal
// solve; monotonicity uses the tight tolerance.
double bound_slack(double f) { return 1e-4 * std::max(1.0, std::abs(f)); }

void check_run(const HierarchyRun& run, double f_star, int min_ok) {
  int ok = 0;
  const OrderResult* prev = nullptr;
  for (const auto& o : run.orders) {
    CAPTURE(o.k);
    CAPTURE(o.note);
    if (!o.ok()) continue;
    ++ok;
    CHECK(o.bound <= f_star + bound_slack(f_star));
    if (prev) CHECK(o.bound >= prev->bound - 1e-6);
    prev = &o;
  }
  CHECK(ok >= min_ok);
}

// Smallest objective over feasible points of a (2001 x 2001) grid on
// [-M, M] x [-N2, N2]; an upper estimate of the program's minimum.
double grid_minimum(const PolynomialProgram& prog, const BilevelProblem& p) {
  const int N = 2001;
  const double M = p.box_M, N2 = p.bounds->n2;
  double best = INFINITY;
  std::vector<double> w(2);
  for (int i = 0; i < N; ++i) {
    w[0] = -M + 2 * M * i / (N - 1);
    for (int j = 0; j < N; ++j) {
      w[1] = -N2 + 2 * N2 * j / (N - 1);
      const double f = prog.objective().eval(w);
      if (f < best && prog.is_feasible(w, 1e-9)) best = f;
    }
  }
  return best;
}

HierarchyOptions three_orders(int k_min, std::vector<double> scale) {
  HierarchyOptions o;
  o.k_min = k_min;
  o.k_max = k_min + 2;
  o.stop_on_certificate = false;
  o.scale = std::move(scale);
  return o;
}

}  // namespace

TEST_CASE("KKT programs of the convex cases") {
  sdp::InteriorPointSolver solver;
  for (const char* id : {"ex5_1", "ex5_2"}) {
    CAPTURE(id);
    const auto& c = *std::find_if(benchmark_cases().begin(), benchmark_cases().end(),
                                  [&](const BenchmarkCase& b) { return b.id == id; });
    const auto p = load_problem(corpus_path(c.file));
    const auto kkt = reformulate(p);
    const int k0 = minimal_order(kkt.program);
    check_run(run_hierarchy(kkt.program, solver, three_orders(k0, natural_scale(p, kkt.layout().total()))),
              c.f_star, 2);
  }
}

TEST_CASE("KKT program of the two-minimizer case") {
  // order 5 has about 3000 moments, beyond the dense solver; orders 3 and 4
  const auto p = load_problem(corpus_path("ex3_7.blv"));
  const auto kkt = reformulate(p);
  sdp::InteriorPointSolver solver;
  auto o = three_orders(3, natural_scale(p, kkt.layout().total()));
  o.k_max = 4;
  check_run(run_hierarchy(kkt.program, solver, o), -2.0, 2);
}

TEST_CASE("eps programs of the nonconvex cases") {
  sdp::InteriorPointSolver solver;
  for (const auto& c : benchmark_cases()) {
    if (c.mode != SolveMode::nonconvex_jm) continue;
    CAPTURE(c.id);
    const auto p = load_problem(corpus_path(c.file));
    // first k whose eps program is nonempty, as the scheme would find it
    std::optional<EpsProblem> ep;
    for (int k = std::max(c.k_start, value_order_min(p)); k <= c.k_max && !ep; ++k) {
      auto cand = make_eps_problem(p, approximate_value_function(p, k, solver), c.epsilon);
      if (step2_feasibility(cand, k, solver, &p).verdict == SetVerdict::nonempty_witness) ep = std::move(cand);
    }
    REQUIRE(ep);
    CAPTURE(ep->k);
    const double upper = grid_minimum(ep->program, p);
    REQUIRE(std::isfinite(upper));
    check_run(run_hierarchy(ep->program, solver, three_orders(minimal_order(ep->program), ep->scale)), upper, 2);
  }
}

TEST_CASE("wrapped single-level program matches the direct one") {
  const auto p = load_problem(corpus_path("pop_wrap.blv"));
  const VarLayout L{1, 0, 0};
  const auto x = Polynomial::variable(L, 0);
  const PolynomialProgram direct(-x, {x * x - 1.0}, {});
  sdp::InteriorPointSolver solver;
  const auto wrapped = solve_convex_path(p, 3, solver);
  HierarchyOptions o;
  o.k_min = 2;
  o.k_max = 3;
  o.stop_on_certificate = false;
  const auto d = run_hierarchy(direct, solver, o);
  REQUIRE(wrapped.value());
  CHECK(*wrapped.value() == doctest::Approx(-1.0).epsilon(1e-6));
  for (const auto& od : d.orders) {
    REQUIRE(od.ok());
    CHECK(std::abs(od.bound - *wrapped.value()) <= 1e-6);
  }
}
