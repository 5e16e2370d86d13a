#include <cmath>
#include <sstream>

#include "bilevel/scheme.hpp"
#include "doctest.h"

using namespace bilevel;

namespace {

std::string corpus(const char* name) { return std::string(BILEVEL_CORPUS_DIR) + "/" + name; }

}  // namespace

TEST_CASE("eps problem layout") {
  const auto p = load_problem(corpus("ex5_4.blv"));
  sdp::InteriorPointSolver solver;
  const auto v = approximate_value_function(p, 2, solver);
  const auto ep = make_eps_problem(p, v, 1e-3);
  // g (3), h (1), G - J_k - eps, box on x
  REQUIRE(ep.program.ineq().size() == 6);
  CHECK(ep.value_constraint == 4);
  CHECK(ep.program.eq().empty());
  CHECK(ep.scale.size() == 2);
  const std::vector<double> w{3.0, -1.0};
  CHECK(ep.program.ineq()[4].eval(w) ==
        doctest::Approx(p.G.eval(w) - v.eval(std::vector<double>{3.0}) - 1e-3));
  CHECK(ep.program.ineq()[5].eval(w) == doctest::Approx(9.0 - 100.0));
}

TEST_CASE("step 2 finds witnesses and certifies emptiness") {
  const auto p = load_problem(corpus("ex5_4.blv"));
  sdp::InteriorPointSolver solver;
  const auto v = approximate_value_function(p, 2, solver);

  const auto ok = step2_feasibility(make_eps_problem(p, v, 1e-3), 2, solver, &p);
  CHECK(ok.verdict == SetVerdict::nonempty_witness);
  CHECK(make_eps_problem(p, v, 1e-3).program.is_feasible(ok.witness, 1e-6));

  // J_k <= J <= G, so G - J_k + 1 <= 0 has no solution
  const auto empty = step2_feasibility(make_eps_problem(p, v, -1.0), 2, solver, &p);
  CHECK(empty.verdict == SetVerdict::certified_empty);
  CHECK(empty.witness.empty());
  CHECK(std::string(to_string(SetVerdict::certified_empty)) == "certified-empty");
}

TEST_CASE("witness without upper constraints") {
  const auto p = parse_problem(std::string(R"(bilevel 1
dims 1 1 0 1
box_M 1
bounds 1 1
upper_objective
  1 1 1
end
lower_objective
  1 0 2
end
lower_constraint
  1 2
  -1 0
end
)"));
  sdp::InteriorPointSolver solver;
  const auto v = approximate_value_function(p, 1, solver);
  const auto ep = make_eps_problem(p, v, 1e-3);
  const auto r = step2_feasibility(ep, 1, solver, &p);
  REQUIRE(r.verdict == SetVerdict::nonempty_witness);
  CHECK(std::abs(r.witness[1]) <= std::sqrt(2e-3));
}

TEST_CASE("scheme on the cubic lower level") {
  const auto p = load_problem(corpus("ex5_4.blv"));
  sdp::InteriorPointSolver solver;
  CHECK_THROWS_AS(run_algorithm_4_5(p, 0.0, solver), std::invalid_argument);
  CHECK_THROWS_AS(run_algorithm_4_5(p, -1.0, solver), std::invalid_argument);

  SchemeOptions o;
  o.k_start = 2;
  o.k_max = 5;
  const auto st = run_algorithm_4_5(p, 1e-3, solver, o);
  REQUIRE(st.v_best);
  CHECK(*st.v_best == doctest::Approx(-1.0).epsilon(1e-4));
  REQUIRE(st.v_trace.size() == st.history.size());
  for (std::size_t i = 1; i < st.v_trace.size(); ++i) {
    if (st.v_trace[i - 1]) {
      REQUIRE(st.v_trace[i]);
      CHECK(*st.v_trace[i] <= *st.v_trace[i - 1] + 1e-12);
    }
  }
  // two stable iterations end the run before k_max
  CHECK(st.history.size() == 3);
  CHECK(!st.stop_reason.empty());

  std::ostringstream log;
  write_run_log(st, log);
  std::istringstream in(log.str());
  std::string header;
  std::getline(in, header);
  CHECK(header == "k,sum_lambda_gamma,verdict,val,v_best");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == static_cast<int>(st.history.size()));
}

TEST_CASE("solution validation") {
  const auto p = load_problem(corpus("ex5_4.blv"));
  const auto good = validate_solution(p, std::vector<double>{-1.0}, std::vector<double>{-1.0}, 1e-3);
  CHECK(good.ok);
  CHECK(good.lower_value == doctest::Approx(-1.0));

  // y = 0 is not a lower-level minimizer
  const auto lower = validate_solution(p, std::vector<double>{0.0}, std::vector<double>{0.0}, 1e-3);
  CHECK(!lower.lower_ok);
  CHECK(!lower.ok);

  const auto upper = validate_solution(p, std::vector<double>{11.0}, std::vector<double>{-1.0}, 1e-3);
  REQUIRE(upper.violated_g.size() == 1);
  CHECK(upper.violated_g[0] == 1);
  CHECK(!upper.ok);
}
