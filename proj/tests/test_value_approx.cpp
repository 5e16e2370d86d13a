#include <cmath>
#include <random>
#include <sstream>

#include "bilevel/value_approx.hpp"
#include "doctest.h"

using namespace bilevel;

namespace {

std::string corpus(const char* name) { return std::string(BILEVEL_CORPUS_DIR) + "/" + name; }

double printed_J3(double x) {
  const double c[] = {-0.3338, 0.5011, 0.0098, -0.0032, -0.0696, -0.1012, -0.0432};
  double v = 0.0, p = 1.0;
  for (double ci : c) v += ci * p, p *= x;
  return v;
}

}  // namespace

TEST_CASE("box moments in closed form") {
  const auto b = box_moments(2, 2.0, 4);
  CHECK(b(Monomial{0, 0}) == 1.0);
  CHECK(b(Monomial{1, 0}) == 0.0);
  CHECK(b(Monomial{2, 0}) == doctest::Approx(4.0 / 3));
  CHECK(b(Monomial{2, 2}) == doctest::Approx(16.0 / 9));
  CHECK(b(Monomial{0, 4}) == doctest::Approx(16.0 / 5));
  CHECK_THROWS_AS(b(Monomial{3, 2}), StructuralError);
}

TEST_CASE("box moments against Monte Carlo") {
  std::mt19937_64 rng(42);
  for (int n = 1; n <= 3; ++n) {
    const double M = n == 1 ? 2.0 : 1.0;
    const auto b = box_moments(n, M, 8);
    std::uniform_real_distribution<double> u(-M, M);
    std::vector<double> sum(b.index.size(), 0.0), sum2(b.index.size(), 0.0);
    const int N = 1000000;
    std::vector<double> x(static_cast<std::size_t>(n));
    for (int s = 0; s < N; ++s) {
      for (auto& v : x) v = u(rng);
      for (std::size_t i = 0; i < b.index.size(); ++i) {
        const double v = b.index[i].eval(x);
        sum[i] += v;
        sum2[i] += v * v;
      }
    }
    for (std::size_t i = 0; i < b.index.size(); ++i) {
      const double mc = sum[i] / N;
      // odd moments vanish; compare them on the scale of the monomial's size
      const double scale = std::max(std::abs(b.gamma[i]), std::sqrt(sum2[i] / N));
      CAPTURE(n);
      CAPTURE(i);
      CHECK(std::abs(mc - b.gamma[i]) <= 1e-2 * scale);
    }
  }
}

TEST_CASE("constant lower objective gives a constant underestimator") {
  const auto p = load_problem(corpus("const_g.blv"));
  sdp::InteriorPointSolver solver;
  for (int k = 1; k <= 3; ++k) {
    const auto v = approximate_value_function(p, k, solver);
    CAPTURE(k);
    CHECK(v.sos_ok);
    CHECK(v.Jk.cleaned(1e-6).num_terms() == 1);
    CHECK(v.eval(std::vector<double>{0.3}) == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(v.certificate_gap == doctest::Approx(2.0).epsilon(1e-6));
  }
}

TEST_CASE("order 3 underestimator of the cubic lower level") {
  const auto p = load_problem(corpus("ex4_8.blv"));
  sdp::InteriorPointSolver solver;
  const auto v = approximate_value_function(p, 3, solver);
  CHECK(v.sos_ok);
  CHECK(v.sos_residual <= 1e-5);
  CHECK(v.Jk.degree() <= 6);
  const auto rows = sample_grid(v, p, 101);
  REQUIRE(rows.size() == 101);
  for (const auto& r : rows) {
    CHECK(r.Jk <= r.Joracle + 1e-5);
    CHECK(std::abs(r.Jk - printed_J3(r.x)) <= 0.05);
  }
  std::ostringstream csv;
  write_grid_csv(sample_grid(v, p, 2), csv);
  std::string line;
  std::istringstream in(csv.str());
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 3);
  CHECK(csv.str().rfind("x,Jk,Joracle\n", 0) == 0);
}

TEST_CASE("underestimation on fine grids and L1 trend") {
  const auto p = load_problem(corpus("ex4_8.blv"));
  sdp::InteriorPointSolver solver;
  double prev = INFINITY;
  for (int k = 3; k <= 5; ++k) {
    const auto v = approximate_value_function(p, k, solver);
    const auto rows = sample_grid(v, p, 2001);
    double l1 = 0.0;
    for (const auto& r : rows) {
      CHECK(r.Jk <= r.Joracle + 1e-5);
      l1 += std::abs(r.Joracle - r.Jk);
    }
    l1 *= 2.0 / (rows.size() - 1);
    CAPTURE(k);
    CHECK(l1 <= prev + 1e-4);
    prev = l1;
  }
}

TEST_CASE("value approximation errors") {
  const auto p = load_problem(corpus("ex5_4.blv"));
  sdp::InteriorPointSolver solver;
  CHECK(value_order_min(p) == 2);
  CHECK_THROWS_AS(approximate_value_function(p, 1, solver), RelaxationOrderError);
  const auto v = approximate_value_function(p, 2, solver);
  CHECK_THROWS(sample_grid(v, p, 1));
  auto q = p;
  q.bounds.reset();
  CHECK_THROWS_AS(approximate_value_function(q, 2, solver), SemanticError);
}
