#include <benchmark/benchmark.h>

#include <random>
#include <string>

#include "bilevel/kkt.hpp"
#include "bilevel/moment.hpp"
#include "bilevel/scheme.hpp"
#include "bilevel/value_approx.hpp"

using namespace bilevel;

namespace {

std::string corpus(const char* name) { return std::string(BILEVEL_CORPUS_DIR) + "/" + name; }

Polynomial random_poly(const VarLayout& L, int deg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Polynomial p(L);
  for (const auto& m : monomial_basis(L.total(), deg)) p += Polynomial::monomial(L, m, u(rng));
  return p;
}

void BM_PolynomialMultiply(benchmark::State& state) {
  const VarLayout L{1, 2, 0};
  std::mt19937_64 rng(42);
  const int d = static_cast<int>(state.range(0));
  const Polynomial a = random_poly(L, d, rng), b = random_poly(L, d, rng);
  for (auto _ : state) benchmark::DoNotOptimize(a * b);
  state.SetLabel(std::to_string(a.num_terms()) + " terms");
}
BENCHMARK(BM_PolynomialMultiply)->Arg(2)->Arg(4)->Arg(6);

void BM_BuildRelaxation(benchmark::State& state) {
  const auto kkt = reformulate(load_problem(corpus("ex3_7.blv")));
  const int k = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(build_relaxation(kkt.program, k).to_sdp());
}
BENCHMARK(BM_BuildRelaxation)->Arg(3)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_ConvexPath(benchmark::State& state) {
  const auto p = load_problem(corpus("ex5_1.blv"));
  sdp::InteriorPointSolver solver;
  for (auto _ : state) benchmark::DoNotOptimize(solve_convex_path(p, 2, solver).value());
}
BENCHMARK(BM_ConvexPath)->Unit(benchmark::kMillisecond);

void BM_ValueApproximation(benchmark::State& state) {
  const auto p = load_problem(corpus("ex4_8.blv"));
  sdp::InteriorPointSolver solver;
  const int k = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(approximate_value_function(p, k, solver).certificate_gap);
}
BENCHMARK(BM_ValueApproximation)->DenseRange(3, 5)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
