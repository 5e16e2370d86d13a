// End-to-end acceptance run: one PASS/FAIL line per criterion, exit status 0
// only when every criterion passes.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "bilevel/corpus.hpp"

using namespace bilevel;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

const BenchmarkCase& find_case(const std::string& id) {
  const auto& cs = benchmark_cases();
  const auto it = std::find_if(cs.begin(), cs.end(), [&](const BenchmarkCase& c) { return c.id == id; });
  if (it == cs.end()) throw std::runtime_error("no benchmark case " + id);
  return *it;
}

/// Collects failures for one criterion; the first failure message is kept.
struct Check {
  bool ok = true;
  std::ostringstream detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail << " first failure: " << what << ";";
    }
  }
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

// ----------------------------------------------------------------- 1, 2

void check_convex_case(Check& c, const std::string& id, double time_limit) {
  sdp::InteriorPointSolver solver;
  const auto& bc = find_case(id);
  const auto r = run_case(bc, solver);
  c.detail << ' ' << id << ": f=" << (r.f_computed ? fmt(*r.f_computed) : "none") << " point_err=" << fmt(r.point_err)
           << " " << fmt(r.wall_ms / 1000) << "s;";
  c.require(r.f_computed && r.value_err <= 1e-3, id + " value");
  c.require(r.point_err <= 1e-2, id + " point");
  c.require(r.wall_ms / 1000 < time_limit, id + " time");
  c.require(bc.k_max <= 2 || id == "ex3_7", id + " order above 2");
}

Check criterion1() {
  Check c;
  check_convex_case(c, "ex5_1", 30);
  check_convex_case(c, "ex5_2", 30);
  return c;
}

Check criterion2() {
  Check c;
  const auto t0 = Clock::now();
  const auto p = load_problem(corpus_path("ex3_7.blv"));
  sdp::InteriorPointSolver solver;
  const auto rep = solve_convex_path(p, 3, solver);
  const double s = std::sqrt(0.5);
  const std::vector<std::vector<double>> want{{-1, 1, s, s, 0}, {1, -1, s, 0, s}};
  const OrderResult* used = rep.run.certified();
  c.require(used != nullptr, "no certified order <= 3");
  if (used) {
    c.require(std::abs(used->bound + 2) <= 1e-3, "value " + fmt(used->bound));
    for (const auto& w : want) {
      double best = INFINITY;
      for (const auto& pt : used->points) {
        double d = 0;
        for (std::size_t i = 0; i < w.size(); ++i) d = std::max(d, std::abs(pt[i] - w[i]));
        best = std::min(best, d);
      }
      c.require(best <= 1e-2, "minimizer/multiplier mismatch " + fmt(best));
    }
    c.detail << " k=" << used->k << " value=" << fmt(used->bound) << " points=" << used->points.size() << ';';
  }
  const double t = seconds_since(t0);
  c.detail << ' ' << fmt(t) << "s;";
  c.require(t < 60, "time");
  return c;
}

// -------------------------------------------------------------------- 3

double printed_J3(double x) {
  const double coef[] = {-0.3338, 0.5011, 0.0098, -0.0032, -0.0696, -0.1012, -0.0432};
  double v = 0.0, pw = 1.0;
  for (double a : coef) v += a * pw, pw *= x;
  return v;
}

Check criterion3() {
  Check c;
  const auto t0 = Clock::now();
  const auto p = load_problem(corpus_path("ex4_8.blv"));
  sdp::InteriorPointSolver solver;
  const auto v = approximate_value_function(p, 3, solver);
  double dev = 0.0, over = -INFINITY;
  for (const auto& r : sample_grid(v, p, 101)) {
    dev = std::max(dev, std::abs(r.Jk - printed_J3(r.x)));
    over = std::max(over, r.Jk - r.Joracle);
  }
  c.detail << " max|J3 - printed|=" << fmt(dev) << " max(J3 - J)=" << fmt(over) << ';';
  c.require(dev <= 0.05, "J3 far from the printed polynomial");
  c.require(over <= 1e-5, "J3 above the value function");

  const auto& bc = find_case("ex4_8");
  const auto r = run_case(bc, solver);
  c.detail << " value=" << (r.f_computed ? fmt(*r.f_computed) : "none") << " point_err=" << fmt(r.point_err) << ';';
  c.require(bc.epsilon == 1e-3 && bc.k_start == 3, "case parameters");
  c.require(r.f_computed && std::abs(*r.f_computed) <= 5e-3, "value");
  c.require(r.point_err <= 1e-2, "point");
  const double t = seconds_since(t0);
  c.detail << ' ' << fmt(t) << "s;";
  c.require(t < 120, "time");
  return c;
}

// -------------------------------------------------------------------- 4

Check criterion4() {
  Check c;
  sdp::InteriorPointSolver solver;
  for (const char* id : {"ex5_4", "ex5_5", "ex5_6", "ex5_7"}) {
    const auto& bc = find_case(id);
    const auto r = run_case(bc, solver);
    c.detail << ' ' << id << ": f=" << (r.f_computed ? fmt(*r.f_computed) : "none") << " point_err="
             << fmt(r.point_err) << " " << fmt(r.wall_ms / 1000) << "s;";
    c.require(r.f_computed && r.value_err <= 5e-3, std::string(id) + " value");
    c.require(r.point_err <= bc.point_tol, std::string(id) + " point");
    c.require(r.wall_ms / 1000 < 180, std::string(id) + " time");
    // the scheme never goes past k_max, so deg J_k <= 2 k_max
    c.require(2 * bc.k_max <= 14, std::string(id) + " underestimator degree");
  }
  return c;
}

// -------------------------------------------------------------------- 5

/// Smallest objective over feasible points of a grid on [-M, M] x [-N2, N2].
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

void check_monotone(Check& c, const std::string& id, const HierarchyRun& run, double upper) {
  int ok = 0;
  const OrderResult* prev = nullptr;
  for (const auto& o : run.orders) {
    if (!o.ok()) continue;
    ++ok;
    c.require(o.bound <= upper + 1e-4 * std::max(1.0, std::abs(upper)),
              id + " bound above optimum at k=" + std::to_string(o.k));
    if (prev) c.require(o.bound >= prev->bound - 1e-6, id + " decrease at k=" + std::to_string(o.k));
    prev = &o;
  }
  c.require(ok >= 2, id + " fewer than two solved orders");
  c.detail << ' ' << id << ":" << ok << "/" << run.orders.size() << ';';
}

Check criterion5() {
  Check c;
  sdp::InteriorPointSolver solver;
  for (const auto& bc : benchmark_cases()) {
    const auto p = load_problem(corpus_path(bc.file));
    HierarchyOptions o;
    o.stop_on_certificate = false;
    if (bc.mode == SolveMode::convex_kkt) {
      const auto kkt = reformulate(p);
      o.k_min = minimal_order(kkt.program);
      // order 5 of the two-minimizer case exceeds the dense solver
      o.k_max = bc.id == "ex3_7" ? o.k_min + 1 : o.k_min + 2;
      o.scale = natural_scale(p, kkt.layout().total());
      check_monotone(c, bc.id, run_hierarchy(kkt.program, solver, o), bc.f_star);
      continue;
    }
    std::optional<EpsProblem> ep;
    for (int k = std::max(bc.k_start, value_order_min(p)); k <= bc.k_max && !ep; ++k) {
      auto cand = make_eps_problem(p, approximate_value_function(p, k, solver), bc.epsilon);
      if (step2_feasibility(cand, k, solver, &p).verdict == SetVerdict::nonempty_witness) ep = std::move(cand);
    }
    c.require(ep.has_value(), bc.id + " no nonempty eps program");
    if (!ep) continue;
    o.k_min = minimal_order(ep->program);
    o.k_max = o.k_min + 2;
    o.scale = ep->scale;
    check_monotone(c, bc.id + "[J" + std::to_string(ep->k) + "]", run_hierarchy(ep->program, solver, o),
                   grid_minimum(ep->program, p));
  }
  return c;
}

// -------------------------------------------------------------------- 6

Check criterion6() {
  Check c;
  sdp::InteriorPointSolver solver;
  int checked = 0;
  for (const auto& bc : benchmark_cases()) {
    if (bc.mode != SolveMode::nonconvex_jm) continue;
    const auto p = load_problem(corpus_path(bc.file));
    for (int k = std::max(bc.k_start, value_order_min(p)); k <= bc.k_max; ++k) {
      const auto v = approximate_value_function(p, k, solver);
      double over = -INFINITY;
      for (const auto& r : sample_grid(v, p, 2001)) over = std::max(over, r.Jk - r.Joracle);
      c.require(over <= 1e-5, bc.id + " J" + std::to_string(k) + " exceeds J by " + fmt(over));
      ++checked;
    }
  }
  c.detail << ' ' << checked << " underestimators;";

  const auto p = load_problem(corpus_path("ex4_8.blv"));
  double prev = INFINITY;
  c.detail << " L1:";
  for (int k = 3; k <= 5; ++k) {
    const auto rows = sample_grid(approximate_value_function(p, k, solver), p, 2001);
    double l1 = 0.0;
    for (const auto& r : rows) l1 += std::abs(r.Joracle - r.Jk);
    l1 *= 2.0 * p.box_M / static_cast<double>(rows.size());
    c.detail << ' ' << fmt(l1);
    c.require(l1 <= prev + 1e-4, "L1 error increased at k=" + std::to_string(k));
    prev = l1;
  }
  c.detail << ';';
  return c;
}

// -------------------------------------------------------------------- 7

Check criterion7() {
  Check c;
  std::mt19937_64 rng(42);

  // box moments
  double worst = 0.0;
  for (int n = 1; n <= 3; ++n) {
    const double M = n == 1 ? 2.0 : 1.0;
    const auto b = box_moments(n, M, 8);
    std::uniform_real_distribution<double> u(-M, M);
    std::vector<double> sum(b.index.size(), 0.0), sum2(b.index.size(), 0.0), x(static_cast<std::size_t>(n));
    const int N = 1000000;
    for (int s = 0; s < N; ++s) {
      for (auto& v : x) v = u(rng);
      for (std::size_t i = 0; i < b.index.size(); ++i) {
        const double v = b.index[i].eval(x);
        sum[i] += v;
        sum2[i] += v * v;
      }
    }
    for (std::size_t i = 0; i < b.index.size(); ++i) {
      const double scale = std::max(std::abs(b.gamma[i]), std::sqrt(sum2[i] / N));
      worst = std::max(worst, std::abs(sum[i] / N - b.gamma[i]) / scale);
    }
  }
  c.detail << " moments rel=" << fmt(worst) << ';';
  c.require(worst <= 1e-2, "box moments");

  // ring axioms and derivatives
  const VarLayout L{1, 2, 0};
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  const auto basis = monomial_basis(L.total(), 3);
  const auto random_poly = [&] {
    Polynomial p(L);
    for (const auto& m : basis) p += Polynomial::monomial(L, m, u(rng));
    return p;
  };
  const auto rel = [](double a, double b) {
    return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b)));
  };
  double ring = 0.0, deriv = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto p = random_poly(), q = random_poly(), r = random_poly();
    const std::vector<double> w{u(rng), u(rng), u(rng)};
    ring = std::max({ring, rel((p + q).eval(w), p.eval(w) + q.eval(w)), rel((p * q).eval(w), p.eval(w) * q.eval(w)),
                     rel((p * (q + r)).eval(w), (p * q + p * r).eval(w))});
    for (int i = 0; i < L.total(); ++i) {
      auto a = w, b = w;
      a[static_cast<std::size_t>(i)] += 1e-4;
      b[static_cast<std::size_t>(i)] -= 1e-4;
      deriv = std::max(deriv, rel(p.partial(i).eval(w), (p.eval(a) - p.eval(b)) / 2e-4));
    }
  }
  c.detail << " ring=" << fmt(ring) << " derivative=" << fmt(deriv) << ';';
  c.require(ring <= 1e-9, "ring axioms");
  c.require(deriv <= 1e-5, "derivatives");

  // KKT points project onto lower-level minimizers
  const auto p = load_problem(corpus_path("ex3_7.blv"));
  sdp::InteriorPointSolver solver;
  const auto rep = solve_convex_path(p, 3, solver);
  double proj = rep.certified() ? 0.0 : INFINITY;
  if (const auto* o = rep.run.certified()) {
    for (const auto& w : o->points) {
      const auto s = rep.split(w);
      proj = std::max(proj, std::abs(p.G.eval(join_xy(s.x, s.y)) - lower_value_oracle(p, s.x, 2001)));
    }
  }
  c.detail << " KKT projection=" << fmt(proj) << ';';
  c.require(proj <= 1e-3, "KKT projection");
  return c;
}

// ---------------------------------------------------------------- 8, 9

Check criterion8() {
  Check c;
  const auto e = holder_exponent(1, 1, 4);
  c.detail << " tau0=" << e.tau0_num << '/' << e.tau0_den << ';';
  c.require(e.tau0_num == 1 && e.tau0_den == 84, "tau0");
  return c;
}

Check criterion9() {
  Check c;
  const auto p = load_problem(corpus_path("pop_wrap.blv"));
  const VarLayout L{1, 0, 0};
  const auto x = Polynomial::variable(L, 0);
  const PolynomialProgram direct(-x, {x * x - 1.0}, {});
  sdp::InteriorPointSolver solver;
  const auto wrapped = solve_convex_path(p, 3, solver);
  HierarchyOptions o;
  o.k_min = 1;
  o.k_max = 3;
  o.stop_on_certificate = false;
  const auto d = run_hierarchy(direct, solver, o);
  c.require(wrapped.value().has_value(), "wrapped program not solved");
  if (!wrapped.value()) return c;
  c.detail << " wrapped=" << fmt(*wrapped.value()) << " direct:";
  for (const auto& od : d.orders) {
    c.detail << ' ' << fmt(od.bound);
    c.require(od.ok() && std::abs(od.bound - *wrapped.value()) <= 1e-6, "order " + std::to_string(od.k));
  }
  c.detail << ';';
  return c;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Check()>>> criteria{
      {"convex table (5.1, 5.2)", criterion1},
      {"two minimizers with multipliers", criterion2},
      {"order 3 underestimator and eps solve", criterion3},
      {"nonconvex table (5.4 to 5.7)", criterion4},
      {"hierarchy monotonicity", criterion5},
      {"underestimator property", criterion6},
      {"oracle suites", criterion7},
      {"Hoelder exponent", criterion8},
      {"single-level reduction", criterion9},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = Clock::now();
    Check c;
    try {
      c = criteria[i].second();
    } catch (const std::exception& e) {
      c.ok = false;
      c.detail << " exception: " << e.what();
    }
    failed += c.ok ? 0 : 1;
    std::printf("criterion %zu: %s  %s (%.1fs)%s\n", i + 1, c.ok ? "PASS" : "FAIL", criteria[i].first,
                seconds_since(t0), c.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
