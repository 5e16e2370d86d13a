#include "bilevel/corpus.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#ifndef BILEVEL_DEFAULT_CORPUS_DIR
#define BILEVEL_DEFAULT_CORPUS_DIR "corpus"
#endif

namespace bilevel {

const char* to_string(SolveMode m) { return m == SolveMode::convex_kkt ? "convex-kkt" : "nonconvex-jm"; }

std::optional<SolveMode> parse_mode(const std::string& s) {
  if (s == "convex-kkt") return SolveMode::convex_kkt;
  if (s == "nonconvex-jm") return SolveMode::nonconvex_jm;
  return std::nullopt;
}

const std::vector<BenchmarkCase>& benchmark_cases() {
  static const std::vector<BenchmarkCase> cases = [] {
    std::vector<BenchmarkCase> v;
    auto convex = [&](std::string id, double f, std::vector<std::vector<double>> pts, int k_max) {
      BenchmarkCase c;
      c.id = std::move(id);
      c.file = c.id + ".blv";
      c.mode = SolveMode::convex_kkt;
      c.f_star = f;
      c.minimizers = std::move(pts);
      c.k_max = k_max;
      v.push_back(std::move(c));
      return &v.back();
    };
    auto nonconvex = [&](std::string id, double f, std::vector<std::vector<double>> pts, double eps, int k0,
                         int k_max) {
      BenchmarkCase c;
      c.id = std::move(id);
      c.file = c.id + ".blv";
      c.mode = SolveMode::nonconvex_jm;
      c.f_star = f;
      c.minimizers = std::move(pts);
      c.value_tol = 5e-3;
      c.epsilon = eps;
      c.k_start = k0;
      c.k_max = k_max;
      v.push_back(std::move(c));
      return &v.back();
    };
    convex("ex5_1", 9.0, {{3.0, 5.0}}, 2);
    convex("ex5_2", 1.5, {{0.25, 0.0}}, 2);
    convex("ex3_7", -2.0, {{-1.0, 1.0}, {1.0, -1.0}}, 3)->all_minimizers = true;
    nonconvex("ex4_8", 0.0, {{-1.0, 1.0}}, 1e-3, 3, 3);
    nonconvex("ex5_4", -1.0, {{-1.0, -1.0}}, 1e-3, 2, 7);
    nonconvex("ex5_5", -2.0, {{-1.0, 0.0}, {-0.5, -1.0}}, 1e-6, 2, 7);
    nonconvex("ex5_6", 0.5, {{0.1, 0.5}}, 5e-5, 3, 6)->x_interval = std::pair{0.1, 1.0};
    nonconvex("ex5_7", 0.0, {{0.0, 0.0}}, 1e-3, 2, 7);
    return v;
  }();
  return cases;
}

std::string corpus_dir() {
  if (const char* env = std::getenv("BILEVEL_CORPUS_DIR"); env && *env) return env;
  return BILEVEL_DEFAULT_CORPUS_DIR;
}

std::string corpus_path(const std::string& file) { return corpus_dir() + "/" + file; }

namespace {

double distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

/// Error of one computed point against the known set.
double single_error(const BenchmarkCase& c, const std::vector<double>& pt) {
  double best = std::numeric_limits<double>::infinity();
  if (c.x_interval) {
    // Only y is pinned; x must lie in the (widened) interval.
    const auto [lo, hi] = *c.x_interval;
    const double x = pt.front();
    if (x < lo - c.point_tol || x > hi + c.point_tol) return best;
    for (const auto& m : c.minimizers) best = std::min(best, std::abs(pt.back() - m.back()));
    return best;
  }
  for (const auto& m : c.minimizers) best = std::min(best, distance(pt, m));
  return best;
}

}  // namespace

double point_error(const BenchmarkCase& c, const std::vector<std::vector<double>>& points) {
  if (points.empty()) return std::numeric_limits<double>::infinity();
  if (c.all_minimizers) {
    double worst = 0.0;
    for (const auto& m : c.minimizers) {
      double nearest = std::numeric_limits<double>::infinity();
      for (const auto& p : points) nearest = std::min(nearest, distance(p, m));
      worst = std::max(worst, nearest);
    }
    return worst;
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : points) best = std::min(best, single_error(c, p));
  return best;
}

CaseResult run_case(const BenchmarkCase& c, sdp::Solver& solver) {
  CaseResult r;
  r.id = c.id;
  r.mode = c.mode;
  r.f_star = c.f_star;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const BilevelProblem p = load_problem(corpus_path(c.file));
    if (c.mode == SolveMode::convex_kkt) {
      const ConvexPathReport rep = solve_convex_path(p, c.k_max, solver, c.k_start);
      r.f_computed = rep.value();
      const OrderResult* used = rep.run.certified();
      if (!used) used = rep.run.last_ok();
      if (used) {
        r.certified = used->certified;
        for (const auto& w : used->points) {
          const auto s = rep.split(w);
          std::vector<double> xy = s.x;
          xy.insert(xy.end(), s.y.begin(), s.y.end());
          r.points.push_back(std::move(xy));
        }
        r.note = used->note;
      } else if (!rep.run.orders.empty()) {
        r.note = rep.run.orders.back().note;
      }
    } else {
      SchemeOptions so;
      so.k_start = c.k_start;
      so.k_max = c.k_max;
      const SchemeState st = run_algorithm_4_5(p, c.epsilon, solver, so);
      r.f_computed = st.v_best;
      r.certified = st.best_certified;
      if (!st.best_point.empty()) r.points.push_back(st.best_point);
      r.note = st.stop_reason;
    }
  } catch (const std::exception& e) {
    r.note = e.what();
  }
  r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  r.value_err = r.f_computed ? std::abs(*r.f_computed - c.f_star) : std::numeric_limits<double>::infinity();
  r.point_err = point_error(c, r.points);
  r.pass = r.value_err <= c.value_tol && r.point_err <= c.point_tol;
  return r;
}

void write_results_csv(const std::vector<CaseResult>& rows, std::ostream& out) {
  std::ostringstream buf;
  buf << std::setprecision(17);
  buf << "case,mode,f_star,f_computed,value_err,point_err,certified,wall_ms\n";
  for (const auto& r : rows) {
    buf << r.id << ',' << to_string(r.mode) << ',' << r.f_star << ',';
    if (r.f_computed) buf << *r.f_computed;
    buf << ',' << r.value_err << ',' << r.point_err << ',' << (r.certified ? 1 : 0) << ',' << std::setprecision(6)
        << r.wall_ms << std::setprecision(17) << '\n';
  }
  out << buf.str();
}

}  // namespace bilevel
