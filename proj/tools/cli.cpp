#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "bilevel/corpus.hpp"
#include "bilevel/scheme.hpp"
#include "bilevel/value_approx.hpp"

namespace bilevel::cli {

namespace {

struct InvalidFlags : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt_vec(const std::vector<double>& v, int precision = 6) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << '(';
  for (std::size_t i = 0; i < v.size(); ++i) s << (i ? ", " : "") << v[i];
  s << ')';
  return s.str();
}

template <class Fn>
void write_file(const std::string& path, Fn&& fn) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  fn(f);
  if (!f) throw IoError("write to '" + path + "' failed");
}

void print_validation(const BilevelProblem& p, const std::vector<double>& x, const std::vector<double>& y,
                      double eps, std::ostream& out) {
  if (!p.bounds) {
    out << "  validation skipped (no N2 bound for the lower-level oracle)\n";
    return;
  }
  const ValidationReport v = validate_solution(p, x, y, eps);
  double gmax = -INFINITY, hmax = -INFINITY;
  for (double g : v.g) gmax = std::max(gmax, g);
  for (double h : v.h) hmax = std::max(hmax, h);
  out << std::scientific << std::setprecision(3);
  out << "  validation: max g = " << (v.g.empty() ? 0.0 : gmax) << ", max h = " << (v.h.empty() ? 0.0 : hmax)
      << ", G - J = " << v.lower_gap << (v.ok ? "  [pass]" : "  [FAIL]") << '\n';
  for (int i : v.violated_g) out << "    violated g[" << i << "] = " << v.g[static_cast<std::size_t>(i)] << '\n';
  for (int j : v.violated_h) out << "    violated h[" << j << "] = " << v.h[static_cast<std::size_t>(j)] << '\n';
  out << std::defaultfloat;
}

// ------------------------------------------------------------------ solve

struct SolveArgs {
  std::string file;
  std::string mode;
  int order = 0;
  double epsilon = 0.0;
  int max_outer = 0;
  double solver_tol = 1e-8;
  std::string out;
  bool epsilon_set = false;
  bool max_outer_set = false;
};

int cmd_solve(const SolveArgs& a, std::ostream& out) {
  const auto mode = parse_mode(a.mode);
  if (!mode) throw InvalidFlags("--mode must be convex-kkt or nonconvex-jm");
  if (!(a.solver_tol > 0.0)) throw InvalidFlags("--solver-tol must be positive");
  if (a.order < 0) throw InvalidFlags("--order must be nonnegative");
  if (*mode == SolveMode::convex_kkt && (a.epsilon_set || a.max_outer_set)) {
    throw InvalidFlags("--epsilon and --max-outer only apply to --mode nonconvex-jm");
  }
  if (*mode == SolveMode::nonconvex_jm) {
    if (a.epsilon_set && !(a.epsilon > 0.0)) throw InvalidFlags("--epsilon must be positive");
    if (a.max_outer_set && a.max_outer < 1) throw InvalidFlags("--max-outer must be at least 1");
  }

  const BilevelProblem p = load_problem(a.file);
  sdp::IpmSettings settings;
  settings.tolerance = a.solver_tol;
  settings.near_tolerance = std::max(settings.near_tolerance, a.solver_tol);
  sdp::InteriorPointSolver solver(settings);

  if (*mode == SolveMode::convex_kkt) {
    const auto kkt = reformulate(p);
    const int k_min = minimal_order(kkt.program);
    const int k_max = a.order > 0 ? a.order : k_min;
    if (k_max < k_min) {
      throw InvalidFlags("--order " + std::to_string(k_max) + " is below the minimal relaxation order " +
                         std::to_string(k_min));
    }
    const ConvexPathReport rep = solve_convex_path(p, k_max, solver);
    out << "convex-kkt: " << a.file << ", orders " << k_min << ".." << k_max << '\n';
    for (const auto& o : rep.run.orders) {
      out << "  k=" << o.k << "  status=" << sdp::to_string(o.status) << (o.near_optimal ? " (near)" : "")
          << "  bound=" << std::setprecision(10) << o.bound << "  certified=" << (o.certified ? "yes" : "no")
          << std::defaultfloat << "  time=" << std::fixed << std::setprecision(1) << o.wall_ms << "ms"
          << std::defaultfloat << '\n';
      if (!o.note.empty()) out << "      " << o.note << '\n';
    }
    if (!a.out.empty()) {
      write_file(a.out, [&](std::ostream& f) {
        f << std::setprecision(17) << "k,status,near_optimal,bound,certified,points,pinf,dinf,gap,wall_ms\n";
        for (const auto& o : rep.run.orders) {
          f << o.k << ',' << sdp::to_string(o.status) << ',' << o.near_optimal << ',' << o.bound << ','
            << o.certified << ',' << o.points.size() << ',' << o.primal_infeasibility << ','
            << o.dual_infeasibility << ',' << o.relative_gap << ',' << o.wall_ms << '\n';
        }
      });
    }
    const OrderResult* used = rep.run.certified();
    if (!used) used = rep.run.last_ok();
    if (!used) {
      out << "no order solved\n";
      return kSolverFailure;
    }
    out << "f = " << std::setprecision(10) << used->bound << std::defaultfloat
        << (used->certified ? "  (certified global minimum)" : "  (lower bound; not certified)") << '\n';
    for (const auto& w : used->points) {
      const auto s = rep.split(w);
      out << "  point x=" << fmt_vec(s.x) << " y=" << fmt_vec(s.y) << " lambda=" << fmt_vec(s.lambda) << '\n';
      print_validation(p, s.x, s.y, 0.0, out);
    }
    return kOk;
  }

  SchemeOptions so;
  so.k_start = a.order;
  const int k0 = std::max(value_order_min(p), a.order);
  so.k_max = k0 + (a.max_outer_set ? a.max_outer : 1) - 1;
  const double eps = a.epsilon_set ? a.epsilon : 1e-3;
  if (a.order > 0 && a.order < value_order_min(p)) {
    throw InvalidFlags("--order " + std::to_string(a.order) + " is below k0 = " + std::to_string(value_order_min(p)));
  }
  const SchemeState st = run_algorithm_4_5(p, eps, solver, so);
  out << "nonconvex-jm: " << a.file << ", epsilon " << eps << ", k " << k0 << ".." << so.k_max << '\n';
  for (const auto& it : st.history) {
    out << "  k=" << it.k << "  sum(lambda*gamma)=" << std::setprecision(8) << it.certificate_gap
        << "  S_k=" << to_string(it.verdict) << "  val=";
    if (it.value) {
      out << std::setprecision(10) << *it.value;
    } else {
      out << "-";
    }
    out << std::defaultfloat << "  inner order " << it.inner_order << "  certified=" << (it.certified ? "yes" : "no")
        << '\n';
    if (!it.note.empty()) out << "      " << it.note << '\n';
  }
  out << "stop: " << st.stop_reason << '\n';
  if (!a.out.empty()) write_file(a.out, [&](std::ostream& f) { write_run_log(st, f); });
  if (!st.v_best) {
    out << "no value obtained\n";
    return kSolverFailure;
  }
  out << "v_eps = " << std::setprecision(10) << *st.v_best << std::defaultfloat
      << (st.best_certified ? "  (inner relaxation certified)" : "") << '\n';
  if (!st.best_point.empty()) {
    const std::vector<double> x(st.best_point.begin(), st.best_point.begin() + p.n());
    const std::vector<double> y(st.best_point.begin() + p.n(), st.best_point.end());
    out << "  point x=" << fmt_vec(x) << " y=" << fmt_vec(y) << '\n';
    print_validation(p, x, y, eps, out);
  }
  return kOk;
}

// ------------------------------------------------------------ value-approx

int cmd_value_approx(const std::string& file, int order, int grid, const std::string& out_path, std::ostream& out) {
  if (grid < 2) throw InvalidFlags("--grid must be at least 2");
  const BilevelProblem p = load_problem(file);
  const int k0 = value_order_min(p);
  const int k = order > 0 ? order : k0;
  if (k < k0) throw InvalidFlags("--order " + std::to_string(k) + " is below k0 = " + std::to_string(k0));
  sdp::InteriorPointSolver solver;
  const ValuePolyApprox v = approximate_value_function(p, k, solver);
  out << "J" << k << " coefficients (graded lex):\n";
  const MonomialIndex basis(p.n(), 2 * k);
  out << std::setprecision(10);
  for (const Monomial& b : basis.basis()) {
    out << "  [";
    for (std::size_t i = 0; i < b.size(); ++i) out << (i ? " " : "") << b[i];
    out << "]  " << v.Jk.coefficient(b) << '\n';
  }
  out << "sum lambda*gamma = " << v.certificate_gap << "  sos_ok=" << (v.sos_ok ? "yes" : "no")
      << "  residual=" << v.sos_residual << std::defaultfloat << '\n';
  const auto rows = sample_grid(v, p, grid);
  if (!out_path.empty()) {
    write_file(out_path, [&](std::ostream& f) { write_grid_csv(rows, f); });
  } else {
    write_grid_csv(rows, out);
  }
  return kOk;
}

// ------------------------------------------------------------------ bench

int cmd_bench(const std::string& suite, const std::string& out_path, int jobs, std::ostream& out) {
  if (suite != "convex" && suite != "nonconvex" && suite != "all") {
    throw InvalidFlags("--suite must be convex, nonconvex or all");
  }
  if (jobs < 1) throw InvalidFlags("--jobs must be at least 1");
  std::vector<BenchmarkCase> cases;
  for (const auto& c : benchmark_cases()) {
    if (suite == "all" || (suite == "convex") == (c.mode == SolveMode::convex_kkt)) cases.push_back(c);
  }
  std::vector<CaseResult> results(cases.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    sdp::InteriorPointSolver solver;
    for (std::size_t i = next++; i < cases.size(); i = next++) results[i] = run_case(cases[i], solver);
  };
  std::vector<std::thread> pool;
  const int n_threads = std::min<int>(jobs, static_cast<int>(cases.size()));
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  out << std::left << std::setw(8) << "case" << std::setw(14) << "mode" << std::right << std::setw(10) << "f*"
      << std::setw(14) << "f" << std::setw(11) << "|f-f*|" << std::setw(11) << "point" << std::setw(6) << "cert"
      << std::setw(11) << "ms" << "  result\n";
  bool all = true;
  for (const auto& r : results) {
    all = all && r.pass;
    out << std::left << std::setw(8) << r.id << std::setw(14) << to_string(r.mode) << std::right << std::setprecision(7) << std::setw(10)
        << r.f_star << std::setw(14);
    if (r.f_computed) {
      out << *r.f_computed;
    } else {
      out << "-";
    }
    out << std::scientific << std::setprecision(2) << std::setw(11) << r.value_err << std::setw(11) << r.point_err
        << std::defaultfloat << std::setw(6) << (r.certified ? "yes" : "no") << std::fixed << std::setprecision(0)
        << std::setw(11) << r.wall_ms << std::defaultfloat << "  " << (r.pass ? "pass" : "FAIL") << '\n';
    if (!r.pass && !r.note.empty()) out << "        " << r.note << '\n';
  }
  if (!out_path.empty()) write_file(out_path, [&](std::ostream& f) { write_results_csv(results, f); });
  return all ? kOk : kSolverFailure;
}

// ------------------------------------------------------------------- tau0

int cmd_tau0(int m, int r, int d, std::ostream& out) {
  if (m < 1 || r < 0 || d < 1) throw InvalidFlags("tau0 needs --m >= 1, --r >= 0, --d >= 1");
  const HolderEstimate e = holder_exponent(m, r, d);
  out << "R(m+r+1, d+1) = " << e.R1 << '\n'
      << "R(m+r, 2d) = " << e.R2 << '\n'
      << "tau0 = " << e.tau0_num << '/' << e.tau0_den << " = " << std::setprecision(12) << e.tau0 << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bilevel polynomial optimization via moment-SOS relaxations", "bilevel"};
  app.require_subcommand(1);

  SolveArgs sa;
  auto* solve = app.add_subcommand("solve", "Solve a bilevel problem file");
  solve->add_option("file", sa.file, "Problem file (.blv)")->required();
  solve->add_option("--mode", sa.mode, "convex-kkt or nonconvex-jm")->required();
  solve->add_option("--order", sa.order, "Highest relaxation order (convex) or J_k order (nonconvex)");
  auto* eps_opt = solve->add_option("--epsilon", sa.epsilon, "Lower-level optimality tolerance (nonconvex)");
  auto* outer_opt = solve->add_option("--max-outer", sa.max_outer, "Outer iterations of the scheme (nonconvex)");
  solve->add_option("--solver-tol", sa.solver_tol, "SDP solver tolerance");
  solve->add_option("--out", sa.out, "Report CSV");

  std::string va_file, va_out;
  int va_order = 0, va_grid = 101;
  auto* va = app.add_subcommand("value-approx", "Polynomial underestimator of the lower-level value function");
  va->add_option("file", va_file, "Problem file (.blv)")->required();
  va->add_option("--order", va_order, "Order k (degree 2k)");
  va->add_option("--grid", va_grid, "Grid points over the box");
  va->add_option("--out", va_out, "CSV output (x,Jk,Joracle)");

  std::string suite, bench_out;
  int jobs = 1;
  auto* bench = app.add_subcommand("bench", "Run the corpus benchmark");
  bench->add_option("--suite", suite, "convex, nonconvex or all")->required();
  bench->add_option("--out", bench_out, "Results CSV");
  bench->add_option("--jobs", jobs, "Parallel cases");

  int tm = 0, tr = -1, td = 0;
  auto* tau = app.add_subcommand("tau0", "Hoelder exponent estimate");
  tau->add_option("--m", tm, "Lower-level dimension")->required();
  tau->add_option("--r", tr, "Number of lower-level constraints")->required();
  tau->add_option("--d", td, "Degree bound")->required();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidFlags;
  }

  try {
    if (solve->parsed()) {
      sa.epsilon_set = eps_opt->count() > 0;
      sa.max_outer_set = outer_opt->count() > 0;
      return cmd_solve(sa, out);
    }
    if (va->parsed()) return cmd_value_approx(va_file, va_order, va_grid, va_out, out);
    if (bench->parsed()) return cmd_bench(suite, bench_out, jobs, out);
    if (tau->parsed()) return cmd_tau0(tm, tr, td, out);
  } catch (const InvalidFlags& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidFlags;
  } catch (const RelaxationOrderError& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidFlags;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kParseError;
  } catch (const SemanticError& e) {
    err << "invalid problem: " << e.what() << '\n';
    return kParseError;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kParseError;
  } catch (const std::exception& e) {
    err << "solver failure: " << e.what() << '\n';
    return kSolverFailure;
  }
  return kInvalidFlags;
}

}  // namespace bilevel::cli
