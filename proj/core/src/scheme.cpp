#include "bilevel/scheme.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

namespace bilevel {

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

// ------------------------------------------------------------- hierarchy

const OrderResult* HierarchyRun::last_ok() const {
  for (auto it = orders.rbegin(); it != orders.rend(); ++it) {
    if (it->ok()) return &*it;
  }
  return nullptr;
}

const OrderResult* HierarchyRun::certified() const {
  for (const auto& o : orders) {
    if (o.certified) return &o;
  }
  return nullptr;
}

std::vector<double> natural_scale(const BilevelProblem& p, int total_vars) {
  std::vector<double> s(static_cast<std::size_t>(total_vars), 1.0);
  for (int i = 0; i < p.n() && i < total_vars; ++i) s[static_cast<std::size_t>(i)] = p.box_M;
  if (p.bounds && p.bounds->n2 > 0.0) {
    for (int j = 0; j < p.m() && p.n() + j < total_vars; ++j) s[static_cast<std::size_t>(p.n() + j)] = p.bounds->n2;
  }
  return s;
}

HierarchyRun run_hierarchy(const PolynomialProgram& p, sdp::Solver& solver, const HierarchyOptions& opts) {
  const std::vector<double> scale =
      opts.scale.empty() ? std::vector<double>(static_cast<std::size_t>(p.layout().total()), 1.0) : opts.scale;
  const ConditionedProgram cp = condition_program(p, scale);
  const int k_min = opts.k_min > 0 ? opts.k_min : minimal_order(p);
  const int k_max = std::max(k_min, opts.k_max);

  HierarchyRun run;
  for (int k = k_min; k <= k_max; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    OrderResult o;
    o.k = k;
    const MomentRelaxation r = build_relaxation(cp.program, k);
    const MomentSolution sol = solve_relaxation(r, solver);
    o.status = sol.status;
    o.near_optimal = sol.near_optimal;
    o.bound = sol.value * cp.objective_scale;
    o.primal_infeasibility = sol.raw.primal_infeasibility;
    o.dual_infeasibility = sol.raw.dual_infeasibility;
    o.relative_gap = sol.raw.relative_gap;
    o.note = sol.diagnostics;
    if (sol.ok()) {
      try {
        const ExtractionResult ex = extract_minimizers(r, sol, cp.program);
        o.certified = ex.certified;
        o.ranks = ex.ranks;
        o.flat_order = ex.flat_order;
        for (const auto& pt : ex.points) o.points.push_back(cp.to_original(pt));
        if (!ex.note.empty()) o.note += (o.note.empty() ? "" : "; ") + ex.note;
      } catch (const DegenerateMomentMatrix& e) {
        o.note += (o.note.empty() ? "" : "; ") + std::string(e.what());
      }
    }
    o.wall_ms = elapsed_ms(t0);
    run.orders.push_back(std::move(o));
    if (opts.stop_on_certificate && run.orders.back().certified) break;
  }
  return run;
}

// ----------------------------------------------------------- convex path

std::optional<double> ConvexPathReport::value() const {
  if (const auto* c = run.certified()) return c->bound;
  if (const auto* o = run.last_ok()) return o->bound;
  return std::nullopt;
}

ConvexPathReport::Split ConvexPathReport::split(const std::vector<double>& w) const {
  const VarLayout& L = kkt.layout();
  Split s;
  s.x.assign(w.begin(), w.begin() + L.n_x);
  s.y.assign(w.begin() + L.y_offset(), w.begin() + L.y_offset() + L.n_y);
  s.lambda.assign(w.begin() + L.lam_offset(), w.end());
  return s;
}

ConvexPathReport solve_convex_path(const BilevelProblem& p, int k_max, sdp::Solver& solver, int k_min) {
  ConvexPathReport rep;
  rep.kkt = reformulate(p);
  HierarchyOptions opts;
  opts.k_min = k_min;
  opts.k_max = k_max;
  opts.scale = natural_scale(p, rep.kkt.layout().total());
  rep.run = run_hierarchy(rep.kkt.program, solver, opts);
  return rep;
}

// ------------------------------------------------------- nonconvex path

EpsProblem make_eps_problem(const BilevelProblem& p, const ValuePolyApprox& v, double epsilon) {
  const VarLayout L = p.layout;
  EpsProblem ep;
  ep.epsilon = epsilon;
  ep.k = v.k;
  std::vector<Polynomial> ineq = p.g;
  for (const auto& h : p.h) ineq.push_back(h);
  ep.value_constraint = static_cast<int>(ineq.size());
  ineq.push_back(p.G - v.on_layout(L) - epsilon);
  for (int l = 0; l < p.n(); ++l) {
    const Polynomial xl = Polynomial::variable(L, l);
    ineq.push_back(xl * xl - p.box_M * p.box_M);
  }
  ep.program = PolynomialProgram(p.f, std::move(ineq), {});
  ep.scale = natural_scale(p, L.total());
  return ep;
}

const char* to_string(SetVerdict v) {
  switch (v) {
    case SetVerdict::nonempty_witness:
      return "nonempty-witness";
    case SetVerdict::certified_empty:
      return "certified-empty";
    case SetVerdict::unknown:
      return "unknown";
  }
  return "unknown";
}

namespace {

/// Grid minimizer of G(x, .) over the lower feasible set.
std::optional<std::vector<double>> lower_argmin(const BilevelProblem& p, std::span<const double> x, int grid) {
  const int n = p.n();
  const int m = p.m();
  const double n2 = p.bounds->n2;
  const double step = 2.0 * n2 / (grid - 1);
  std::vector<double> w(static_cast<std::size_t>(n + m));
  std::copy(x.begin(), x.end(), w.begin());
  std::vector<int> idx(static_cast<std::size_t>(m), 0);
  double best = std::numeric_limits<double>::infinity();
  std::optional<std::vector<double>> arg;
  while (true) {
    for (int j = 0; j < m; ++j) w[static_cast<std::size_t>(n + j)] = -n2 + step * idx[static_cast<std::size_t>(j)];
    bool ok = true;
    for (const auto& hj : p.h) ok = ok && hj.eval(w) <= kFeasibilityTol;
    if (ok) {
      const double gv = p.G.eval(w);
      if (gv < best) {
        best = gv;
        arg = std::vector<double>(w.begin() + n, w.end());
      }
    }
    int j = 0;
    while (j < m && ++idx[static_cast<std::size_t>(j)] == grid) idx[static_cast<std::size_t>(j++)] = 0;
    if (j == m) break;
  }
  return arg;
}

}  // namespace

FeasibilityVerdict step2_feasibility(const EpsProblem& ep, int k_check, sdp::Solver& solver,
                                     const BilevelProblem* source, const WitnessOptions& opts) {
  FeasibilityVerdict out;
  const PolynomialProgram& prog = ep.program;
  const int v = prog.layout().total();
  const std::vector<double> scale =
      ep.scale.empty() ? std::vector<double>(static_cast<std::size_t>(v), 1.0) : ep.scale;

  auto accept = [&](const std::vector<double>& w) {
    if (!prog.is_feasible(w, opts.tol)) return false;
    out.verdict = SetVerdict::nonempty_witness;
    out.witness = w;
    return true;
  };

  if (prog.ineq().empty() && prog.eq().empty()) {
    accept(std::vector<double>(static_cast<std::size_t>(v), 0.0));
    out.diagnostics = "no constraints";
    return out;
  }

  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<double> w(static_cast<std::size_t>(v));
  for (int s = 0; s < opts.samples; ++s) {
    for (int i = 0; i < v; ++i) w[static_cast<std::size_t>(i)] = scale[static_cast<std::size_t>(i)] * unif(rng);
    if (accept(w)) {
      out.diagnostics = "random sample";
      return out;
    }
  }

  // Points on the graph of the lower-level solution map satisfy the value
  // constraint whenever J - J_k <= eps there.
  if (source && source->bounds && source->n() <= 2) {
    const int n = source->n();
    const int per_axis = n == 1 ? opts.grid : std::max(2, static_cast<int>(std::sqrt(static_cast<double>(opts.grid))) * 3);
    const int lower_grid = default_oracle_grid(source->m());
    std::vector<int> idx(static_cast<std::size_t>(n), 0);
    std::vector<double> x(static_cast<std::size_t>(n));
    const double M = source->box_M;
    while (true) {
      for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = -M + 2.0 * M * idx[static_cast<std::size_t>(i)] / (per_axis - 1);
      if (auto y = lower_argmin(*source, x, lower_grid)) {
        if (accept(join_xy(x, *y))) {
          out.diagnostics = "lower-level argmin candidate";
          return out;
        }
      }
      int i = 0;
      while (i < n && ++idx[static_cast<std::size_t>(i)] == per_axis) idx[static_cast<std::size_t>(i++)] = 0;
      if (i == n) break;
    }
  }

  try {
    const ConditionedProgram cp = condition_program(prog, scale);
    const MomentRelaxation r = build_relaxation(cp.program, std::max(k_check, minimal_order(cp.program)));
    const sdp::FeasibilityResult fr = solver.check_feasibility(r.to_sdp());
    out.margin = fr.margin;
    out.diagnostics = fr.diagnostics;
    if (fr.verdict == sdp::Feasibility::infeasible) out.verdict = SetVerdict::certified_empty;
  } catch (const std::exception& e) {
    out.diagnostics = e.what();
  }
  return out;
}

SchemeState run_algorithm_4_5(const BilevelProblem& p, double epsilon, sdp::Solver& solver,
                              const SchemeOptions& opts) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  SchemeState st;
  st.epsilon = epsilon;
  const int k0 = value_order_min(p);
  const int k_start = std::max(k0, opts.k_start);
  const int k_max = std::max(k_start, opts.k_max);
  int stable = 0;
  bool any_nonempty = false;

  for (int k = k_start; k <= k_max; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    st.k = k;
    SchemeIteration it;
    it.k = k;

    // Step 1: value-function underestimator.
    const ValuePolyApprox va = approximate_value_function(p, k, solver);
    it.certificate_gap = va.certificate_gap;
    it.eps_k = va.eps_k;
    it.sos_ok = va.sos_ok;
    it.Jk = va.Jk;

    // Step 2: is S_k empty?
    const EpsProblem ep = make_eps_problem(p, va, epsilon);
    const int k_min = minimal_order(ep.program);
    const FeasibilityVerdict fv = step2_feasibility(ep, k_min, solver, &p, opts.witness);
    it.verdict = fv.verdict;
    if (fv.verdict == SetVerdict::certified_empty) {
      it.note = "S_k empty; next k";
      it.wall_ms = elapsed_ms(t0);
      st.history.push_back(std::move(it));
      st.v_trace.push_back(st.v_best);
      continue;
    }
    any_nonempty = any_nonempty || fv.verdict == SetVerdict::nonempty_witness;
    if (fv.verdict == SetVerdict::unknown) it.note = "S_k undecided; solving anyway";

    // Step 3: solve (P_eps^k).
    HierarchyOptions ho;
    ho.k_min = k_min;
    ho.k_max = opts.inner_order > 0 ? std::max(k_min, opts.inner_order) : k_min + 2;
    ho.scale = ep.scale;
    const HierarchyRun run = run_hierarchy(ep.program, solver, ho);
    const OrderResult* used = run.certified();
    if (!used) used = run.last_ok();
    if (used) {
      it.inner_order = used->k;
      it.value = used->bound;
      it.certified = used->certified;
      if (!used->points.empty()) {
        // Among several atoms keep the one with the smallest objective.
        const auto best = std::min_element(used->points.begin(), used->points.end(), [&](const auto& a, const auto& b) {
          return p.f.eval(a) < p.f.eval(b);
        });
        it.point = *best;
      }
      if (!used->note.empty()) it.note += (it.note.empty() ? "" : "; ") + used->note;
    } else {
      it.inner_order = ho.k_max;
      it.note += (it.note.empty() ? "" : "; ") + std::string("inner hierarchy failed");
      if (!run.orders.empty()) it.note += ": " + run.orders.back().note;
    }

    // Step 4: running minimum.
    const std::optional<double> prev = st.v_best;
    if (it.value && (!st.v_best || *it.value < *st.v_best)) {
      st.v_best = it.value;
      st.best_point = it.point;
      st.best_certified = it.certified;
    }
    it.wall_ms = elapsed_ms(t0);
    st.history.push_back(std::move(it));
    st.v_trace.push_back(st.v_best);

    if (prev && st.v_best && std::abs(*st.v_best - *prev) <= opts.stable_tol) {
      if (++stable >= 2) {
        st.stop_reason = "v_best stable over two iterations";
        break;
      }
    } else {
      stable = 0;
    }
  }
  if (st.stop_reason.empty()) st.stop_reason = "reached k_max";
  if (!any_nonempty && !st.v_best) {
    st.no_progress = true;
    st.stop_reason = "no nonempty S_k up to k_max";
  }
  return st;
}

void write_run_log(const SchemeState& s, std::ostream& out) {
  std::ostringstream buf;
  buf << std::setprecision(17);
  buf << "k,sum_lambda_gamma,verdict,val,v_best\n";
  for (std::size_t i = 0; i < s.history.size(); ++i) {
    const auto& it = s.history[i];
    buf << it.k << ',' << it.certificate_gap << ',' << to_string(it.verdict) << ',';
    if (it.value) buf << *it.value;
    buf << ',';
    if (i < s.v_trace.size() && s.v_trace[i]) buf << *s.v_trace[i];
    buf << '\n';
  }
  out << buf.str();
}

// ------------------------------------------------------------ validation

ValidationReport validate_solution(const BilevelProblem& p, std::span<const double> x, std::span<const double> y,
                                   double epsilon, double tol, int oracle_grid) {
  if (x.size() != static_cast<std::size_t>(p.n()) || y.size() != static_cast<std::size_t>(p.m())) {
    throw StructuralError("validate_solution: point dimensions do not match the problem");
  }
  ValidationReport rep;
  const std::vector<double> w = join_xy(x, y);
  for (std::size_t i = 0; i < p.g.size(); ++i) {
    rep.g.push_back(p.g[i].eval(w));
    if (rep.g.back() > tol) rep.violated_g.push_back(static_cast<int>(i));
  }
  for (std::size_t j = 0; j < p.h.size(); ++j) {
    rep.h.push_back(p.h[j].eval(w));
    if (rep.h.back() > tol) rep.violated_h.push_back(static_cast<int>(j));
  }
  const int grid = oracle_grid > 0 ? oracle_grid : default_oracle_grid(p.m());
  rep.lower_value = lower_value_oracle(p, x, grid);
  rep.lower_gap = p.G.eval(w) - rep.lower_value;
  rep.lower_ok = rep.lower_gap <= epsilon + tol;
  rep.ok = rep.violated_g.empty() && rep.violated_h.empty() && rep.lower_ok;
  return rep;
}

}  // namespace bilevel
