#include "bilevel/sdp.hpp"

#include <limits>
#include <stdexcept>

namespace bilevel::sdp {

void Problem::validate() const {
  if (num_vars < 0) throw std::invalid_argument("sdp::Problem: negative variable count");
  auto check_var = [this](int v, const char* where) {
    if (v < 0 || v >= num_vars) {
      throw std::invalid_argument(std::string("sdp::Problem: variable index out of range in ") + where);
    }
  };
  for (const auto& [v, c] : objective) check_var(v, "objective");
  for (const auto& b : blocks) {
    if (b.size <= 0) throw std::invalid_argument("sdp::Problem: empty block");
    for (const auto& t : b.terms) {
      if (t.var >= num_vars) throw std::invalid_argument("sdp::Problem: block term variable out of range");
      if (t.row < 0 || t.col < 0 || t.row >= b.size || t.col >= b.size) {
        throw std::invalid_argument("sdp::Problem: block entry outside the block");
      }
    }
  }
  for (const auto& e : equalities) {
    for (const auto& [v, c] : e.coeffs) check_var(v, "equality");
  }
}

Eigen::MatrixXd evaluate_block(const LmiBlock& block, const Eigen::VectorXd& z) {
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(block.size, block.size);
  for (const auto& t : block.terms) {
    const double v = t.var < 0 ? t.value : t.value * z[t.var];
    M(t.row, t.col) += v;
    if (t.row != t.col) M(t.col, t.row) += v;
  }
  return M;
}

const char* to_string(Status s) {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::unbounded: return "unbounded";
    case Status::numerical_failure: return "numerical-failure";
  }
  return "?";
}

const char* to_string(Feasibility f) {
  switch (f) {
    case Feasibility::feasible: return "feasible";
    case Feasibility::infeasible: return "infeasible";
    case Feasibility::unknown: return "unknown";
  }
  return "?";
}

Problem phase_one_problem(const Problem& problem) {
  Problem p1;
  const int s = problem.num_vars;
  p1.num_vars = s + 1;
  p1.objective = {{s, 1.0}};
  p1.equalities = problem.equalities;
  p1.blocks = problem.blocks;
  for (auto& b : p1.blocks) {
    for (int i = 0; i < b.size; ++i) b.terms.push_back({s, i, i, 1.0});
  }
  LmiBlock floor;
  floor.size = 1;
  floor.terms = {{-1, 0, 0, 1.0}, {s, 0, 0, 1.0}};
  p1.blocks.push_back(std::move(floor));
  return p1;
}

FeasibilityResult Solver::check_feasibility(const Problem& problem) {
  FeasibilityResult res;
  const Solution sol = solve(phase_one_problem(problem));
  res.diagnostics = sol.diagnostics;
  if (sol.status == Status::infeasible) {
    // Only the linear equalities can make the phase-1 problem infeasible.
    res.verdict = Feasibility::infeasible;
    res.margin = std::numeric_limits<double>::infinity();
    return res;
  }
  if (sol.status != Status::optimal) {
    res.verdict = Feasibility::unknown;
    return res;
  }
  res.margin = sol.z[problem.num_vars];
  res.verdict = res.margin > infeasibility_margin ? Feasibility::infeasible : Feasibility::feasible;
  return res;
}

}  // namespace bilevel::sdp
