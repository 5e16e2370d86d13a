#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bilevel/scheme.hpp"

namespace bilevel {

enum class SolveMode { convex_kkt, nonconvex_jm };

const char* to_string(SolveMode m);
/// Accepts "convex-kkt" and "nonconvex-jm".
std::optional<SolveMode> parse_mode(const std::string& s);

struct BenchmarkCase {
  std::string id;
  std::string file;  ///< relative to the corpus directory
  SolveMode mode = SolveMode::convex_kkt;
  double f_star = 0.0;
  std::vector<std::vector<double>> minimizers;  ///< known (x, y) points
  /// Every known minimizer must be recovered (otherwise any one suffices).
  bool all_minimizers = false;
  /// When set, x only has to lie in [x_lo, x_hi] (widened by point_tol) and
  /// the point check applies to y alone.
  std::optional<std::pair<double, double>> x_interval;
  double value_tol = 1e-3;
  double point_tol = 1e-2;
  double epsilon = 0.0;  ///< nonconvex only
  int k_start = 0;       ///< 0: minimal order
  int k_max = 0;
};

/// Table of the corpus cases (convex first, then nonconvex).
const std::vector<BenchmarkCase>& benchmark_cases();

/// Directory holding the .blv files: $BILEVEL_CORPUS_DIR if set, else the
/// source tree location recorded at build time.
std::string corpus_dir();
std::string corpus_path(const std::string& file);

struct CaseResult {
  std::string id;
  SolveMode mode = SolveMode::convex_kkt;
  double f_star = 0.0;
  std::optional<double> f_computed;
  double value_err = 0.0;
  double point_err = 0.0;
  bool certified = false;
  double wall_ms = 0.0;
  bool pass = false;
  std::vector<std::vector<double>> points;  ///< computed (x, y)
  std::string note;
};

/// Distance of the computed points to the known minimizers under the case's
/// matching rule.
double point_error(const BenchmarkCase& c, const std::vector<std::vector<double>>& points);

/// Runs one case with its own settings; never throws for solver trouble
/// (the failure is recorded in the result).
CaseResult run_case(const BenchmarkCase& c, sdp::Solver& solver);

/// case,mode,f_star,f_computed,value_err,point_err,certified,wall_ms
void write_results_csv(const std::vector<CaseResult>& rows, std::ostream& out);

}  // namespace bilevel
