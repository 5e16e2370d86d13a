#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"

namespace fs = std::filesystem;

namespace {

std::string corpus(const char* name) { return std::string(BILEVEL_CORPUS_DIR) + "/" + name; }

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = bilevel::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const char* name) {
  const auto dir = fs::temp_directory_path() / "bilevel_cli_test";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> v;
  for (std::string l; std::getline(in, l);) v.push_back(l);
  return v;
}

}  // namespace

TEST_CASE("tau0") {
  auto r = run({"tau0", "--m", "1", "--r", "1", "--d", "4"});
  CHECK(r.code == 0);
  CHECK(r.out.find("tau0 = 1/84") != std::string::npos);
  CHECK(r.out.find("720") != std::string::npos);
  CHECK(r.out.find("168") != std::string::npos);
  CHECK(run({"tau0", "--m", "1", "--r", "0", "--d", "1"}).out.find("tau0 = 1/1") != std::string::npos);
  CHECK(run({"tau0", "--m", "2", "--r", "1", "--d", "2"}).out.find("tau0 = 1/162") != std::string::npos);
  CHECK(run({"tau0", "--m", "0", "--r", "1", "--d", "2"}).code == 4);
  CHECK(run({"tau0", "--m", "1", "--r", "1"}).code == 4);
}

TEST_CASE("flag validation") {
  CHECK(run({}).code == 4);
  CHECK(run({"frobnicate"}).code == 4);
  CHECK(run({"solve", corpus("ex5_1.blv"), "--mode", "convex-kkt", "--epsilon", "0.1"}).code == 4);
  CHECK(run({"solve", corpus("ex5_1.blv"), "--mode", "convex-kkt", "--max-outer", "2"}).code == 4);
  CHECK(run({"solve", corpus("ex5_1.blv"), "--mode", "sideways"}).code == 4);
  CHECK(run({"solve", corpus("ex5_1.blv"), "--mode", "convex-kkt", "--solver-tol", "0"}).code == 4);
  CHECK(run({"solve", corpus("ex3_7.blv"), "--mode", "convex-kkt", "--order", "2"}).code == 4);
  CHECK(run({"solve", corpus("ex4_8.blv"), "--mode", "nonconvex-jm", "--epsilon", "-1"}).code == 4);
  CHECK(run({"solve", corpus("ex4_8.blv"), "--mode", "nonconvex-jm", "--order", "1"}).code == 4);
  CHECK(run({"bench", "--suite", ""}).code == 4);
  CHECK(run({"bench", "--suite", "tables"}).code == 4);
  CHECK(run({"value-approx", corpus("ex4_8.blv"), "--grid", "1"}).code == 4);
  CHECK(run({"solve", "--help"}).code == 0);
}

TEST_CASE("parse and I/O errors") {
  CHECK(run({"solve", "/nonexistent.blv", "--mode", "convex-kkt"}).code == 2);
  const auto bad = scratch("bad.blv");
  std::ofstream(bad) << "bilevel 1\ndims 1 1 0 0\nbox_M one\n";
  CHECK(run({"solve", bad.string(), "--mode", "convex-kkt"}).code == 2);
  CHECK(run({"value-approx", bad.string()}).code == 2);
  CHECK(run({"solve", corpus("ex5_1.blv"), "--mode", "convex-kkt", "--out", "/nonexistent/dir/r.csv"}).code == 2);
}

TEST_CASE("solver failure on an infeasible program") {
  const auto f = scratch("infeasible.blv");
  std::ofstream(f) << "bilevel 1\ndims 1 1 1 1\nbox_M 1\nbounds 1 1\n"
                      "upper_objective\n  1 1 0\nend\nupper_constraint\n  1 2 0\n  1 0 0\nend\n"
                      "lower_objective\n  1 0 2\nend\nlower_constraint\n  1 2\n  -1 0\nend\n";
  const auto r = run({"solve", f.string(), "--mode", "convex-kkt", "--order", "3"});
  CHECK(r.code == 3);
}

TEST_CASE("convex solve") {
  const auto out = scratch("report.csv");
  const auto r = run({"solve", corpus("ex5_1.blv"), "--mode", "convex-kkt", "--order", "2", "--out", out.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("f = 9.0000") != std::string::npos);
  CHECK(r.out.find("certified global minimum") != std::string::npos);
  CHECK(r.out.find("[pass]") != std::string::npos);
  const auto rows = lines_of(out);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].rfind("k,status,", 0) == 0);
}

TEST_CASE("nonconvex solve") {
  const auto out = scratch("log.csv");
  const auto r = run({"solve", corpus("ex4_8.blv"), "--mode", "nonconvex-jm", "--epsilon", "0.001", "--order", "3",
                      "--out", out.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("v_eps = -0.0004") != std::string::npos);
  const auto rows = lines_of(out);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == "k,sum_lambda_gamma,verdict,val,v_best");
  CHECK(rows[1].find("nonempty-witness") != std::string::npos);
}

TEST_CASE("value-approx output") {
  const auto out = scratch("jk.csv");
  REQUIRE(run({"value-approx", corpus("ex4_8.blv"), "--order", "3", "--grid", "101", "--out", out.string()}).code == 0);
  auto rows = lines_of(out);
  REQUIRE(rows.size() == 102);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::istringstream in(rows[i]);
    double x, jk, jo;
    char c;
    in >> x >> c >> jk >> c >> jo;
    CHECK(jk <= jo + 1e-5);
  }
  REQUIRE(run({"value-approx", corpus("ex4_8.blv"), "--order", "3", "--grid", "2", "--out", out.string()}).code == 0);
  CHECK(lines_of(out).size() == 3);

  const auto r = run({"value-approx", corpus("const_g.blv"), "--order", "2", "--grid", "5", "--out", out.string()});
  REQUIRE(r.code == 0);
  rows = lines_of(out);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto a = rows[i].find(','), b = rows[i].find(',', a + 1);
    CHECK(std::stod(rows[i].substr(a + 1, b - a - 1)) == doctest::Approx(2.0).epsilon(1e-6));
  }
}

TEST_CASE("convex bench") {
  const auto out = scratch("results.csv");
  const auto r = run({"bench", "--suite", "convex", "--jobs", "3", "--out", out.string()});
  CHECK(r.code == 0);
  const auto rows = lines_of(out);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == "case,mode,f_star,f_computed,value_err,point_err,certified,wall_ms");
  CHECK(rows[1].rfind("ex5_1,convex-kkt,9,", 0) == 0);
}
