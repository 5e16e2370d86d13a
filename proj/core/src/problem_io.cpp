#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "bilevel/problem.hpp"

namespace bilevel {

namespace {

struct Line {
  int number = 0;
  std::vector<std::string> tokens;
};

std::vector<Line> tokenize(std::istream& in) {
  std::vector<Line> lines;
  std::string raw;
  int number = 0;
  while (std::getline(in, raw)) {
    ++number;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream ss(raw);
    Line line{number, {}};
    std::string tok;
    while (ss >> tok) line.tokens.push_back(tok);
    if (!line.tokens.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

double parse_real(const std::string& tok, int line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    throw ParseError(line, "expected a real number, got '" + tok + "'");
  }
  if (used != tok.size()) throw ParseError(line, "expected a real number, got '" + tok + "'");
  if (!std::isfinite(v)) throw ParseError(line, "non-finite number '" + tok + "'");
  return v;
}

int parse_int(const std::string& tok, int line) {
  std::size_t used = 0;
  long v = 0;
  try {
    v = std::stol(tok, &used);
  } catch (const std::exception&) {
    throw ParseError(line, "expected an integer, got '" + tok + "'");
  }
  if (used != tok.size()) throw ParseError(line, "expected an integer, got '" + tok + "'");
  return static_cast<int>(v);
}

enum class Section { upper_objective, upper_constraint, lower_objective, lower_constraint };

}  // namespace

BilevelProblem parse_problem(std::istream& in) {
  const auto lines = tokenize(in);
  std::size_t pos = 0;
  if (lines.empty()) throw ParseError(0, "empty problem file");

  const Line& head = lines[pos++];
  if (head.tokens.size() != 2 || head.tokens[0] != "bilevel") {
    throw ParseError(head.number, "expected header 'bilevel <version>'");
  }
  if (parse_int(head.tokens[1], head.number) != 1) {
    throw ParseError(head.number, "unsupported format version " + head.tokens[1]);
  }

  int n = -1, m = -1, s = -1, r = -1;
  std::optional<double> box_M;
  std::optional<NormBounds> bounds;
  bool have_f = false, have_G = false;
  BilevelProblem p;

  while (pos < lines.size()) {
    const Line& ln = lines[pos++];
    const std::string& key = ln.tokens[0];
    if (key == "dims") {
      if (ln.tokens.size() != 5) throw ParseError(ln.number, "expected 'dims <n> <m> <s> <r>'");
      if (n >= 0) throw ParseError(ln.number, "duplicate 'dims' line");
      n = parse_int(ln.tokens[1], ln.number);
      m = parse_int(ln.tokens[2], ln.number);
      s = parse_int(ln.tokens[3], ln.number);
      r = parse_int(ln.tokens[4], ln.number);
      if (n < 0 || m < 0 || s < 0 || r < 0) {
        throw SemanticError("line " + std::to_string(ln.number) + ": negative dimension in 'dims'");
      }
      if (m < 1) throw SemanticError("line " + std::to_string(ln.number) + ": lower level needs m >= 1");
      p.layout = VarLayout(n, m, 0);
      p.f = Polynomial(p.layout);
      p.G = Polynomial(p.layout);
      continue;
    }
    if (key == "box_M") {
      if (ln.tokens.size() != 2) throw ParseError(ln.number, "expected 'box_M <real>'");
      box_M = parse_real(ln.tokens[1], ln.number);
      continue;
    }
    if (key == "bounds") {
      if (ln.tokens.size() != 3) throw ParseError(ln.number, "expected 'bounds <N1> <N2>'");
      bounds = NormBounds{parse_real(ln.tokens[1], ln.number), parse_real(ln.tokens[2], ln.number)};
      continue;
    }

    Section sec;
    if (key == "upper_objective") {
      sec = Section::upper_objective;
    } else if (key == "upper_constraint") {
      sec = Section::upper_constraint;
    } else if (key == "lower_objective") {
      sec = Section::lower_objective;
    } else if (key == "lower_constraint") {
      sec = Section::lower_constraint;
    } else {
      throw ParseError(ln.number, "unknown keyword '" + key + "'");
    }
    if (ln.tokens.size() != 1) throw ParseError(ln.number, "unexpected tokens after '" + key + "'");
    if (n < 0) throw ParseError(ln.number, "'dims' must precede polynomial sections");

    Polynomial poly(p.layout);
    bool closed = false;
    while (pos < lines.size()) {
      const Line& t = lines[pos++];
      if (t.tokens[0] == "end") {
        if (t.tokens.size() != 1) throw ParseError(t.number, "unexpected tokens after 'end'");
        closed = true;
        break;
      }
      const std::size_t width = t.tokens.size() - 1;
      const bool y_only = sec == Section::lower_constraint && width == static_cast<std::size_t>(m);
      const std::size_t full = static_cast<std::size_t>(n + m);
      if (!y_only && width != full) {
        throw ParseError(t.number, "term has " + std::to_string(width) + " exponents, expected " +
                                       (sec == Section::lower_constraint ? std::to_string(m) + " (or " + std::to_string(full) + ")"
                                                                         : std::to_string(full)));
      }
      const double c = parse_real(t.tokens[0], t.number);
      std::vector<int> ex(full, 0);
      for (std::size_t i = 0; i < width; ++i) {
        const int e = parse_int(t.tokens[i + 1], t.number);
        if (e < 0) throw ParseError(t.number, "negative exponent");
        ex[y_only ? static_cast<std::size_t>(n) + i : i] = e;
      }
      if (sec == Section::lower_constraint && !y_only) {
        for (int i = 0; i < n; ++i) {
          if (ex[static_cast<std::size_t>(i)] != 0) {
            throw SemanticError("line " + std::to_string(t.number) + ": lower constraint depends on x");
          }
        }
      }
      poly += Polynomial::monomial(p.layout, Monomial(std::move(ex)), c);
    }
    if (!closed) throw ParseError(ln.number, "section '" + key + "' is missing 'end'");

    switch (sec) {
      case Section::upper_objective:
        if (have_f) throw ParseError(ln.number, "duplicate upper_objective");
        p.f = std::move(poly);
        have_f = true;
        break;
      case Section::lower_objective:
        if (have_G) throw ParseError(ln.number, "duplicate lower_objective");
        p.G = std::move(poly);
        have_G = true;
        break;
      case Section::upper_constraint:
        p.g.push_back(std::move(poly));
        break;
      case Section::lower_constraint:
        p.h.push_back(std::move(poly));
        break;
    }
  }

  if (n < 0) throw ParseError(0, "missing 'dims' line");
  if (!box_M) throw SemanticError("missing required 'box_M' line");
  if (!have_f) throw ParseError(0, "missing upper_objective section");
  if (!have_G) throw ParseError(0, "missing lower_objective section");
  if (p.s() != s) {
    throw SemanticError("dims declares s=" + std::to_string(s) + " upper constraints, file has " + std::to_string(p.s()));
  }
  if (p.r() != r) {
    throw SemanticError("dims declares r=" + std::to_string(r) + " lower constraints, file has " + std::to_string(p.r()));
  }
  p.box_M = *box_M;
  p.bounds = bounds;
  p.validate();
  return p;
}

BilevelProblem parse_problem(const std::string& text) {
  std::istringstream in(text);
  return parse_problem(in);
}

BilevelProblem load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(0, "cannot open problem file '" + path + "'");
  return parse_problem(in);
}

namespace {

void write_terms(std::ostream& out, const Polynomial& q, int skip_x) {
  for (const auto& [mono, c] : q.terms()) {
    out << "  " << c;
    for (std::size_t i = static_cast<std::size_t>(skip_x); i < mono.size(); ++i) out << ' ' << mono[i];
    out << '\n';
  }
  out << "end\n";
}

}  // namespace

void serialize_problem(const BilevelProblem& p, std::ostream& out) {
  const auto flags = out.flags();
  const auto prec = out.precision();
  out << std::setprecision(17);
  out << "bilevel 1\n";
  out << "dims " << p.n() << ' ' << p.m() << ' ' << p.s() << ' ' << p.r() << '\n';
  out << "box_M " << p.box_M << '\n';
  if (p.bounds) out << "bounds " << p.bounds->n1 << ' ' << p.bounds->n2 << '\n';
  out << "upper_objective\n";
  write_terms(out, p.f, 0);
  for (const auto& gi : p.g) {
    out << "upper_constraint\n";
    write_terms(out, gi, 0);
  }
  out << "lower_objective\n";
  write_terms(out, p.G, 0);
  for (const auto& hj : p.h) {
    out << "lower_constraint\n";
    write_terms(out, hj, p.n());
  }
  out.flags(flags);
  out.precision(prec);
}

std::string serialize_problem(const BilevelProblem& p) {
  std::ostringstream os;
  serialize_problem(p, os);
  return os.str();
}

}  // namespace bilevel
