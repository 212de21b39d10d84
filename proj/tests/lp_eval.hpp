#pragma once

// Test-side LP-format parser and evaluator. Deliberately independent of the
// model writer: it re-reads the exported text and checks assignments against
// the parsed rows, so the export is validated end to end.

#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lptest {

struct LinearExpr {
  std::map<std::string, double> terms;

  double eval(const std::map<std::string, double>& assignment) const {
    double sum = 0.0;
    for (const auto& [var, coeff] : terms) {
      const auto it = assignment.find(var);
      if (it == assignment.end()) throw std::runtime_error("unassigned variable " + var);
      sum += coeff * it->second;
    }
    return sum;
  }
};

struct Constraint {
  std::string name;
  LinearExpr expr;
  std::string sense;  // "<=", ">=", "="
  double rhs = 0.0;

  bool satisfied(const std::map<std::string, double>& assignment, double tol = 1e-9) const {
    const double lhs = expr.eval(assignment);
    if (sense == "<=") return lhs <= rhs + tol;
    if (sense == ">=") return lhs >= rhs - tol;
    return std::abs(lhs - rhs) <= tol;
  }
};

struct LpModel {
  LinearExpr objective;
  std::vector<Constraint> constraints;
  std::map<std::string, std::pair<double, double>> bounds;
  std::set<std::string> binaries;
  std::set<std::string> variables;

  bool feasible(const std::map<std::string, double>& assignment, double tol = 1e-9) const {
    for (const Constraint& c : constraints)
      if (!c.satisfied(assignment, tol)) return false;
    for (const auto& [var, range] : bounds) {
      const auto it = assignment.find(var);
      if (it == assignment.end()) throw std::runtime_error("unassigned variable " + var);
      if (it->second < range.first - tol || it->second > range.second + tol) return false;
    }
    for (const std::string& var : binaries) {
      const auto it = assignment.find(var);
      if (it == assignment.end()) throw std::runtime_error("unassigned binary " + var);
      if (std::abs(it->second) > tol && std::abs(it->second - 1.0) > tol) return false;
    }
    return true;
  }
};

inline LinearExpr parse_expr(const std::string& text) {
  LinearExpr expr;
  std::istringstream in(text);
  std::string sign;
  while (in >> sign) {
    double coeff = 0.0;
    std::string var;
    if (sign == "+" || sign == "-") {
      if (!(in >> coeff >> var)) throw std::runtime_error("malformed term near '" + sign + "'");
      if (sign == "-") coeff = -coeff;
    } else {
      // leading unsigned term: "<coeff> <var>"
      coeff = std::stod(sign);
      if (!(in >> var)) throw std::runtime_error("malformed leading term");
    }
    expr.terms[var] += coeff;
  }
  return expr;
}

inline Constraint parse_constraint(const std::string& text) {
  const std::size_t colon = text.find(':');
  if (colon == std::string::npos) throw std::runtime_error("constraint without name: " + text);
  Constraint c;
  c.name = text.substr(0, colon);
  while (!c.name.empty() && c.name.front() == ' ') c.name.erase(c.name.begin());
  const std::string body = text.substr(colon + 1);
  std::size_t pos = body.find("<=");
  c.sense = "<=";
  if (pos == std::string::npos) {
    pos = body.find(">=");
    c.sense = ">=";
  }
  if (pos == std::string::npos) {
    pos = body.find('=');
    c.sense = "=";
  }
  if (pos == std::string::npos) throw std::runtime_error("constraint without sense: " + text);
  c.expr = parse_expr(body.substr(0, pos));
  c.rhs = std::stod(body.substr(pos + c.sense.size()));
  return c;
}

inline LpModel parse_lp(const std::string& text) {
  LpModel model;
  enum class Section { kNone, kObjective, kConstraints, kBounds, kBinary, kEnd };
  Section section = Section::kNone;
  std::string objective_text;
  // Rows may wrap onto continuation lines; a new row starts at a line with a
  // name marker ':'.
  std::vector<std::string> constraint_texts;

  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty() || line[0] == '\\') continue;
    if (line == "Maximize") {
      section = Section::kObjective;
      continue;
    }
    if (line == "Subject To") {
      section = Section::kConstraints;
      continue;
    }
    if (line == "Bounds") {
      section = Section::kBounds;
      continue;
    }
    if (line == "Binary") {
      section = Section::kBinary;
      continue;
    }
    if (line == "End") {
      section = Section::kEnd;
      continue;
    }
    switch (section) {
      case Section::kObjective:
        objective_text += " " + line;
        break;
      case Section::kConstraints:
        if (line.find(':') != std::string::npos)
          constraint_texts.push_back(line);
        else if (!constraint_texts.empty())
          constraint_texts.back() += " " + line;
        else
          throw std::runtime_error("continuation before any constraint: " + line);
        break;
      case Section::kBounds: {
        std::istringstream in(line);
        double lo = 0.0, hi = 0.0;
        std::string le1, le2, var;
        if (!(in >> lo >> le1 >> var >> le2 >> hi) || le1 != "<=" || le2 != "<=")
          throw std::runtime_error("malformed bound: " + line);
        model.bounds[var] = {lo, hi};
        model.variables.insert(var);
        break;
      }
      case Section::kBinary: {
        std::istringstream in(line);
        std::string var;
        while (in >> var) {
          model.binaries.insert(var);
          model.variables.insert(var);
        }
        break;
      }
      default:
        throw std::runtime_error("unexpected content outside sections: " + line);
    }
  }
  for (const std::string& ct : constraint_texts) {
    Constraint c = parse_constraint(ct);
    for (const auto& [var, coeff] : c.expr.terms) model.variables.insert(var);
    model.constraints.push_back(std::move(c));
  }
  const std::size_t colon = objective_text.find(':');
  if (colon == std::string::npos) throw std::runtime_error("objective missing");
  model.objective = parse_expr(objective_text.substr(colon + 1));
  for (const auto& [var, coeff] : model.objective.terms) model.variables.insert(var);
  return model;
}

}  // namespace lptest
