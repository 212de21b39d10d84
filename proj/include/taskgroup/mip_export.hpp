#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "taskgroup/gain_matrix.hpp"
#include "taskgroup/grouping.hpp"

namespace taskgroup {

namespace mip_detail {

inline std::string num(double v) { return detail::format_double(v); }

// Accumulates "name: a x + b y <sense> rhs" rows with soft line wrapping.
class LpWriter {
 public:
  void begin_objective() { out_ << "Maximize\n obj:"; terms_ = 0; }

  void term(double coeff, const std::string& var) {
    if (terms_ > 0 && terms_ % 8 == 0) out_ << "\n   ";
    if (coeff >= 0.0)
      out_ << " + " << num(coeff) << ' ' << var;
    else
      out_ << " - " << num(-coeff) << ' ' << var;
    ++terms_;
  }

  void begin_constraints() {
    if (terms_ == 0) out_ << " 0 x_0_0";
    out_ << "\nSubject To\n";
  }

  void row_start(const std::string& name) {
    out_ << ' ' << name << ':';
    terms_ = 0;
  }

  void row_end(const std::string& sense, double rhs) {
    out_ << ' ' << sense << ' ' << num(rhs) << '\n';
  }

  void bound(double lo, const std::string& var, double hi) {
    out_ << ' ' << num(lo) << " <= " << var << " <= " << num(hi) << '\n';
  }

  void raw(const std::string& text) { out_ << text; }

  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
  int terms_ = 0;
};

}  // namespace mip_detail

// Write the grouping problem as a standalone MILP in LP text format.
//
// The quadratic objective is linearized with binaries z_i_j_k = x_i_j * x_k_j
// and group-size indicator binaries u_j_s (sum_s u_j_s = 1 and
// sum_i x_i_j = sum_s s u_j_s), which define the continuous reciprocal size
// y_j = sum_s u_j_s / s. The remaining bilinear products y_j * z_i_j_k become
// continuous variables v_i_j_k under exact McCormick envelopes (exact because
// z is binary), and the pairwise-distinct-columns condition is expanded over
// binaries with products p_i_j1_j2 = x_i_j1 * x_i_j2.
inline std::string mip_model_text(const GroupingProblem& problem) {
  validate(problem);
  const int n = problem.gains.size();
  const int m = problem.num_groups;
  const std::vector<int> mins = resolved_min_sizes(problem);
  const std::vector<int> maxs = resolved_max_sizes(problem);

  auto xv = [](int i, int j) { return "x_" + std::to_string(i) + "_" + std::to_string(j); };
  auto zv = [](int i, int j, int k) {
    return "z_" + std::to_string(i) + "_" + std::to_string(j) + "_" + std::to_string(k);
  };
  auto vv = [](int i, int j, int k) {
    return "v_" + std::to_string(i) + "_" + std::to_string(j) + "_" + std::to_string(k);
  };
  auto uv = [](int j, int s) { return "u_" + std::to_string(j) + "_" + std::to_string(s); };
  auto yv = [](int j) { return "y_" + std::to_string(j); };
  auto pv = [](int i, int j1, int j2) {
    return "p_" + std::to_string(i) + "_" + std::to_string(j1) + "_" + std::to_string(j2);
  };

  mip_detail::LpWriter w;
  w.raw("\\ task grouping model: n=" + std::to_string(n) + " m=" + std::to_string(m) +
        " mode=" + (problem.mode == AssignMode::kCover ? std::string("cover") : std::string("partition")) +
        "\n");

  w.begin_objective();
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k)
        if (problem.gains.values(i, k) != 0.0) w.term(problem.gains.values(i, k), vv(i, j, k));
  w.begin_constraints();

  // Coverage / partition per task.
  for (int i = 0; i < n; ++i) {
    w.row_start("cover_" + std::to_string(i));
    for (int j = 0; j < m; ++j) w.term(1.0, xv(i, j));
    w.row_end(problem.mode == AssignMode::kPartition ? "=" : ">=", 1.0);
  }

  // Non-empty groups.
  for (int j = 0; j < m; ++j) {
    w.row_start("nonempty_" + std::to_string(j));
    for (int i = 0; i < n; ++i) w.term(1.0, xv(i, j));
    w.row_end(">=", 1.0);
  }

  if (problem.budget) {
    for (int j = 0; j < m; ++j) {
      w.row_start("budget_" + std::to_string(j));
      for (int i = 0; i < n; ++i)
        if (problem.budget->per_task(i, j) != 0.0) w.term(problem.budget->per_task(i, j), xv(i, j));
      w.row_end("<=", problem.budget->caps(j));
    }
  }

  // z_i_j_k = x_i_j * x_k_j.
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < n; ++k) {
        const std::string z = zv(i, j, k);
        w.row_start("zub1_" + std::to_string(i) + "_" + std::to_string(j) + "_" + std::to_string(k));
        w.term(1.0, z);
        w.term(-1.0, xv(i, j));
        w.row_end("<=", 0.0);
        w.row_start("zub2_" + std::to_string(i) + "_" + std::to_string(j) + "_" + std::to_string(k));
        w.term(1.0, z);
        w.term(-1.0, xv(k, j));
        w.row_end("<=", 0.0);
        w.row_start("zlb_" + std::to_string(i) + "_" + std::to_string(j) + "_" + std::to_string(k));
        w.term(1.0, z);
        w.term(-1.0, xv(i, j));
        w.term(-1.0, xv(k, j));
        w.row_end(">=", -1.0);
      }
    }
  }

  // Group-size indicators and reciprocal size.
  for (int j = 0; j < m; ++j) {
    w.row_start("usum_" + std::to_string(j));
    for (int s = mins[j]; s <= maxs[j]; ++s) w.term(1.0, uv(j, s));
    w.row_end("=", 1.0);

    w.row_start("usize_" + std::to_string(j));
    for (int i = 0; i < n; ++i) w.term(1.0, xv(i, j));
    for (int s = mins[j]; s <= maxs[j]; ++s) w.term(-static_cast<double>(s), uv(j, s));
    w.row_end("=", 0.0);

    w.row_start("ydef_" + std::to_string(j));
    w.term(1.0, yv(j));
    for (int s = mins[j]; s <= maxs[j]; ++s) w.term(-1.0 / static_cast<double>(s), uv(j, s));
    w.row_end("=", 0.0);
  }

  // v_i_j_k = y_j * z_i_j_k via McCormick envelopes over y_j in [lo_j, hi_j];
  // exact because z is binary.
  for (int j = 0; j < m; ++j) {
    const double lo = 1.0 / static_cast<double>(maxs[j]);
    const double hi = 1.0 / static_cast<double>(mins[j]);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < n; ++k) {
        const std::string tag = std::to_string(i) + "_" + std::to_string(j) + "_" + std::to_string(k);
        const std::string v = vv(i, j, k);
        const std::string z = zv(i, j, k);
        w.row_start("vub1_" + tag);
        w.term(1.0, v);
        w.term(-hi, z);
        w.row_end("<=", 0.0);
        w.row_start("vlb1_" + tag);
        w.term(1.0, v);
        w.term(-lo, z);
        w.row_end(">=", 0.0);
        w.row_start("vub2_" + tag);
        w.term(1.0, v);
        w.term(-1.0, yv(j));
        w.term(-lo, z);
        w.row_end("<=", -lo);
        w.row_start("vlb2_" + tag);
        w.term(1.0, v);
        w.term(-1.0, yv(j));
        w.term(-hi, z);
        w.row_end(">=", -hi);
      }
    }
  }

  // Pairwise distinct columns: ||X_j1 - X_j2||^2 >= 1 expanded over binaries
  // (x^2 = x) with products p = x_i_j1 * x_i_j2.
  for (int j1 = 0; j1 < m; ++j1) {
    for (int j2 = j1 + 1; j2 < m; ++j2) {
      for (int i = 0; i < n; ++i) {
        const std::string tag = std::to_string(i) + "_" + std::to_string(j1) + "_" + std::to_string(j2);
        const std::string p = pv(i, j1, j2);
        w.row_start("pub1_" + tag);
        w.term(1.0, p);
        w.term(-1.0, xv(i, j1));
        w.row_end("<=", 0.0);
        w.row_start("pub2_" + tag);
        w.term(1.0, p);
        w.term(-1.0, xv(i, j2));
        w.row_end("<=", 0.0);
        w.row_start("plb_" + tag);
        w.term(1.0, p);
        w.term(-1.0, xv(i, j1));
        w.term(-1.0, xv(i, j2));
        w.row_end(">=", -1.0);
      }
      w.row_start("dist_" + std::to_string(j1) + "_" + std::to_string(j2));
      for (int i = 0; i < n; ++i) {
        w.term(1.0, xv(i, j1));
        w.term(1.0, xv(i, j2));
        w.term(-2.0, pv(i, j1, j2));
      }
      w.row_end(">=", 1.0);
    }
  }

  w.raw("Bounds\n");
  for (int j = 0; j < m; ++j) {
    const double lo = 1.0 / static_cast<double>(maxs[j]);
    const double hi = 1.0 / static_cast<double>(mins[j]);
    w.bound(lo, yv(j), hi);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) w.bound(0.0, vv(i, j, k), hi);
  }
  for (int j1 = 0; j1 < m; ++j1)
    for (int j2 = j1 + 1; j2 < m; ++j2)
      for (int i = 0; i < n; ++i) w.bound(0.0, pv(i, j1, j2), 1.0);

  w.raw("Binary\n");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) w.raw(" " + xv(i, j) + "\n");
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) w.raw(" " + zv(i, j, k) + "\n");
  for (int j = 0; j < m; ++j)
    for (int s = mins[j]; s <= maxs[j]; ++s) w.raw(" " + uv(j, s) + "\n");
  w.raw("End\n");
  return w.str();
}

inline void export_mip(const GroupingProblem& problem, const std::string& path) {
  const std::string text = mip_model_text(problem);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("export_mip: cannot open " + path);
  out << text;
  if (!out) throw std::runtime_error("export_mip: write failed for " + path);
}

}  // namespace taskgroup
