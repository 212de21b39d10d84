#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "taskgroup/gain_matrix.hpp"

namespace taskgroup {

enum class AssignMode { kCover, kPartition };

struct BudgetConstraint {
  Eigen::MatrixXd per_task;  // n x m, entry (i, j) = budget of task i in group j
  Eigen::VectorXd caps;      // m, per-group budget cap
};

struct SizeBounds {
  std::vector<int> min_size;  // m entries
  std::vector<int> max_size;  // m entries
};

struct GroupingProblem {
  GainMatrix gains;
  int num_groups = 1;
  AssignMode mode = AssignMode::kCover;
  std::optional<BudgetConstraint> budget;
  std::optional<SizeBounds> size_bounds;
};

inline void validate(const GroupingProblem& p) {
  validate(p.gains);
  const int n = p.gains.size();
  const int m = p.num_groups;
  if (m < 1) throw std::invalid_argument("GroupingProblem: need at least one group");
  if (p.budget) {
    if (p.budget->per_task.rows() != n || p.budget->per_task.cols() != m)
      throw std::invalid_argument("GroupingProblem: budget matrix must be n x m");
    if (p.budget->caps.size() != m)
      throw std::invalid_argument("GroupingProblem: budget caps must have m entries");
    if ((p.budget->per_task.array() < 0.0).any())
      throw std::invalid_argument("GroupingProblem: budgets must be non-negative");
  }
  if (p.size_bounds) {
    if (static_cast<int>(p.size_bounds->min_size.size()) != m ||
        static_cast<int>(p.size_bounds->max_size.size()) != m)
      throw std::invalid_argument("GroupingProblem: size bounds must have m entries");
    for (int j = 0; j < m; ++j) {
      const int lo = p.size_bounds->min_size[j];
      const int hi = p.size_bounds->max_size[j];
      if (lo < 1 || lo > hi || hi > n)
        throw std::invalid_argument("GroupingProblem: size bounds must satisfy 1 <= min <= max <= n");
    }
  }
}

// Resolved per-column bounds, defaulting to [1, n].
inline std::vector<int> resolved_min_sizes(const GroupingProblem& p) {
  if (p.size_bounds) return p.size_bounds->min_size;
  return std::vector<int>(p.num_groups, 1);
}
inline std::vector<int> resolved_max_sizes(const GroupingProblem& p) {
  if (p.size_bounds) return p.size_bounds->max_size;
  return std::vector<int>(p.num_groups, p.gains.size());
}

// Whether the constraints treat all columns identically; only then may the
// solver break column-permutation symmetry and report groups in canonical
// sorted order.
inline bool column_symmetric_constraints(const GroupingProblem& p) {
  const int m = p.num_groups;
  if (p.budget) {
    for (int j = 1; j < m; ++j) {
      if (p.budget->caps(j) != p.budget->caps(0)) return false;
      if (p.budget->per_task.col(j) != p.budget->per_task.col(0)) return false;
    }
  }
  if (p.size_bounds) {
    for (int j = 1; j < m; ++j) {
      if (p.size_bounds->min_size[j] != p.size_bounds->min_size[0]) return false;
      if (p.size_bounds->max_size[j] != p.size_bounds->max_size[0]) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Objective and canonical form

inline double group_quadratic_form(const Eigen::MatrixXd& s, const std::vector<int>& group) {
  double q = 0.0;
  for (int i : group)
    for (int k : group) q += s(i, k);
  return q;
}

// Sum over groups of the size-normalized quadratic form. Iteration order is
// fixed (groups in the given order, members ascending), so identical group
// structures evaluate to bit-identical doubles.
inline double grouping_objective(const Eigen::MatrixXd& s,
                                 const std::vector<std::vector<int>>& groups) {
  double obj = 0.0;
  for (const std::vector<int>& g : groups) {
    if (g.empty()) throw std::domain_error("grouping_objective: empty group");
    obj += group_quadratic_form(s, g) / static_cast<double>(g.size());
  }
  return obj;
}

inline std::uint64_t group_bitmask(const std::vector<int>& group) {
  std::uint64_t mask = 0;
  for (int i : group) {
    if (i < 0 || i >= 63) throw std::out_of_range("group_bitmask: task index out of range");
    mask |= (std::uint64_t{1} << i);
  }
  return mask;
}

// Members sorted ascending; columns sorted ascending by bitmask when
// `sort_columns` (the column-symmetric case). Labeled constraints keep the
// original column order.
inline std::vector<std::vector<int>> canonical_groups(std::vector<std::vector<int>> groups,
                                                      bool sort_columns) {
  for (std::vector<int>& g : groups) std::sort(g.begin(), g.end());
  if (sort_columns) {
    std::sort(groups.begin(), groups.end(),
              [](const std::vector<int>& a, const std::vector<int>& b) {
                return group_bitmask(a) < group_bitmask(b);
              });
  }
  return groups;
}

inline bool canonical_less(const std::vector<std::vector<int>>& a,
                           const std::vector<std::vector<int>>& b) {
  const std::size_t len = std::min(a.size(), b.size());
  for (std::size_t j = 0; j < len; ++j) {
    const std::uint64_t ma = group_bitmask(a[j]);
    const std::uint64_t mb = group_bitmask(b[j]);
    if (ma != mb) return ma < mb;
  }
  return a.size() < b.size();
}

// Tie-break rule shared by the exact solver and the enumeration oracle:
// higher objective wins; equal objectives fall back to the canonically
// smallest group list.
inline bool better_assignment(double obj_a, const std::vector<std::vector<int>>& groups_a,
                              double obj_b, const std::vector<std::vector<int>>& groups_b) {
  if (obj_a != obj_b) return obj_a > obj_b;
  return canonical_less(groups_a, groups_b);
}

// For each task, the containing group with the largest gain toward it
// (mean of column entries over the group's rows); ties go to the lower
// group index.
inline std::vector<int> best_group_per_task(const Eigen::MatrixXd& s,
                                            const std::vector<std::vector<int>>& groups,
                                            int num_tasks) {
  std::vector<int> best(num_tasks, -1);
  std::vector<double> best_gain(num_tasks, 0.0);
  for (int g = 0; g < static_cast<int>(groups.size()); ++g) {
    for (int target : groups[g]) {
      double sum = 0.0;
      for (int src : groups[g]) sum += s(src, target);
      const double gain = sum / static_cast<double>(groups[g].size());
      if (best[target] < 0 || gain > best_gain[target]) {
        best[target] = g;
        best_gain[target] = gain;
      }
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Result type

struct SolverStats {
  std::int64_t nodes = 0;
  std::int64_t bound_prunings = 0;
  double wall_seconds = 0.0;  // informational; excluded from file artifacts
};

struct GroupAssignment {
  bool feasible = false;
  std::string infeasible_reason;
  std::vector<std::vector<int>> groups;  // column member lists
  double objective = 0.0;
  std::vector<int> best_group_of_task;
  SolverStats stats;

  Eigen::MatrixXi to_matrix(int num_tasks) const {
    Eigen::MatrixXi x = Eigen::MatrixXi::Zero(num_tasks, static_cast<int>(groups.size()));
    for (int j = 0; j < static_cast<int>(groups.size()); ++j)
      for (int i : groups[j]) x(i, j) = 1;
    return x;
  }
};

}  // namespace taskgroup
