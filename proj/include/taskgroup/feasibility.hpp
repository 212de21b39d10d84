#pragma once

#include <Eigen/Core>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "taskgroup/grouping.hpp"

namespace taskgroup {

// Independent feasibility checker. Works directly on the binary assignment
// matrix and re-derives every constraint and the objective from scratch; it
// intentionally shares no logic with the solver or the enumeration oracle so
// it can vouch for their outputs.
struct FeasibilityReport {
  bool ok = false;
  std::vector<std::string> violations;
};

inline FeasibilityReport check_assignment(const GroupingProblem& problem,
                                          const Eigen::MatrixXi& x,
                                          std::optional<double> claimed_objective = std::nullopt) {
  FeasibilityReport rep;
  const int n = problem.gains.size();
  const int m = problem.num_groups;
  auto fail = [&rep](const std::string& msg) { rep.violations.push_back(msg); };

  if (x.rows() != n || x.cols() != m) {
    fail("assignment matrix has wrong shape");
    return rep;
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      if (x(i, j) != 0 && x(i, j) != 1) fail("entry not binary at (" + std::to_string(i) + "," + std::to_string(j) + ")");

  // Each group contains at least one task.
  for (int j = 0; j < m; ++j) {
    int col_sum = 0;
    for (int i = 0; i < n; ++i) col_sum += x(i, j);
    if (col_sum < 1) fail("group " + std::to_string(j) + " is empty");
  }

  // Every task covered; exactly once in partition mode.
  for (int i = 0; i < n; ++i) {
    int row_sum = 0;
    for (int j = 0; j < m; ++j) row_sum += x(i, j);
    if (row_sum < 1) fail("task " + std::to_string(i) + " is not covered");
    if (problem.mode == AssignMode::kPartition && row_sum != 1)
      fail("task " + std::to_string(i) + " is in " + std::to_string(row_sum) + " groups (partition)");
  }

  if (problem.budget) {
    for (int j = 0; j < m; ++j) {
      double used = 0.0;
      for (int i = 0; i < n; ++i)
        if (x(i, j) == 1) used += problem.budget->per_task(i, j);
      if (used > problem.budget->caps(j) + 1e-9)
        fail("budget cap exceeded in group " + std::to_string(j));
    }
  }

  if (problem.size_bounds) {
    for (int j = 0; j < m; ++j) {
      int col_sum = 0;
      for (int i = 0; i < n; ++i) col_sum += x(i, j);
      if (col_sum < problem.size_bounds->min_size[j])
        fail("group " + std::to_string(j) + " below minimum size");
      if (col_sum > problem.size_bounds->max_size[j])
        fail("group " + std::to_string(j) + " above maximum size");
    }
  }

  // Pairwise distinct columns: squared Hamming distance at least 1.
  for (int j1 = 0; j1 < m; ++j1) {
    for (int j2 = j1 + 1; j2 < m; ++j2) {
      int dist = 0;
      for (int i = 0; i < n; ++i) {
        const int d = x(i, j1) - x(i, j2);
        dist += d * d;
      }
      if (dist < 1)
        fail("groups " + std::to_string(j1) + " and " + std::to_string(j2) + " are identical");
    }
  }

  if (claimed_objective) {
    double obj = 0.0;
    bool computable = true;
    for (int j = 0; j < m; ++j) {
      int size = 0;
      double quad = 0.0;
      for (int i = 0; i < n; ++i) {
        size += x(i, j);
        if (x(i, j) == 0) continue;
        for (int k = 0; k < n; ++k)
          if (x(k, j) == 1) quad += problem.gains.values(i, k);
      }
      if (size == 0) {
        computable = false;
        break;
      }
      obj += quad / static_cast<double>(size);
    }
    if (computable && std::abs(obj - *claimed_objective) > 1e-9)
      fail("claimed objective differs from recomputed value by " +
           std::to_string(std::abs(obj - *claimed_objective)));
  }

  rep.ok = rep.violations.empty();
  return rep;
}

}  // namespace taskgroup
