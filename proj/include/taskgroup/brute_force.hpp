#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "taskgroup/grouping.hpp"

namespace taskgroup {

namespace brute_detail {

inline bool groups_feasible(const GroupingProblem& p,
                            const std::vector<std::vector<int>>& groups) {
  const int n = p.gains.size();
  const int m = p.num_groups;
  const std::vector<int> mins = resolved_min_sizes(p);
  const std::vector<int> maxs = resolved_max_sizes(p);
  std::vector<int> coverage(n, 0);
  std::vector<std::uint64_t> masks(m);
  for (int j = 0; j < m; ++j) {
    const int size = static_cast<int>(groups[j].size());
    if (size < 1 || size < mins[j] || size > maxs[j]) return false;
    if (p.budget) {
      double used = 0.0;
      for (int i : groups[j]) used += p.budget->per_task(i, j);
      if (used > p.budget->caps(j) + 1e-9) return false;
    }
    for (int i : groups[j]) coverage[i] += 1;
    masks[j] = group_bitmask(groups[j]);
  }
  for (int i = 0; i < n; ++i) {
    if (coverage[i] < 1) return false;
    if (p.mode == AssignMode::kPartition && coverage[i] != 1) return false;
  }
  for (int a = 0; a < m; ++a)
    for (int b = a + 1; b < m; ++b)
      if (masks[a] == masks[b]) return false;
  return true;
}

// Visit every set partition of [n] into exactly m blocks via restricted
// growth strings; blocks are ordered by first appearance.
inline void for_each_partition(int n, int m,
                               const std::function<void(const std::vector<std::vector<int>>&)>& fn) {
  std::vector<int> assign(n, 0);
  std::function<void(int, int)> rec = [&](int i, int used) {
    if (n - i < m - used) return;  // cannot open enough new blocks
    if (i == n) {
      if (used != m) return;
      std::vector<std::vector<int>> blocks(m);
      for (int t = 0; t < n; ++t) blocks[assign[t]].push_back(t);
      fn(blocks);
      return;
    }
    const int limit = std::min(used, m - 1);
    for (int b = 0; b <= limit; ++b) {
      assign[i] = b;
      rec(i + 1, std::max(used, b + 1));
    }
  };
  rec(0, 0);
}

// Visit every combination of m distinct non-empty subsets of [n], as sorted
// subset bitmasks. Subsets may be prefiltered by the caller.
inline void for_each_subset_combo(const std::vector<std::uint64_t>& subsets, int m,
                                  const std::function<void(const std::vector<std::uint64_t>&)>& fn) {
  std::vector<std::uint64_t> chosen;
  std::function<void(std::size_t)> rec = [&](std::size_t start) {
    if (static_cast<int>(chosen.size()) == m) {
      fn(chosen);
      return;
    }
    const std::size_t need = m - chosen.size();
    for (std::size_t s = start; s + need <= subsets.size(); ++s) {
      chosen.push_back(subsets[s]);
      rec(s + 1);
      chosen.pop_back();
    }
  };
  rec(0);
}

inline std::vector<int> mask_to_group(std::uint64_t mask) {
  std::vector<int> g;
  for (int i = 0; mask != 0; ++i, mask >>= 1)
    if (mask & 1) g.push_back(i);
  return g;
}

}  // namespace brute_detail

// Exhaustive enumeration of the feasible assignments, used as ground truth
// for the branch-and-bound solver and as the sampling space for the random
// grouping baseline. Guard rails keep it at desk scale.
//
// Column-symmetric constraints enumerate unlabeled assignments in canonical
// order; labeled (heterogeneous) constraints enumerate every feasible column
// labeling.
inline void for_each_feasible_assignment(
    const GroupingProblem& problem,
    const std::function<void(const std::vector<std::vector<int>>&)>& fn) {
  validate(problem);
  const int n = problem.gains.size();
  const int m = problem.num_groups;
  const bool symmetric = column_symmetric_constraints(problem);
  if (problem.mode == AssignMode::kPartition) {
    if (n > 10) throw std::invalid_argument("brute force refused: partition mode supports n <= 10");
  } else {
    if (n > 6) throw std::invalid_argument("brute force refused: cover mode supports n <= 6");
  }
  if (m > 8) throw std::invalid_argument("brute force refused: supports at most 8 groups");

  std::vector<int> perm(m);
  std::iota(perm.begin(), perm.end(), 0);

  auto emit = [&](const std::vector<std::vector<int>>& candidate) {
    if (symmetric) {
      if (brute_detail::groups_feasible(problem, candidate)) fn(candidate);
      return;
    }
    // Try every block-to-column labeling under labeled constraints.
    std::vector<int> p(perm);
    std::sort(p.begin(), p.end());
    do {
      std::vector<std::vector<int>> labeled(m);
      for (int j = 0; j < m; ++j) labeled[p[j]] = candidate[j];
      if (brute_detail::groups_feasible(problem, labeled)) fn(labeled);
    } while (std::next_permutation(p.begin(), p.end()));
  };

  if (problem.mode == AssignMode::kPartition) {
    brute_detail::for_each_partition(n, m, [&](const std::vector<std::vector<int>>& blocks) {
      emit(canonical_groups(blocks, /*sort_columns=*/true));
    });
  } else {
    std::vector<std::uint64_t> subsets;
    for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << n); ++mask) subsets.push_back(mask);
    brute_detail::for_each_subset_combo(subsets, m, [&](const std::vector<std::uint64_t>& chosen) {
      std::vector<std::vector<int>> groups;
      groups.reserve(m);
      for (std::uint64_t mask : chosen) groups.push_back(brute_detail::mask_to_group(mask));
      emit(groups);
    });
  }
}

inline std::vector<std::vector<std::vector<int>>> enumerate_feasible(
    const GroupingProblem& problem, std::size_t limit = SIZE_MAX) {
  std::vector<std::vector<std::vector<int>>> all;
  for_each_feasible_assignment(problem, [&](const std::vector<std::vector<int>>& groups) {
    if (all.size() >= limit) throw std::runtime_error("enumerate_feasible: limit exceeded");
    all.push_back(groups);
  });
  return all;
}

// Enumeration oracle mirroring the exact solver's contract: global optimum,
// identical canonical tie-break, infeasibility as a result value.
inline GroupAssignment solve_bruteforce(const GroupingProblem& problem) {
  validate(problem);
  GroupAssignment result;
  bool found = false;
  double best_obj = 0.0;
  std::vector<std::vector<int>> best_groups;
  for_each_feasible_assignment(problem, [&](const std::vector<std::vector<int>>& groups) {
    const double obj = grouping_objective(problem.gains.values, groups);
    if (!found || better_assignment(obj, groups, best_obj, best_groups)) {
      found = true;
      best_obj = obj;
      best_groups = groups;
    }
  });
  if (!found) {
    result.infeasible_reason = "search exhausted: no feasible assignment";
    return result;
  }
  result.feasible = true;
  result.groups = best_groups;
  result.objective = best_obj;
  result.best_group_of_task =
      best_group_per_task(problem.gains.values, best_groups, problem.gains.size());
  return result;
}

}  // namespace taskgroup
