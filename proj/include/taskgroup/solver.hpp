#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <future>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "taskgroup/grouping.hpp"

namespace taskgroup {

struct SolveOptions {
  int threads = 1;
};

namespace solver_detail {

// Bound ingredients, all on the symmetrized matrix M = (S + S^T)/2 (same
// quadratic form as S).
//
// Writing the objective as sum_j (1/s_j) sum_{i in g_j} rowsum_i(g_j):
//  - a not-yet-assigned task i contributes at most
//    u_i = max(0, M_ii, max_{k != i} M_ik) per membership (the size-weighted
//    mix of its diagonal and its best non-negative off-diagonal entry);
//  - a partially built column with quadratic form Q, member positive-row
//    maxima summing to Psum and c members reaches at most
//    (Q + t Psum) / (c + t) after t more joins, since every future cross
//    term against member i is bounded by P_i >= 0.
struct BoundData {
  Eigen::MatrixXd sym;              // M
  std::vector<double> membership;   // u_i
  std::vector<double> pos_offdiag;  // P_i = max(0, max_{k != i} M_ik)
};

inline BoundData make_bound_data(const Eigen::MatrixXd& s) {
  BoundData data;
  data.sym = 0.5 * (s + s.transpose());
  const int n = static_cast<int>(s.rows());
  data.membership.resize(n);
  data.pos_offdiag.resize(n);
  for (int i = 0; i < n; ++i) {
    double off = 0.0;
    for (int k = 0; k < n; ++k) {
      if (k == i) continue;
      off = std::max(off, data.sym(i, k));
    }
    data.pos_offdiag[i] = off;
    data.membership[i] = std::max({0.0, data.sym(i, i), off});
  }
  return data;
}

// Largest reachable size-normalized quadratic form for one column, maximized
// over the admissible number of future joins. (Q + t Psum)/(c + t) is
// monotone in t, so only the endpoints matter.
inline double column_completion_bound(double quad, double pos_sum, int count, int t_min,
                                      int t_max) {
  if (t_min > t_max) t_min = t_max;
  auto value = [&](int t) {
    const int size = count + t;
    if (size <= 0) return 0.0;
    return (quad + static_cast<double>(t) * pos_sum) / static_cast<double>(size);
  };
  return std::max(value(t_min), value(t_max));
}

struct Candidate {
  bool valid = false;
  double objective = 0.0;
  std::vector<std::vector<int>> groups;
};

inline void offer(Candidate& best, double objective, std::vector<std::vector<int>> groups) {
  if (!best.valid || better_assignment(objective, groups, best.objective, best.groups)) {
    best.valid = true;
    best.objective = objective;
    best.groups = std::move(groups);
  }
}

struct SearchSpec {
  const Eigen::MatrixXd* gains = nullptr;
  int n = 0;
  int m = 0;
  AssignMode mode = AssignMode::kCover;
  bool symmetric = false;  // column symmetry breaking enabled
  const BudgetConstraint* budget = nullptr;
  std::vector<int> min_size, max_size;
  BoundData bound;
  std::vector<double> suffix_bound;     // suffix_bound[r] = sum_{i >= r} mult * u_i
  std::vector<std::uint32_t> patterns;  // row patterns, in fixed order
  double prune_slack = 0.0;
};

// Depth-first search over task rows. Each row picks the set of groups the
// task joins (a single group in partition mode). Column-permutation symmetry
// is broken, when constraints allow, by keeping column prefixes in
// non-increasing lexicographic order; duplicates that survive to a leaf are
// rejected by the distinctness check.
class DepthFirstSearch {
 public:
  DepthFirstSearch(const SearchSpec& spec, Candidate seed)
      : spec_(spec),
        best_(std::move(seed)),
        cols_(spec.m),
        col_mask_(spec.m, 0),
        count_(spec.m, 0),
        budget_used_(spec.m, 0.0),
        col_quad_(spec.m, 0.0),
        col_pos_sum_(spec.m, 0.0),
        eq_prefix_(spec.m > 0 ? spec.m - 1 : 0, true) {}

  void run(int first_row, std::uint32_t first_pattern) {
    expand(first_row, first_pattern);
  }

  void run_all(int row) {
    for (std::uint32_t pattern : spec_.patterns) expand(row, pattern);
  }

  Candidate& best() { return best_; }
  SolverStats& stats() { return stats_; }

 private:
  void expand(int row, std::uint32_t pattern) {
    ++stats_.nodes;
    if (!allowed(row, pattern)) return;
    apply(row, pattern);
    if (row + 1 == spec_.n) {
      leaf();
    } else {
      if (best_.valid && upper_bound(row + 1) < best_.objective - spec_.prune_slack) {
        ++stats_.bound_prunings;
      } else {
        for (std::uint32_t next : spec_.patterns) expand(row + 1, next);
      }
    }
    undo(row, pattern);
  }

  // Admissible value bound for the best completion of rows >= next_row:
  // every started column is completed optimistically via its partial
  // quadratic form, and every future task adds at most u_i per membership.
  double upper_bound(int next_row) const {
    const int remaining = spec_.n - next_row;
    double bound = spec_.suffix_bound[next_row];
    for (int j = 0; j < spec_.m; ++j) {
      int t_min = std::max(0, spec_.min_size[j] - count_[j]);
      if (count_[j] == 0) t_min = std::max(t_min, 1);
      const int t_max = std::min(spec_.max_size[j] - count_[j], remaining);
      bound += column_completion_bound(col_quad_[j], col_pos_sum_[j], count_[j], t_min, t_max);
    }
    return bound;
  }

  bool allowed(int row, std::uint32_t pattern) const {
    if (spec_.symmetric) {
      for (int j = 0; j + 1 < spec_.m; ++j) {
        if (!eq_prefix_[j]) continue;
        const bool left = pattern & (1u << j);
        const bool right = pattern & (1u << (j + 1));
        if (!left && right) return false;
      }
    }
    const int remaining = spec_.n - row - 1;
    int deficit_total = 0;
    for (int j = 0; j < spec_.m; ++j) {
      const bool in = pattern & (1u << j);
      const int count = count_[j] + (in ? 1 : 0);
      if (in) {
        if (count > spec_.max_size[j]) return false;
        if (spec_.budget != nullptr &&
            budget_used_[j] + spec_.budget->per_task(row, j) > spec_.budget->caps(j) + 1e-9)
          return false;
      }
      // Each later task can add at most one member to column j.
      if (count + remaining < spec_.min_size[j]) return false;
      deficit_total += std::max(0, spec_.min_size[j] - count);
    }
    // In partition mode each later task fills exactly one slot.
    if (spec_.mode == AssignMode::kPartition && deficit_total > remaining) return false;
    return true;
  }

  void apply(int row, std::uint32_t pattern) {
    saved_eq_.push_back(eq_prefix_);
    for (int j = 0; j + 1 < spec_.m; ++j) {
      const bool left = pattern & (1u << j);
      const bool right = pattern & (1u << (j + 1));
      if (eq_prefix_[j] && left != right) eq_prefix_[j] = false;
    }
    const Eigen::MatrixXd& sym = spec_.bound.sym;
    for (int j = 0; j < spec_.m; ++j) {
      if (!(pattern & (1u << j))) continue;
      double cross = 0.0;
      for (int member : cols_[j]) cross += sym(row, member);
      col_quad_[j] += sym(row, row) + 2.0 * cross;
      col_pos_sum_[j] += spec_.bound.pos_offdiag[row];
      cols_[j].push_back(row);
      col_mask_[j] |= (std::uint64_t{1} << row);
      count_[j] += 1;
      if (spec_.budget != nullptr) budget_used_[j] += spec_.budget->per_task(row, j);
    }
  }

  void undo(int row, std::uint32_t pattern) {
    const Eigen::MatrixXd& sym = spec_.bound.sym;
    for (int j = 0; j < spec_.m; ++j) {
      if (!(pattern & (1u << j))) continue;
      cols_[j].pop_back();
      double cross = 0.0;
      for (int member : cols_[j]) cross += sym(row, member);
      col_quad_[j] -= sym(row, row) + 2.0 * cross;
      col_pos_sum_[j] -= spec_.bound.pos_offdiag[row];
      col_mask_[j] &= ~(std::uint64_t{1} << row);
      count_[j] -= 1;
      if (spec_.budget != nullptr) budget_used_[j] -= spec_.budget->per_task(row, j);
    }
    eq_prefix_ = std::move(saved_eq_.back());
    saved_eq_.pop_back();
  }

  void leaf() {
    for (int j = 0; j < spec_.m; ++j)
      if (count_[j] < std::max(1, spec_.min_size[j])) return;
    for (int j1 = 0; j1 < spec_.m; ++j1)
      for (int j2 = j1 + 1; j2 < spec_.m; ++j2)
        if (col_mask_[j1] == col_mask_[j2]) return;
    std::vector<std::vector<int>> groups = canonical_groups(cols_, spec_.symmetric);
    const double obj = grouping_objective(*spec_.gains, groups);
    offer(best_, obj, std::move(groups));
  }

  const SearchSpec& spec_;
  Candidate best_;
  SolverStats stats_;
  std::vector<std::vector<int>> cols_;
  std::vector<std::uint64_t> col_mask_;
  std::vector<int> count_;
  std::vector<double> budget_used_;
  std::vector<double> col_quad_;     // partial quadratic form per column
  std::vector<double> col_pos_sum_;  // sum of members' positive row maxima
  std::vector<bool> eq_prefix_;
  std::vector<std::vector<bool>> saved_eq_;
};

// Quick structural infeasibility screens with crisp reasons; anything subtler
// is left for the search to exhaust.
inline std::optional<std::string> quick_infeasible(const GroupingProblem& p) {
  const int n = p.gains.size();
  const int m = p.num_groups;
  const std::vector<int> mins = resolved_min_sizes(p);
  const std::vector<int> maxs = resolved_max_sizes(p);
  if (p.mode == AssignMode::kPartition) {
    if (m > n) return "more groups than tasks in partition mode";
    long long min_total = 0, max_total = 0;
    for (int j = 0; j < m; ++j) {
      min_total += mins[j];
      max_total += maxs[j];
    }
    if (min_total > n) return "size minimums exceed the task count";
    if (max_total < n) return "size maximums cannot cover all tasks";
  } else {
    if (n >= 1 && n <= 62) {
      // Count distinct subsets compatible with the per-column size range when
      // the range is uniform; heterogeneous bounds are left to the search.
      bool uniform = true;
      for (int j = 1; j < m; ++j)
        if (mins[j] != mins[0] || maxs[j] != maxs[0]) uniform = false;
      if (uniform) {
        long double subsets = 0.0L;
        for (int s = mins[0]; s <= maxs[0]; ++s) {
          long double c = 1.0L;
          for (int k = 0; k < s; ++k) c = c * static_cast<long double>(n - k) / (k + 1);
          subsets += c;
        }
        if (subsets < static_cast<long double>(m))
          return "fewer admissible distinct groups than requested";
      }
    }
  }
  return std::nullopt;
}

// A cheap feasible assignment used to seed the incumbent. Tasks are dealt
// round-robin, then improved by best-marginal reassignment where constraints
// allow. Failure is fine; the search just starts without an incumbent.
inline Candidate greedy_seed(const GroupingProblem& p, bool symmetric) {
  const int n = p.gains.size();
  const int m = p.num_groups;
  if (n < m) return {};
  const std::vector<int> mins = resolved_min_sizes(p);
  const std::vector<int> maxs = resolved_max_sizes(p);

  std::vector<std::vector<int>> groups(m);
  for (int i = 0; i < n; ++i) groups[i % m].push_back(i);

  auto feasible = [&](const std::vector<std::vector<int>>& g) {
    std::vector<std::uint64_t> masks;
    for (int j = 0; j < m; ++j) {
      const int size = static_cast<int>(g[j].size());
      if (size < mins[j] || size > maxs[j]) return false;
      if (p.budget) {
        double used = 0.0;
        for (int i : g[j]) used += p.budget->per_task(i, j);
        if (used > p.budget->caps(j) + 1e-9) return false;
      }
      masks.push_back(group_bitmask(g[j]));
    }
    for (int a = 0; a < m; ++a)
      for (int b = a + 1; b < m; ++b)
        if (masks[a] == masks[b]) return false;
    return true;
  };

  if (!feasible(groups)) return {};

  // Local improvement: move single tasks to the group with the best marginal
  // objective while staying feasible.
  bool improved = true;
  int rounds = 0;
  while (improved && rounds++ < 4) {
    improved = false;
    for (int i = 0; i < n; ++i) {
      int from = -1;
      for (int j = 0; j < m; ++j)
        if (std::find(groups[j].begin(), groups[j].end(), i) != groups[j].end()) from = j;
      double base = grouping_objective(p.gains.values, groups);
      for (int to = 0; to < m; ++to) {
        if (to == from) continue;
        std::vector<std::vector<int>> trial = groups;
        trial[from].erase(std::find(trial[from].begin(), trial[from].end(), i));
        trial[to].push_back(i);
        std::sort(trial[to].begin(), trial[to].end());
        if (trial[from].empty() || !feasible(trial)) continue;
        const double obj = grouping_objective(p.gains.values, trial);
        if (obj > base + 1e-12) {
          groups = std::move(trial);
          improved = true;
          break;
        }
      }
    }
  }

  Candidate seed;
  seed.groups = canonical_groups(groups, symmetric);
  seed.objective = grouping_objective(p.gains.values, seed.groups);
  seed.valid = true;
  return seed;
}

}  // namespace solver_detail

// Exact branch-and-bound solver for the task grouping formulation: maximize
// the sum of size-normalized intra-group gains subject to cover/partition,
// non-empty groups, optional budgets, optional size bounds, and pairwise
// distinct groups. Returns the global optimum with a deterministic canonical
// tie-break; infeasibility is a result, not an error.
inline GroupAssignment solve(const GroupingProblem& problem, const SolveOptions& options = {}) {
  validate(problem);
  const auto t0 = std::chrono::steady_clock::now();
  const int n = problem.gains.size();
  const int m = problem.num_groups;
  if (n > 62) throw std::invalid_argument("solve: supports at most 62 tasks");
  if (m > 31) throw std::invalid_argument("solve: supports at most 31 groups");

  GroupAssignment result;
  if (auto reason = solver_detail::quick_infeasible(problem)) {
    result.infeasible_reason = *reason;
    return result;
  }

  solver_detail::SearchSpec spec;
  spec.gains = &problem.gains.values;
  spec.n = n;
  spec.m = m;
  spec.mode = problem.mode;
  spec.symmetric = column_symmetric_constraints(problem);
  spec.budget = problem.budget ? &*problem.budget : nullptr;
  spec.min_size = resolved_min_sizes(problem);
  spec.max_size = resolved_max_sizes(problem);
  spec.bound = solver_detail::make_bound_data(problem.gains.values);

  const double mult = problem.mode == AssignMode::kCover ? static_cast<double>(m) : 1.0;
  spec.suffix_bound.assign(n + 1, 0.0);
  for (int i = n - 1; i >= 0; --i)
    spec.suffix_bound[i] = spec.suffix_bound[i + 1] + mult * spec.bound.membership[i];

  if (problem.mode == AssignMode::kPartition) {
    for (int j = 0; j < m; ++j) spec.patterns.push_back(1u << j);
  } else {
    for (std::uint32_t mask = 1; mask < (1u << m); ++mask) spec.patterns.push_back(mask);
  }

  double scale = 1.0;
  for (int i = 0; i < n; ++i) scale = std::max(scale, spec.bound.membership[i]);
  spec.prune_slack = 1e-7 * scale * n * mult;

  const solver_detail::Candidate seed = solver_detail::greedy_seed(problem, spec.symmetric);

  // The root row's patterns are explored as independent subtrees, each seeded
  // with the same greedy incumbent and never sharing improvements. That keeps
  // node and pruning counts identical for any worker count.
  struct BranchOutcome {
    solver_detail::Candidate best;
    SolverStats stats;
  };
  auto run_branch = [&](std::uint32_t pattern) {
    solver_detail::DepthFirstSearch search(spec, seed);
    search.run(0, pattern);
    return BranchOutcome{std::move(search.best()), search.stats()};
  };

  std::vector<BranchOutcome> outcomes(spec.patterns.size());
  const int threads = std::max(1, options.threads);
  if (threads == 1 || spec.patterns.size() <= 1) {
    for (std::size_t b = 0; b < spec.patterns.size(); ++b)
      outcomes[b] = run_branch(spec.patterns[b]);
  } else {
    std::vector<std::future<void>> workers;
    std::atomic<std::size_t> cursor{0};
    const int worker_count = std::min<int>(threads, static_cast<int>(spec.patterns.size()));
    for (int w = 0; w < worker_count; ++w) {
      workers.push_back(std::async(std::launch::async, [&]() {
        while (true) {
          const std::size_t b = cursor.fetch_add(1);
          if (b >= spec.patterns.size()) return;
          outcomes[b] = run_branch(spec.patterns[b]);
        }
      }));
    }
    for (auto& f : workers) f.get();
  }

  solver_detail::Candidate best = seed;
  SolverStats stats;
  for (const BranchOutcome& o : outcomes) {
    stats.nodes += o.stats.nodes;
    stats.bound_prunings += o.stats.bound_prunings;
    if (o.best.valid) solver_detail::offer(best, o.best.objective, o.best.groups);
  }

  stats.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  result.stats = stats;
  if (!best.valid) {
    result.infeasible_reason = "search exhausted: no feasible assignment";
    return result;
  }
  result.feasible = true;
  result.groups = best.groups;
  result.objective = best.objective;
  result.best_group_of_task = best_group_per_task(problem.gains.values, best.groups, n);
  return result;
}

}  // namespace taskgroup
