#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "taskgroup/random.hpp"
#include "taskgroup/simulation.hpp"
#include "taskgroup/synthetic_task.hpp"

namespace taskgroup {

// Randomized campaigns behind the `verify` command. The acceptance suite
// drives the same entry points, so the command and the tests agree by
// construction.

namespace verify_detail {

struct RandomInstance {
  std::vector<SyntheticTask> tasks;
  TrainState state;
  SimConfig cfg;
};

inline RandomInstance random_quadratic_instance(Rng& rng, int min_tasks = 2, int max_tasks = 6) {
  QuadraticFamilyOptions opt;
  opt.tasks = rng.uniform_int(min_tasks, max_tasks);
  opt.shared_dim = rng.uniform_int(2, 4);
  opt.head_dim = rng.uniform_int(1, 3);
  opt.curvature_min = 0.3;
  opt.curvature_max = 2.5;
  opt.center_spread = 1.0;
  opt.offset_min = 0.05;
  opt.offset_max = 0.3;
  RandomInstance inst;
  inst.tasks = make_quadratic_family(opt, rng);
  inst.state = make_initial_state(inst.tasks, rng, 1.0, 1.0);
  inst.cfg.eta.base = rng.uniform(0.01, 0.1);
  return inst;
}

// Non-empty random subset of `pool`.
inline std::vector<int> random_subset(const std::vector<int>& pool, Rng& rng) {
  std::vector<int> subset;
  for (int v : pool)
    if (rng.uniform() < 0.5) subset.push_back(v);
  if (subset.empty()) subset.push_back(pool[rng.uniform_int(0, static_cast<int>(pool.size()) - 1)]);
  return subset;
}

}  // namespace verify_detail

struct Observation1Campaign {
  int instances = 0;
  int valid = 0;
  int consistent = 0;
  std::vector<int> violations;  // instance indices

  bool ok() const { return violations.empty(); }
};

inline Observation1Campaign run_observation1_campaign(std::uint64_t seed, int instances) {
  Observation1Campaign out;
  out.instances = instances;
  Rng root(seed);
  for (int k = 0; k < instances; ++k) {
    Rng rng = root.fork(k);
    verify_detail::RandomInstance inst = verify_detail::random_quadratic_instance(rng);
    const int n = static_cast<int>(inst.tasks.size());
    const int target = rng.uniform_int(0, n - 1);
    std::vector<int> pool;
    for (int i = 0; i < n; ++i)
      if (i != target) pool.push_back(i);
    const std::vector<int> group_a = verify_detail::random_subset(pool, rng);
    const std::vector<int> group_b = verify_detail::random_subset(pool, rng);
    const Observation1Report rep =
        check_observation1(inst.state, inst.tasks, inst.cfg, group_a, group_b, target);
    if (!rep.valid) continue;
    ++out.valid;
    if (rep.consistent)
      ++out.consistent;
    else
      out.violations.push_back(k);
  }
  return out;
}

struct Prop1Campaign {
  int instances = 0;
  int valid = 0;
  int holds = 0;
  double domain_radius = 0.0;
  std::vector<int> violations;
  std::vector<std::string> invalid_reasons;

  bool ok() const { return violations.empty(); }
};

inline Prop1Campaign run_prop1_campaign(std::uint64_t seed, int instances,
                                        double domain_radius = 5.0) {
  Prop1Campaign out;
  out.instances = instances;
  out.domain_radius = domain_radius;
  Rng root(seed);
  for (int k = 0; k < instances; ++k) {
    Rng rng = root.fork(k);
    verify_detail::RandomInstance inst = verify_detail::random_quadratic_instance(rng);
    const int n = static_cast<int>(inst.tasks.size());
    const int target = rng.uniform_int(0, n - 1);
    std::vector<int> pool;
    for (int i = 0; i < n; ++i)
      if (i != target) pool.push_back(i);
    std::vector<int> group = verify_detail::random_subset(pool, rng);
    if (static_cast<int>(group.size()) > 4) group.resize(4);
    const Prop1Report rep =
        verify_prop1_bound(inst.state, inst.tasks, inst.cfg, group, target, domain_radius);
    if (!rep.valid) {
      out.invalid_reasons.push_back(rep.invalid_reason);
      continue;
    }
    ++out.valid;
    if (rep.holds)
      ++out.holds;
    else
      out.violations.push_back(k);
  }
  return out;
}

struct EtaSweep {
  std::vector<Prop1Report> rows;
  bool all_hold = false;       // bound satisfied at every eta
  double max_ratio = 0.0;      // max LHS/RHS over the sweep
  bool ratio_bounded = false;  // LHS/RHS stays bounded (<= 1) as eta halves
  bool tail_monotone = false;  // LHS non-increasing over the small-eta half
  bool full_monotone = false;  // informational: non-increasing over the whole range
};

// Evaluate the bound at one fixed state while halving the learning rate.
// The gap behaves like |c1 eta + c2 eta^2|, so monotonicity is only
// guaranteed once the linear term dominates; the pass criteria are the bound
// itself, the bounded LHS/RHS ratio and tail monotonicity.
inline EtaSweep run_eta_sweep(std::uint64_t seed, double eta_start = 0.1, int halvings = 10,
                              double domain_radius = 5.0) {
  EtaSweep sweep;
  Rng rng(seed);
  verify_detail::RandomInstance inst = verify_detail::random_quadratic_instance(rng, 3, 5);
  const int n = static_cast<int>(inst.tasks.size());
  const int target = 0;
  std::vector<int> group;
  for (int i = 1; i < n; ++i) group.push_back(i);

  double eta = eta_start;
  for (int k = 0; k <= halvings; ++k, eta *= 0.5) {
    SimConfig cfg = inst.cfg;
    cfg.eta.base = eta;
    sweep.rows.push_back(
        verify_prop1_bound(inst.state, inst.tasks, cfg, group, target, domain_radius));
  }

  sweep.all_hold = true;
  sweep.full_monotone = true;
  sweep.tail_monotone = true;
  const std::size_t tail_start = sweep.rows.size() / 2;
  for (std::size_t i = 0; i < sweep.rows.size(); ++i) {
    const Prop1Report& row = sweep.rows[i];
    if (!row.valid || !row.holds) sweep.all_hold = false;
    if (row.rhs > 0.0) sweep.max_ratio = std::max(sweep.max_ratio, row.lhs / row.rhs);
    if (i > 0 && row.lhs > sweep.rows[i - 1].lhs + 1e-12) {
      sweep.full_monotone = false;
      if (i > tail_start) sweep.tail_monotone = false;
    }
  }
  sweep.ratio_bounded = sweep.max_ratio <= 1.0 + 1e-9;
  return sweep;
}

}  // namespace taskgroup
