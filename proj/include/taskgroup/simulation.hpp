#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "taskgroup/gain_matrix.hpp"
#include "taskgroup/random.hpp"
#include "taskgroup/synthetic_task.hpp"

namespace taskgroup {

// Non-finite values during training abort the run with this, so callers can
// distinguish numeric blowups from configuration mistakes.
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainState {
  Eigen::VectorXd phi;
  std::vector<Eigen::VectorXd> thetas;
  int step = 0;  // completed training steps
};

struct EtaSchedule {
  enum class Kind { kConstant, kInvT };
  Kind kind = Kind::kConstant;
  double base = 0.1;

  // Learning rate for step t (1-based).
  double at(int t) const {
    return kind == Kind::kConstant ? base : base / static_cast<double>(t);
  }
};

enum class SharedAggregation { kSum, kAverage };

// Self-gain S_{ii} is not pinned down by the pairwise definition (it needs
// i != j); kSoloStep measures the relative improvement of one solo step,
// 1 - L_i(phi_solo, theta') / L_i(phi, theta'), while kZero leaves the
// diagonal at zero.
enum class SelfGainPolicy { kSoloStep, kZero };

struct SimConfig {
  EtaSchedule eta;
  SharedAggregation aggregation = SharedAggregation::kSum;
  SelfGainPolicy self_gain = SelfGainPolicy::kSoloStep;
  double loss_floor = 1e-12;
};

struct CollectionPolicy {
  enum class Mode { kFull, kSampled, kLazy };
  Mode mode = Mode::kFull;
  // Lazy mode collects at steps t with (t-1) % interval == 0 (t 1-based),
  // i.e. exactly ceil(T / interval) rounds over T steps.
  int interval = 1;
  std::uint64_t rng_seed = 0;  // subset draws in sampled mode
};

// Event counts attributed to transfer-gain collection, mirroring the unit
// costs of the complexity model (feedforward F, backward B, parameter
// assignment C). `feedforward_evals` is the total including the lookahead
// (high-order) evaluations, which are also tracked on their own.
struct LookaheadCostCounter {
  std::int64_t feedforward_evals = 0;
  std::int64_t highorder_feedforward_evals = 0;
  std::int64_t backward_evals = 0;
  std::int64_t param_assignments = 0;
};

inline TrainState make_initial_state(const std::vector<SyntheticTask>& tasks, Rng& rng,
                                     double phi_scale = 1.0, double theta_scale = 1.0) {
  if (tasks.empty()) throw std::invalid_argument("make_initial_state: no tasks");
  const int p = tasks.front().shared_dim();
  for (const SyntheticTask& t : tasks)
    if (t.shared_dim() != p)
      throw std::invalid_argument("make_initial_state: shared dims differ across tasks");
  TrainState s;
  s.phi = detail::random_vector(p, phi_scale, rng);
  s.thetas.reserve(tasks.size());
  for (const SyntheticTask& t : tasks)
    s.thetas.push_back(detail::random_vector(t.head_dim(), theta_scale, rng));
  return s;
}

namespace detail {

inline void require_consistent(const TrainState& s, const std::vector<SyntheticTask>& tasks) {
  if (s.thetas.size() != tasks.size())
    throw std::invalid_argument("train state has wrong number of heads");
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    if (tasks[k].shared_dim() != s.phi.size() ||
        tasks[k].head_dim() != s.thetas[k].size())
      throw std::invalid_argument("train state dimensions do not match task " + tasks[k].id);
  }
}

inline void require_finite(const Eigen::VectorXd& g, const std::string& what, int step) {
  if (!g.allFinite())
    throw numeric_error("non-finite gradient in " + what + " at step " + std::to_string(step));
}

inline double checked_loss(const SyntheticTask& task, const Eigen::VectorXd& phi,
                           const Eigen::VectorXd& theta, int step) {
  const double value = task_loss(task, phi, theta);
  if (!std::isfinite(value))
    throw numeric_error("non-finite loss for " + task.id + " at step " + std::to_string(step));
  return value;
}

}  // namespace detail

// Gradients and one-step head updates prepared at a fixed state; every
// lookahead candidate at this step reuses them. Gradients carry the task
// weights so candidate updates match the committed training update.
struct LookaheadContext {
  double eta = 0.0;
  Eigen::VectorXd phi;                      // phi^t
  std::vector<Eigen::VectorXd> grads;       // weighted shared gradients G_k
  std::vector<Eigen::VectorXd> next_thetas; // theta_k^{t+1}
};

inline LookaheadContext prepare_lookahead(const TrainState& s,
                                          const std::vector<SyntheticTask>& tasks,
                                          const SimConfig& cfg,
                                          LookaheadCostCounter* counter = nullptr) {
  detail::require_consistent(s, tasks);
  const int n = static_cast<int>(tasks.size());
  const int t = s.step + 1;
  LookaheadContext ctx;
  ctx.eta = cfg.eta.at(t);
  if (ctx.eta <= 0.0) throw std::invalid_argument("learning rate must be positive");
  ctx.phi = s.phi;
  ctx.grads.reserve(n);
  ctx.next_thetas.reserve(n);
  for (int k = 0; k < n; ++k) {
    Eigen::VectorXd g = tasks[k].weight * shared_gradient(tasks[k], s.phi);
    detail::require_finite(g, tasks[k].id, t);
    ctx.grads.push_back(std::move(g));
    Eigen::VectorXd hg = tasks[k].weight * head_gradient(tasks[k], s.thetas[k]);
    detail::require_finite(hg, tasks[k].id + " head", t);
    ctx.next_thetas.push_back(s.thetas[k] - ctx.eta * hg);
  }
  if (counter != nullptr) {
    counter->feedforward_evals += n;  // loss computation preceding the backward pass
    counter->backward_evals += n;
  }
  return ctx;
}

// One committed joint training step: heads follow their own losses, the
// shared vector follows the aggregated task gradients.
inline TrainState step_gradient(const TrainState& s, const std::vector<SyntheticTask>& tasks,
                                const SimConfig& cfg) {
  LookaheadContext ctx = prepare_lookahead(s, tasks, cfg);
  TrainState next;
  Eigen::VectorXd total = Eigen::VectorXd::Zero(s.phi.size());
  for (const Eigen::VectorXd& g : ctx.grads) total += g;
  if (cfg.aggregation == SharedAggregation::kAverage)
    total /= static_cast<double>(tasks.size());
  next.phi = s.phi - ctx.eta * total;
  next.thetas = std::move(ctx.next_thetas);
  next.step = s.step + 1;
  return next;
}

// S^t_{A->j} per the lookahead definition: candidate phi updated by the group
// gradients plus the target's own, compared against the target-only update.
// Returns nothing when the reference loss is below the floor.
inline std::optional<double> lookahead_gain(const TrainState& s,
                                            const std::vector<SyntheticTask>& tasks,
                                            const SimConfig& cfg,
                                            const std::vector<int>& sources, int target,
                                            LookaheadCostCounter* counter = nullptr) {
  if (sources.empty()) throw std::domain_error("lookahead_gain: empty source set");
  LookaheadContext ctx = prepare_lookahead(s, tasks, cfg);
  const int n = static_cast<int>(tasks.size());
  if (target < 0 || target >= n) throw std::out_of_range("lookahead_gain: target out of range");
  Eigen::VectorXd sum = ctx.grads[target];
  for (int i : sources) {
    if (i < 0 || i >= n) throw std::out_of_range("lookahead_gain: source out of range");
    if (i == target)
      throw std::invalid_argument("lookahead_gain: target must not be in the source set");
    sum += ctx.grads[i];
  }
  const Eigen::VectorXd phi_solo = ctx.phi - ctx.eta * ctx.grads[target];
  const Eigen::VectorXd phi_group = ctx.phi - ctx.eta * sum;
  if (counter != nullptr) {
    counter->param_assignments += 3;  // theta^{t+1}, solo phi, group phi
    counter->feedforward_evals += 2;
    counter->highorder_feedforward_evals += 2;
  }
  const double denom = task_loss(tasks[target], phi_solo, ctx.next_thetas[target]);
  if (!(denom >= cfg.loss_floor)) return std::nullopt;
  const double numer = task_loss(tasks[target], phi_group, ctx.next_thetas[target]);
  return 1.0 - numer / denom;
}

// ---------------------------------------------------------------------------
// Collection runs

struct CollectOutput {
  std::vector<StepGainRecord> log;
  GainMatrix gains;
  CoverageSummary coverage;
  LookaheadCostCounter counter;
  TrainState final_state;
  std::int64_t collection_steps = 0;
};

namespace detail {

// Measure all ordered pairs within `scope` (sorted task indices) at the
// current state. Bookkeeping of the cost counter follows the complexity
// model: theta updates and candidate phi vectors count as parameter
// assignments, candidate loss evaluations as high-order feedforwards.
inline StepGainRecord collect_step(const TrainState& s, const std::vector<SyntheticTask>& tasks,
                                   const SimConfig& cfg, const std::vector<int>& scope,
                                   LookaheadCostCounter& counter) {
  LookaheadContext ctx = prepare_lookahead(s, tasks, cfg, &counter);
  StepGainRecord rec;
  rec.step = s.step + 1;
  const int u = static_cast<int>(scope.size());

  counter.param_assignments += u;  // theta_j^{t+1} for the measured tasks

  // Target-only candidates and their reference losses.
  std::vector<Eigen::VectorXd> phi_solo(u);
  std::vector<double> ref_loss(u);
  std::vector<bool> ref_ok(u);
  for (int a = 0; a < u; ++a) {
    const int j = scope[a];
    phi_solo[a] = ctx.phi - ctx.eta * ctx.grads[j];
    counter.param_assignments += 1;
    ref_loss[a] = checked_loss(tasks[j], phi_solo[a], ctx.next_thetas[j], rec.step);
    counter.feedforward_evals += 1;
    counter.highorder_feedforward_evals += 1;
    ref_ok[a] = ref_loss[a] >= cfg.loss_floor;
  }

  // Diagonal entries.
  for (int a = 0; a < u; ++a) {
    const int j = scope[a];
    if (cfg.self_gain == SelfGainPolicy::kZero) {
      rec.gains.push_back(PairGain{j, j, 0.0});
      continue;
    }
    const double denom = checked_loss(tasks[j], ctx.phi, ctx.next_thetas[j], rec.step);
    counter.feedforward_evals += 1;
    counter.highorder_feedforward_evals += 1;
    if (denom >= cfg.loss_floor) {
      rec.gains.push_back(PairGain{j, j, 1.0 - ref_loss[a] / denom});
    } else {
      rec.skipped.emplace_back(j, j);
    }
  }

  // Cross pairs: one candidate phi per unordered pair serves both directions.
  for (int a = 0; a < u; ++a) {
    for (int b = a + 1; b < u; ++b) {
      const int i = scope[a];
      const int j = scope[b];
      const Eigen::VectorXd phi_pair = ctx.phi - ctx.eta * (ctx.grads[i] + ctx.grads[j]);
      counter.param_assignments += 1;
      const double loss_j = checked_loss(tasks[j], phi_pair, ctx.next_thetas[j], rec.step);
      counter.feedforward_evals += 1;
      counter.highorder_feedforward_evals += 1;
      if (ref_ok[b]) {
        rec.gains.push_back(PairGain{i, j, 1.0 - loss_j / ref_loss[b]});
      } else {
        rec.skipped.emplace_back(i, j);
      }
      const double loss_i = checked_loss(tasks[i], phi_pair, ctx.next_thetas[i], rec.step);
      counter.feedforward_evals += 1;
      counter.highorder_feedforward_evals += 1;
      if (ref_ok[a]) {
        rec.gains.push_back(PairGain{j, i, 1.0 - loss_i / ref_loss[a]});
      } else {
        rec.skipped.emplace_back(j, i);
      }
    }
  }
  return rec;
}

inline std::vector<int> draw_subset(int n, Rng& rng) {
  const int size = rng.uniform_int(1, n);
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < size; ++i) {
    const int j = i + rng.uniform_int(0, n - i - 1);
    std::swap(idx[i], idx[j]);
  }
  std::vector<int> scope(idx.begin(), idx.begin() + size);
  std::sort(scope.begin(), scope.end());
  return scope;
}

}  // namespace detail

// Train jointly for `steps` steps, measuring transfer gains at the steps the
// policy dictates, and return the record log, the finalized cumulative gain
// matrix, coverage and cost counters.
inline CollectOutput collect_run(const std::vector<SyntheticTask>& tasks,
                                 const CollectionPolicy& policy, int steps,
                                 const SimConfig& cfg, TrainState state) {
  if (steps < 1) throw std::invalid_argument("collect_run: steps must be >= 1");
  if (policy.interval < 1) throw std::invalid_argument("collect_run: interval must be >= 1");
  detail::require_consistent(state, tasks);

  const int n = static_cast<int>(tasks.size());
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  Rng subset_rng(policy.rng_seed);

  CollectOutput out;
  PairAccumulator acc(n);
  for (int t = 1; t <= steps; ++t) {
    bool collect = true;
    if (policy.mode == CollectionPolicy::Mode::kLazy) collect = ((t - 1) % policy.interval) == 0;
    if (collect) {
      std::vector<int> sampled_scope;
      const std::vector<int>* scope = &all;
      if (policy.mode == CollectionPolicy::Mode::kSampled) {
        sampled_scope = detail::draw_subset(n, subset_rng);
        scope = &sampled_scope;
      }
      StepGainRecord rec = detail::collect_step(state, tasks, cfg, *scope, out.counter);
      accumulate(acc, rec);
      out.log.push_back(std::move(rec));
      ++out.collection_steps;
    }
    state = step_gradient(state, tasks, cfg);
  }
  out.gains = finalize(acc, task_names(tasks), &out.coverage);
  out.final_state = std::move(state);
  return out;
}

// ---------------------------------------------------------------------------
// Theoretical checks

// Gain ordering vs loss ordering for two candidate groups and one target.
// The equivalence is forced by the shared positive denominator.
struct Observation1Report {
  bool valid = false;  // reference loss above the floor
  double gain_a = 0.0, gain_b = 0.0;
  double loss_a = 0.0, loss_b = 0.0;
  bool consistent = false;
};

inline Observation1Report check_observation1(const TrainState& s,
                                             const std::vector<SyntheticTask>& tasks,
                                             const SimConfig& cfg,
                                             const std::vector<int>& group_a,
                                             const std::vector<int>& group_b, int target) {
  LookaheadContext ctx = prepare_lookahead(s, tasks, cfg);
  const int n = static_cast<int>(tasks.size());
  if (target < 0 || target >= n)
    throw std::out_of_range("check_observation1: target out of range");
  auto candidate = [&](const std::vector<int>& group) {
    Eigen::VectorXd sum = ctx.grads[target];
    for (int i : group) {
      if (i < 0 || i >= n) throw std::out_of_range("check_observation1: source out of range");
      if (i == target)
        throw std::invalid_argument("check_observation1: target must not be in a source group");
      sum += ctx.grads[i];
    }
    return Eigen::VectorXd(ctx.phi - ctx.eta * sum);
  };

  Observation1Report rep;
  const Eigen::VectorXd phi_solo = ctx.phi - ctx.eta * ctx.grads[target];
  const double denom = task_loss(tasks[target], phi_solo, ctx.next_thetas[target]);
  rep.valid = denom >= cfg.loss_floor;
  if (!rep.valid) return rep;
  rep.loss_a = task_loss(tasks[target], candidate(group_a), ctx.next_thetas[target]);
  rep.loss_b = task_loss(tasks[target], candidate(group_b), ctx.next_thetas[target]);
  rep.gain_a = 1.0 - rep.loss_a / denom;
  rep.gain_b = 1.0 - rep.loss_b / denom;
  rep.consistent = ((rep.gain_a > rep.gain_b) == (rep.loss_a < rep.loss_b)) &&
                   ((rep.gain_b > rep.gain_a) == (rep.loss_b < rep.loss_a));
  return rep;
}

// Check |S_{A->j} - mean_i S_{i->j}| <= eta (1+|A|) l^2 / C at the current
// state, with l the closed-form Lipschitz bound over the declared parameter
// ball and C the target task's loss offset.
struct Prop1Report {
  bool valid = false;
  std::string invalid_reason;
  double lhs = 0.0, rhs = 0.0;
  double group_gain = 0.0, mean_task_gain = 0.0;
  double lipschitz = 0.0;
  double loss_floor_c = 0.0;
  double eta = 0.0;
  bool holds = false;
};

inline Prop1Report verify_prop1_bound(const TrainState& s,
                                      const std::vector<SyntheticTask>& tasks,
                                      const SimConfig& cfg, const std::vector<int>& group,
                                      int target, double domain_radius) {
  Prop1Report rep;
  if (group.empty()) throw std::domain_error("verify_prop1_bound: empty group");
  const int n = static_cast<int>(tasks.size());
  if (target < 0 || target >= n)
    throw std::out_of_range("verify_prop1_bound: target out of range");
  for (const SyntheticTask& t : tasks) {
    if (t.kind != TaskKind::kQuadratic) {
      rep.invalid_reason = "non-quadratic task " + t.id;
      return rep;
    }
  }
  if (tasks[target].offset <= 0.0) {
    rep.invalid_reason = "target offset c0 must be positive";
    return rep;
  }

  LookaheadContext ctx = prepare_lookahead(s, tasks, cfg);
  rep.eta = ctx.eta;
  rep.loss_floor_c = tasks[target].offset;

  std::vector<Eigen::VectorXd> points;
  points.push_back(ctx.phi);
  const Eigen::VectorXd phi_solo = ctx.phi - ctx.eta * ctx.grads[target];
  points.push_back(phi_solo);
  Eigen::VectorXd group_sum = ctx.grads[target];
  for (int i : group) {
    if (i < 0 || i >= n) throw std::out_of_range("verify_prop1_bound: source out of range");
    if (i == target)
      throw std::invalid_argument("verify_prop1_bound: target must not be in the group");
    group_sum += ctx.grads[i];
    points.push_back(ctx.phi - ctx.eta * (ctx.grads[i] + ctx.grads[target]));
  }
  const Eigen::VectorXd phi_group = ctx.phi - ctx.eta * group_sum;
  points.push_back(phi_group);
  for (const Eigen::VectorXd& p : points) {
    if (p.norm() > domain_radius) {
      rep.invalid_reason = "iterate escaped the declared parameter ball";
      return rep;
    }
  }

  const double denom = task_loss(tasks[target], phi_solo, ctx.next_thetas[target]);
  if (!(denom >= cfg.loss_floor)) {
    rep.invalid_reason = "reference loss below the floor";
    return rep;
  }

  rep.group_gain = 1.0 - task_loss(tasks[target], phi_group, ctx.next_thetas[target]) / denom;
  double sum = 0.0;
  for (int i : group) {
    const Eigen::VectorXd phi_pair = ctx.phi - ctx.eta * (ctx.grads[i] + ctx.grads[target]);
    sum += 1.0 - task_loss(tasks[target], phi_pair, ctx.next_thetas[target]) / denom;
  }
  rep.mean_task_gain = sum / static_cast<double>(group.size());
  rep.lhs = std::abs(rep.group_gain - rep.mean_task_gain);

  double l = 0.0;
  for (const SyntheticTask& t : tasks)
    l = std::max(l, std::max(1.0, t.weight) * shared_lipschitz_bound(t, domain_radius));
  rep.lipschitz = l;
  rep.rhs = rep.eta * (1.0 + static_cast<double>(group.size())) * l * l / rep.loss_floor_c;
  rep.valid = true;
  rep.holds = rep.lhs <= rep.rhs * (1.0 + 1e-12);
  return rep;
}

}  // namespace taskgroup
