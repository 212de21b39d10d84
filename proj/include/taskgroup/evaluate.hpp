#pragma once

#include <Eigen/Core>
#include <limits>
#include <stdexcept>
#include <vector>

#include "taskgroup/simulation.hpp"
#include "taskgroup/synthetic_task.hpp"

namespace taskgroup {

// Result of training each group separately from a common initialization.
// For tasks that appear in several groups (cover mode) the report keeps the
// loss in every containing group and selects the best one per task.
struct GroupEvaluation {
  std::vector<std::vector<int>> groups;
  std::vector<std::vector<double>> group_task_loss;  // aligned with groups[g]
  std::vector<double> solo_loss;                     // per task, singleton training
  std::vector<int> best_group;                       // per task
  std::vector<double> best_loss;                     // per task
  double total_loss = 0.0;
  double total_solo_loss = 0.0;
};

namespace eval_detail {

// Group-wise training: the group's shared vector follows the aggregate of the
// member gradients, each member head follows its own loss. Returns the final
// per-member losses.
inline std::vector<double> train_group(const std::vector<int>& group,
                                       const std::vector<SyntheticTask>& tasks,
                                       int steps, const SimConfig& cfg,
                                       const TrainState& init) {
  Eigen::VectorXd phi = init.phi;
  std::vector<Eigen::VectorXd> thetas;
  thetas.reserve(group.size());
  for (int k : group) thetas.push_back(init.thetas[k]);

  for (int t = 1; t <= steps; ++t) {
    const double eta = cfg.eta.at(t);
    Eigen::VectorXd total = Eigen::VectorXd::Zero(phi.size());
    for (std::size_t g = 0; g < group.size(); ++g) {
      const SyntheticTask& task = tasks[group[g]];
      total += task.weight * shared_gradient(task, phi);
      thetas[g] -= eta * task.weight * head_gradient(task, thetas[g]);
    }
    if (cfg.aggregation == SharedAggregation::kAverage)
      total /= static_cast<double>(group.size());
    if (!total.allFinite()) throw numeric_error("non-finite gradient during group training");
    phi -= eta * total;
  }

  std::vector<double> losses;
  losses.reserve(group.size());
  for (std::size_t g = 0; g < group.size(); ++g)
    losses.push_back(task_loss(tasks[group[g]], phi, thetas[g]));
  return losses;
}

}  // namespace eval_detail

inline GroupEvaluation evaluate_grouping(const std::vector<std::vector<int>>& groups,
                                         const std::vector<SyntheticTask>& tasks,
                                         int steps, const SimConfig& cfg,
                                         const TrainState& init) {
  if (steps < 0) throw std::invalid_argument("evaluate_grouping: steps must be >= 0");
  detail::require_consistent(init, tasks);
  const int n = static_cast<int>(tasks.size());

  GroupEvaluation report;
  report.groups = groups;
  report.group_task_loss.reserve(groups.size());
  report.best_group.assign(n, -1);
  report.best_loss.assign(n, std::numeric_limits<double>::infinity());

  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) throw std::domain_error("evaluate_grouping: empty group");
    std::vector<double> losses = eval_detail::train_group(groups[g], tasks, steps, cfg, init);
    for (std::size_t idx = 0; idx < groups[g].size(); ++idx) {
      const int task = groups[g][idx];
      if (task < 0 || task >= n) throw std::out_of_range("evaluate_grouping: task out of range");
      if (losses[idx] < report.best_loss[task]) {
        report.best_loss[task] = losses[idx];
        report.best_group[task] = static_cast<int>(g);
      }
    }
    report.group_task_loss.push_back(std::move(losses));
  }

  for (int i = 0; i < n; ++i) {
    if (report.best_group[i] < 0)
      throw std::invalid_argument("evaluate_grouping: task " + tasks[i].id + " not covered");
    report.solo_loss.push_back(eval_detail::train_group({i}, tasks, steps, cfg, init).front());
  }

  for (int i = 0; i < n; ++i) {
    report.total_loss += report.best_loss[i];
    report.total_solo_loss += report.solo_loss[i];
  }
  return report;
}

}  // namespace taskgroup
