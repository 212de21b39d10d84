#pragma once

#include <Eigen/Core>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "taskgroup/cost_model.hpp"
#include "taskgroup/gain_matrix.hpp"
#include "taskgroup/grouping.hpp"
#include "taskgroup/simulation.hpp"
#include "taskgroup/synthetic_task.hpp"

namespace taskgroup {

using nlohmann::json;

namespace io_detail {

inline Eigen::MatrixXd json_to_matrix(const json& j) {
  if (!j.is_array() || j.empty()) throw std::invalid_argument("expected a non-empty matrix");
  const int rows = static_cast<int>(j.size());
  const int cols = static_cast<int>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (static_cast<int>(j.at(r).size()) != cols)
      throw std::invalid_argument("ragged matrix rows");
    for (int c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  }
  return m;
}

inline Eigen::VectorXd json_to_vector(const json& j) {
  if (!j.is_array()) throw std::invalid_argument("expected a vector");
  Eigen::VectorXd v(static_cast<int>(j.size()));
  for (int i = 0; i < v.size(); ++i) v(i) = j.at(i).get<double>();
  return v;
}

inline json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

}  // namespace io_detail

// ---------------------------------------------------------------------------
// Schedules, policies, simulator config

inline EtaSchedule parse_eta(const json& j) {
  EtaSchedule eta;
  if (j.is_null()) return eta;
  const std::string kind = j.value("kind", "constant");
  if (kind == "constant")
    eta.kind = EtaSchedule::Kind::kConstant;
  else if (kind == "inv_t")
    eta.kind = EtaSchedule::Kind::kInvT;
  else
    throw std::invalid_argument("unknown eta kind: " + kind);
  eta.base = j.value("value", 0.1);
  if (eta.base <= 0.0) throw std::invalid_argument("eta value must be positive");
  return eta;
}

inline json eta_to_json(const EtaSchedule& eta) {
  return json{{"kind", eta.kind == EtaSchedule::Kind::kConstant ? "constant" : "inv_t"},
              {"value", eta.base}};
}

inline CollectionPolicy parse_policy(const json& j) {
  CollectionPolicy p;
  if (j.is_null()) return p;
  const std::string mode = j.value("mode", "full");
  if (mode == "full")
    p.mode = CollectionPolicy::Mode::kFull;
  else if (mode == "sampled")
    p.mode = CollectionPolicy::Mode::kSampled;
  else if (mode == "lazy")
    p.mode = CollectionPolicy::Mode::kLazy;
  else
    throw std::invalid_argument("unknown collection mode: " + mode);
  p.interval = j.value("interval", 1);
  if (p.interval < 1) throw std::invalid_argument("collection interval must be >= 1");
  p.rng_seed = j.value("seed", std::uint64_t{0});
  return p;
}

inline json policy_to_json(const CollectionPolicy& p) {
  std::string mode = "full";
  if (p.mode == CollectionPolicy::Mode::kSampled) mode = "sampled";
  if (p.mode == CollectionPolicy::Mode::kLazy) mode = "lazy";
  return json{{"mode", mode}, {"interval", p.interval}, {"seed", p.rng_seed}};
}

inline SimConfig parse_sim_config(const json& root) {
  SimConfig cfg;
  if (root.contains("eta")) cfg.eta = parse_eta(root.at("eta"));
  const std::string self_gain = root.value("self_gain", "solo_step");
  if (self_gain == "solo_step")
    cfg.self_gain = SelfGainPolicy::kSoloStep;
  else if (self_gain == "zero")
    cfg.self_gain = SelfGainPolicy::kZero;
  else
    throw std::invalid_argument("unknown self_gain policy: " + self_gain);
  const std::string agg = root.value("aggregation", "sum");
  if (agg == "sum")
    cfg.aggregation = SharedAggregation::kSum;
  else if (agg == "average")
    cfg.aggregation = SharedAggregation::kAverage;
  else
    throw std::invalid_argument("unknown aggregation: " + agg);
  cfg.loss_floor = root.value("loss_floor", 1e-12);
  return cfg;
}

inline json sim_config_to_json(const SimConfig& cfg) {
  return json{{"eta", eta_to_json(cfg.eta)},
              {"self_gain", cfg.self_gain == SelfGainPolicy::kSoloStep ? "solo_step" : "zero"},
              {"aggregation", cfg.aggregation == SharedAggregation::kSum ? "sum" : "average"},
              {"loss_floor", cfg.loss_floor}};
}

// ---------------------------------------------------------------------------
// Tasks

inline SyntheticTask parse_inline_task(const json& j) {
  SyntheticTask t;
  t.id = j.at("id").get<std::string>();
  const std::string kind = j.value("kind", "quadratic");
  t.weight = j.value("weight", 1.0);
  t.offset = j.value("offset", 0.0);
  t.head_target = j.contains("head_target") ? io_detail::json_to_vector(j.at("head_target"))
                                            : Eigen::VectorXd::Zero(1).eval();
  if (kind == "quadratic") {
    t.kind = TaskKind::kQuadratic;
    t.curvature = io_detail::json_to_matrix(j.at("curvature"));
    t.center = io_detail::json_to_vector(j.at("center"));
  } else if (kind == "linear_regression") {
    t.kind = TaskKind::kLinearRegression;
    t.design = io_detail::json_to_matrix(j.at("design"));
    t.targets = io_detail::json_to_vector(j.at("targets"));
  } else {
    throw std::invalid_argument("unknown task kind: " + kind);
  }
  validate(t);
  return t;
}

inline std::vector<SyntheticTask> parse_tasks(const json& j) {
  if (j.contains("inline")) {
    std::vector<SyntheticTask> tasks;
    for (const json& tj : j.at("inline")) tasks.push_back(parse_inline_task(tj));
    if (tasks.empty()) throw std::invalid_argument("inline task list is empty");
    return tasks;
  }
  if (!j.contains("generator"))
    throw std::invalid_argument("task config needs either 'inline' or 'generator'");
  const json& g = j.at("generator");
  const std::string kind = g.value("kind", "quadratic");
  Rng rng(g.value("seed", std::uint64_t{1}));
  if (kind == "quadratic") {
    QuadraticFamilyOptions opt;
    opt.tasks = g.value("tasks", 4);
    opt.shared_dim = g.value("shared_dim", 3);
    opt.head_dim = g.value("head_dim", 2);
    opt.curvature_min = g.value("curvature_min", 0.5);
    opt.curvature_max = g.value("curvature_max", 2.0);
    opt.center_spread = g.value("center_spread", 1.0);
    opt.offset_min = g.value("offset_min", 0.05);
    opt.offset_max = g.value("offset_max", 0.2);
    opt.clusters = g.value("clusters", 0);
    opt.cluster_jitter = g.value("cluster_jitter", 0.05);
    return make_quadratic_family(opt, rng);
  }
  if (kind == "linear_regression") {
    LinearRegressionFamilyOptions opt;
    opt.tasks = g.value("tasks", 4);
    opt.shared_dim = g.value("shared_dim", 3);
    opt.head_dim = g.value("head_dim", 2);
    opt.samples = g.value("samples", 8);
    opt.offset_min = g.value("offset_min", 0.05);
    opt.offset_max = g.value("offset_max", 0.2);
    return make_linear_regression_family(opt, rng);
  }
  throw std::invalid_argument("unknown generator kind: " + kind);
}

// Either a seeded random state or literal parameter values ("phi" plus
// optional "thetas", defaulting to zero heads).
inline TrainState parse_init(const json& root, const std::vector<SyntheticTask>& tasks) {
  json init = root.value("init", json::object());
  if (init.contains("phi")) {
    TrainState state;
    state.phi = io_detail::json_to_vector(init.at("phi"));
    if (init.contains("thetas")) {
      for (const json& tj : init.at("thetas"))
        state.thetas.push_back(io_detail::json_to_vector(tj));
    } else {
      for (const SyntheticTask& t : tasks)
        state.thetas.push_back(Eigen::VectorXd::Zero(t.head_dim()));
    }
    detail::require_consistent(state, tasks);
    return state;
  }
  Rng rng(init.value("seed", std::uint64_t{11}));
  return make_initial_state(tasks, rng, init.value("phi_scale", 1.0),
                            init.value("theta_scale", 1.0));
}

// ---------------------------------------------------------------------------
// Grouping problems and results

inline GroupingProblem parse_problem(const json& j, GainMatrix gains) {
  GroupingProblem p;
  p.gains = std::move(gains);
  p.num_groups = j.at("m").get<int>();
  const std::string mode = j.value("mode", "cover");
  if (mode == "cover")
    p.mode = AssignMode::kCover;
  else if (mode == "partition")
    p.mode = AssignMode::kPartition;
  else
    throw std::invalid_argument("unknown assignment mode: " + mode);
  if (j.contains("budget") && !j.at("budget").is_null()) {
    BudgetConstraint b;
    b.per_task = io_detail::json_to_matrix(j.at("budget").at("B"));
    b.caps = io_detail::json_to_vector(j.at("budget").at("b"));
    p.budget = std::move(b);
  }
  if (j.contains("size_bounds") && !j.at("size_bounds").is_null()) {
    SizeBounds s;
    for (const json& v : j.at("size_bounds").at("min")) s.min_size.push_back(v.get<int>());
    for (const json& v : j.at("size_bounds").at("max")) s.max_size.push_back(v.get<int>());
    p.size_bounds = std::move(s);
  }
  validate(p);
  return p;
}

inline json problem_to_json(const GroupingProblem& p) {
  json j{{"m", p.num_groups},
         {"mode", p.mode == AssignMode::kCover ? "cover" : "partition"}};
  if (p.budget) {
    j["budget"] = json{{"B", io_detail::matrix_to_json(p.budget->per_task)},
                       {"b", io_detail::vector_to_json(p.budget->caps)}};
  }
  if (p.size_bounds) {
    j["size_bounds"] = json{{"min", p.size_bounds->min_size}, {"max", p.size_bounds->max_size}};
  }
  return j;
}

// Solver stats in artifacts carry only the deterministic fields; wall time
// stays on stderr so fixed-seed runs are byte-identical.
inline json assignment_to_json(const GroupAssignment& a, const std::vector<std::string>& names) {
  json j;
  j["feasible"] = a.feasible;
  if (!a.feasible) {
    j["infeasible_reason"] = a.infeasible_reason;
    j["stats"] = json{{"nodes", a.stats.nodes}, {"bound_prunings", a.stats.bound_prunings}};
    return j;
  }
  json groups = json::array();
  for (const std::vector<int>& g : a.groups) {
    json names_in_group = json::array();
    for (int i : g) names_in_group.push_back(names.at(i));
    groups.push_back(std::move(names_in_group));
  }
  j["groups"] = std::move(groups);
  j["objective"] = a.objective;
  json best = json::object();
  for (std::size_t i = 0; i < a.best_group_of_task.size(); ++i)
    best[names.at(i)] = a.best_group_of_task[i];
  j["per_task_best_group"] = std::move(best);
  j["stats"] = json{{"nodes", a.stats.nodes}, {"bound_prunings", a.stats.bound_prunings}};
  return j;
}

inline json counter_to_json(const LookaheadCostCounter& c) {
  return json{{"F", c.feedforward_evals},
              {"B", c.backward_evals},
              {"C", c.param_assignments},
              {"F_highorder", c.highorder_feedforward_evals}};
}

inline LookaheadCostCounter counter_from_json(const json& j) {
  LookaheadCostCounter c;
  c.feedforward_evals = j.at("F").get<std::int64_t>();
  c.backward_evals = j.at("B").get<std::int64_t>();
  c.param_assignments = j.at("C").get<std::int64_t>();
  c.highorder_feedforward_evals = j.value("F_highorder", std::int64_t{0});
  return c;
}

// ---------------------------------------------------------------------------
// Files

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  in >> j;
  return j;
}

inline void save_json_file(const json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace taskgroup
