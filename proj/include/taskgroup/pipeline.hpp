#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "taskgroup/brute_force.hpp"
#include "taskgroup/cost_model.hpp"
#include "taskgroup/evaluate.hpp"
#include "taskgroup/feasibility.hpp"
#include "taskgroup/io.hpp"
#include "taskgroup/mip_export.hpp"
#include "taskgroup/solver.hpp"
#include "taskgroup/verify.hpp"

namespace taskgroup {

namespace cli_detail {

// Deterministic parallel map: workers pull indices from a shared cursor and
// write into caller-owned slots, so results do not depend on scheduling.
template <typename Fn>
inline void parallel_for(std::size_t count, int threads, Fn&& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> cursor{0};
  std::vector<std::future<void>> workers;
  const std::size_t worker_count = std::min<std::size_t>(threads, count);
  for (std::size_t w = 0; w < worker_count; ++w) {
    workers.push_back(std::async(std::launch::async, [&]() {
      while (true) {
        const std::size_t i = cursor.fetch_add(1);
        if (i >= count) return;
        fn(i);
      }
    }));
  }
  for (auto& f : workers) f.get();
}

inline std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

inline std::vector<std::vector<int>> groups_from_names(const json& groups_json,
                                                       const std::vector<std::string>& names) {
  std::vector<std::vector<int>> groups;
  for (const json& g : groups_json) {
    std::vector<int> group;
    for (const json& name : g) {
      const std::string id = name.get<std::string>();
      const auto it = std::find(names.begin(), names.end(), id);
      if (it == names.end()) throw std::invalid_argument("unknown task name: " + id);
      group.push_back(static_cast<int>(it - names.begin()));
    }
    groups.push_back(std::move(group));
  }
  return groups;
}

}  // namespace cli_detail

// ---------------------------------------------------------------------------
// collect

inline int run_collect(const json& config, const std::string& out_dir, std::ostream& out) {
  const std::vector<SyntheticTask> tasks = parse_tasks(config.at("tasks"));
  const int steps = config.value("steps", 100);
  const CollectionPolicy policy = parse_policy(config.value("policy", json()));
  const SimConfig cfg = parse_sim_config(config);
  const TrainState init = parse_init(config, tasks);

  std::filesystem::create_directories(out_dir);
  const json outputs = config.value("outputs", json::object());
  const std::string gains_path =
      cli_detail::join_path(out_dir, outputs.value("gains_csv", "gains.csv"));
  const std::string records_path =
      cli_detail::join_path(out_dir, outputs.value("records", "records.jsonl"));
  const std::string counters_path =
      cli_detail::join_path(out_dir, outputs.value("counters", "counters.json"));

  const CollectOutput result = collect_run(tasks, policy, steps, cfg, init);

  save_gain_csv(result.gains, gains_path);
  save_record_log(result.log, records_path);
  save_json_file(counter_to_json(result.counter), counters_path);

  // Echo the resolved configuration so the artifacts are self-describing.
  json resolved = config;
  resolved["steps"] = steps;
  resolved["policy"] = policy_to_json(policy);
  resolved.update(sim_config_to_json(cfg));
  save_json_file(resolved, cli_detail::join_path(out_dir, "config.json"));

  std::int64_t skipped = 0;
  for (const StepGainRecord& rec : result.log) skipped += static_cast<std::int64_t>(rec.skipped.size());
  out << "collected " << result.collection_steps << " steps over " << steps << " training steps\n";
  out << "coverage: " << result.coverage.observed_pairs << "/" << result.coverage.total_pairs
      << " pairs observed";
  if (!result.coverage.uncovered.empty())
    out << " (" << result.coverage.uncovered.size() << " uncovered, finalized to 0)";
  out << "; " << skipped << " measurements skipped by the loss floor\n";
  out << "wrote " << gains_path << ", " << records_path << ", " << counters_path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// solve / oracle / export-mip

inline GroupingProblem load_problem(const std::string& gains_csv, const std::string& problem_path) {
  const json pj = load_json_file(problem_path);
  std::string csv = gains_csv;
  if (csv.empty()) csv = pj.value("gains_csv", "");
  if (csv.empty())
    throw std::invalid_argument("no gain matrix: pass --gains or set gains_csv in the problem file");
  return parse_problem(pj, load_gain_csv(csv));
}

inline int run_solve(const std::string& gains_csv, const std::string& problem_path,
                     const std::string& out_path, int threads, bool use_oracle,
                     std::ostream& out) {
  const GroupingProblem problem = load_problem(gains_csv, problem_path);
  const GroupAssignment result =
      use_oracle ? solve_bruteforce(problem) : solve(problem, SolveOptions{threads});

  json rj = assignment_to_json(result, problem.gains.names);
  rj["problem"] = problem_to_json(problem);
  if (!out_path.empty()) save_json_file(rj, out_path);

  if (!result.feasible) {
    out << "infeasible: " << result.infeasible_reason << "\n";
    return 4;
  }
  out << "objective: " << detail::format_double(result.objective) << "\n";
  for (std::size_t g = 0; g < result.groups.size(); ++g) {
    out << "group " << g << ":";
    for (int i : result.groups[g]) out << ' ' << problem.gains.names[i];
    out << "\n";
  }
  std::cerr << "nodes=" << result.stats.nodes << " prunings=" << result.stats.bound_prunings
            << " wall=" << result.stats.wall_seconds << "s\n";
  return 0;
}

inline int run_export_mip(const std::string& gains_csv, const std::string& problem_path,
                          const std::string& out_path, std::ostream& out) {
  const GroupingProblem problem = load_problem(gains_csv, problem_path);
  export_mip(problem, out_path);
  out << "wrote " << out_path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

inline int run_evaluate(const json& config, const std::string& out_path, std::ostream& out) {
  const std::vector<SyntheticTask> tasks = parse_tasks(config.at("tasks"));
  const std::vector<std::string> names = task_names(tasks);
  const SimConfig cfg = parse_sim_config(config);
  const TrainState init = parse_init(config, tasks);
  const int steps = config.value("steps", 80);

  std::vector<std::vector<int>> groups;
  if (config.contains("groups")) {
    groups = cli_detail::groups_from_names(config.at("groups"), names);
  } else if (config.contains("result")) {
    const json rj = load_json_file(config.at("result").get<std::string>());
    if (!rj.value("feasible", false))
      throw std::invalid_argument("result file does not contain a feasible assignment");
    groups = cli_detail::groups_from_names(rj.at("groups"), names);
  } else {
    throw std::invalid_argument("evaluate config needs 'groups' or 'result'");
  }

  const GroupEvaluation eval = evaluate_grouping(groups, tasks, steps, cfg, init);

  json report;
  report["steps"] = steps;
  json jgroups = json::array();
  for (const std::vector<int>& g : groups) {
    json names_in_group = json::array();
    for (int i : g) names_in_group.push_back(names[i]);
    jgroups.push_back(std::move(names_in_group));
  }
  report["groups"] = std::move(jgroups);
  json per_task = json::object();
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    per_task[names[i]] = json{{"best_group", eval.best_group[i]},
                              {"best_loss", eval.best_loss[i]},
                              {"solo_loss", eval.solo_loss[i]}};
  }
  report["per_task"] = std::move(per_task);
  report["group_task_loss"] = eval.group_task_loss;
  report["total_loss"] = eval.total_loss;
  report["total_solo_loss"] = eval.total_solo_loss;
  if (!out_path.empty()) save_json_file(report, out_path);
  out << "total loss " << detail::format_double(eval.total_loss) << " vs solo "
      << detail::format_double(eval.total_solo_loss) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// verify

inline int run_verify(std::uint64_t seed, int observation_instances, int prop1_instances,
                      double domain_radius, const std::string& out_path, std::ostream& out) {
  const Observation1Campaign obs = run_observation1_campaign(seed, observation_instances);
  const Prop1Campaign prop = run_prop1_campaign(seed + 1, prop1_instances, domain_radius);
  const EtaSweep sweep = run_eta_sweep(seed + 2, 0.1, 10, domain_radius);

  json report;
  report["observation1"] = json{{"instances", obs.instances},
                                {"valid", obs.valid},
                                {"consistent", obs.consistent},
                                {"violations", obs.violations}};
  report["proposition1"] = json{{"instances", prop.instances},
                                {"valid", prop.valid},
                                {"holds", prop.holds},
                                {"violations", prop.violations},
                                {"invalid", prop.invalid_reasons}};
  json rows = json::array();
  for (const Prop1Report& row : sweep.rows)
    rows.push_back(json{{"eta", row.eta},
                        {"lhs", row.lhs},
                        {"rhs", row.rhs},
                        {"valid", row.valid},
                        {"holds", row.holds}});
  report["eta_sweep"] = json{{"rows", std::move(rows)},
                             {"all_hold", sweep.all_hold},
                             {"max_ratio", sweep.max_ratio},
                             {"ratio_bounded", sweep.ratio_bounded},
                             {"tail_monotone", sweep.tail_monotone},
                             {"full_monotone", sweep.full_monotone}};
  const bool ok = obs.ok() && prop.ok() && sweep.all_hold && sweep.ratio_bounded &&
                  sweep.tail_monotone && obs.valid > 0 && prop.valid > 0;
  report["ok"] = ok;
  if (!out_path.empty()) save_json_file(report, out_path);

  out << "observation1: " << obs.consistent << "/" << obs.valid << " consistent\n";
  out << "proposition1: " << prop.holds << "/" << prop.valid << " hold\n";
  out << "eta sweep: all_hold=" << sweep.all_hold << " ratio_bounded=" << sweep.ratio_bounded
      << " tail_monotone=" << sweep.tail_monotone << " full_monotone=" << sweep.full_monotone
      << "\n";
  return ok ? 0 : 3;
}

// ---------------------------------------------------------------------------
// cost

inline int run_cost(long long n, const std::string& method_name, double unit_f, double unit_b,
                    double unit_c, bool include_main_text_variant,
                    const std::string& audit_counters_path, const std::string& audit_log_path,
                    const std::string& audit_mode, const std::string& out_path,
                    std::ostream& out) {
  CostProfile profile;
  profile.n = n;
  profile.unit_f = unit_f;
  profile.unit_b = unit_b;
  profile.unit_c = unit_c;
  if (method_name == "tag")
    profile.method = CostMethod::kTag;
  else if (method_name == "ours")
    profile.method = CostMethod::kOurs;
  else if (method_name == "ours-sampling")
    profile.method = CostMethod::kOursSampling;
  else
    throw std::invalid_argument("unknown cost method: " + method_name);

  const CostTotal total = total_cost(profile);
  json report;
  report["n"] = n;
  report["method"] = method_name;
  report["coefficients"] = json{{"F", total.f_coeff}, {"B", total.b_coeff}, {"C", total.c_coeff}};
  report["parts"] = json{{"loss_F", total.parts.loss_f.value()},
                         {"grad_B", total.parts.grad_b.value()},
                         {"update_C", total.parts.update_c.value()},
                         {"highorder_F", total.parts.highorder_f.value()}};
  report["total"] = total.total;
  if (include_main_text_variant) {
    const CostBreakdown mt = cost_parts_main_text_ours(n);
    report["main_text_ours"] = json{{"F", mt.total_f().value()},
                                    {"B", mt.total_b().value()},
                                    {"C", mt.total_c().value()}};
  }

  if (!audit_counters_path.empty()) {
    if (audit_log_path.empty())
      throw std::invalid_argument("--audit-counters also needs --audit-log");
    const LookaheadCostCounter counter = counter_from_json(load_json_file(audit_counters_path));
    const std::vector<StepGainRecord> log = load_record_log(audit_log_path);
    CollectionPolicy::Mode mode = CollectionPolicy::Mode::kFull;
    if (audit_mode == "sampled")
      mode = CollectionPolicy::Mode::kSampled;
    else if (audit_mode != "full" && audit_mode != "lazy")
      throw std::invalid_argument("audit mode must be full, lazy or sampled");
    const CounterAudit audit = audit_against_counters(static_cast<int>(n), mode, counter, log);
    report["audit"] = json{{"pass", audit.pass},
                           {"mode", audit.mode},
                           {"collection_steps", audit.collection_steps},
                           {"measured",
                            json{{"F", audit.measured_feedforward_per_step},
                                 {"F_highorder", audit.measured_highorder_per_step},
                                 {"B", audit.measured_backward_per_step},
                                 {"C", audit.measured_assignments_per_step}}},
                           {"expected",
                            json{{"F", audit.expected_feedforward_per_step},
                                 {"F_highorder", audit.expected_highorder_per_step},
                                 {"B", audit.expected_backward_per_step},
                                 {"C", audit.expected_assignments_per_step}}},
                           {"notes", audit.notes}};
  }

  if (!out_path.empty()) save_json_file(report, out_path);
  out << report.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// pipeline

// Full loop: collect gains once, then for each requested group count solve,
// evaluate the solved grouping, and compare against the random-grouping mean
// (10 repeats by default), the singleton analog and the all-in-one analog.
inline int run_pipeline(const json& config, const std::string& out_dir, int threads,
                        std::ostream& out) {
  if (!config.contains("seed"))
    throw std::invalid_argument("pipeline config requires a seed");
  const std::uint64_t seed = config.at("seed").get<std::uint64_t>();

  // Resolve task and init seeds from the root seed when absent.
  json resolved = config;
  if (resolved.contains("tasks") && resolved["tasks"].contains("generator") &&
      !resolved["tasks"]["generator"].contains("seed"))
    resolved["tasks"]["generator"]["seed"] = seed;
  if (!resolved.contains("init")) resolved["init"] = json::object();
  if (!resolved["init"].contains("seed")) resolved["init"]["seed"] = seed + 1;

  const std::vector<SyntheticTask> tasks = parse_tasks(resolved.at("tasks"));
  const std::vector<std::string> names = task_names(tasks);
  const int n = static_cast<int>(tasks.size());

  const json collect_cfg = resolved.value("collect", json::object());
  const int collect_steps = collect_cfg.value("steps", 100);
  CollectionPolicy policy = parse_policy(collect_cfg.value("policy", json()));
  if (policy.mode == CollectionPolicy::Mode::kSampled && policy.rng_seed == 0)
    policy.rng_seed = seed + 2;
  const SimConfig sim_cfg = parse_sim_config(collect_cfg);
  const TrainState init = parse_init(resolved, tasks);

  const json problem_cfg = resolved.value("problem", json::object());
  std::vector<int> m_values;
  if (problem_cfg.contains("m_values"))
    for (const json& v : problem_cfg.at("m_values")) m_values.push_back(v.get<int>());
  else
    m_values.push_back(problem_cfg.value("m", 2));
  const std::string mode_name = problem_cfg.value("mode", "cover");
  const int evaluate_steps = resolved.value("evaluate_steps", 80);
  const int random_repeats = resolved.value("random_repeats", 10);

  std::filesystem::create_directories(out_dir);
  save_json_file(resolved, cli_detail::join_path(out_dir, "config.json"));

  const CollectOutput collected = collect_run(tasks, policy, collect_steps, sim_cfg, init);
  save_gain_csv(collected.gains, cli_detail::join_path(out_dir, "gains.csv"));
  save_record_log(collected.log, cli_detail::join_path(out_dir, "records.jsonl"));
  save_json_file(counter_to_json(collected.counter),
                 cli_detail::join_path(out_dir, "counters.json"));

  json summary;
  summary["seed"] = seed;
  summary["tasks"] = names;
  json per_m = json::array();
  std::ostringstream csv;
  csv << "m,ours_objective,ours_total_loss,random_mean_total_loss,stl_total_loss,mtl_total_loss\n";

  // Reference groupings shared across m values.
  std::vector<std::vector<int>> singleton_groups;
  for (int i = 0; i < n; ++i) singleton_groups.push_back({i});
  std::vector<std::vector<int>> all_in_one(1);
  for (int i = 0; i < n; ++i) all_in_one[0].push_back(i);
  const GroupEvaluation stl_eval =
      evaluate_grouping(singleton_groups, tasks, evaluate_steps, sim_cfg, init);
  const GroupEvaluation mtl_eval =
      evaluate_grouping(all_in_one, tasks, evaluate_steps, sim_cfg, init);

  bool any_infeasible = false;
  for (const int m : m_values) {
    GroupingProblem problem;
    problem.gains = collected.gains;
    problem.num_groups = m;
    problem.mode = mode_name == "partition" ? AssignMode::kPartition : AssignMode::kCover;
    if (problem_cfg.contains("size_bounds") && !problem_cfg.at("size_bounds").is_null()) {
      SizeBounds bounds;
      const json& sb = problem_cfg.at("size_bounds");
      auto broadcast = [m](const json& v) {
        std::vector<int> res;
        if (v.is_number_integer())
          res.assign(m, v.get<int>());
        else
          for (const json& e : v) res.push_back(e.get<int>());
        return res;
      };
      bounds.min_size = broadcast(sb.at("min"));
      bounds.max_size = broadcast(sb.at("max"));
      problem.size_bounds = std::move(bounds);
    }
    if (problem_cfg.contains("budget") && !problem_cfg.at("budget").is_null()) {
      const json& bj = problem_cfg.at("budget");
      BudgetConstraint budget;
      const Eigen::VectorXd per_task = io_detail::json_to_vector(bj.at("per_task"));
      budget.per_task = per_task.replicate(1, m);
      budget.caps = Eigen::VectorXd::Constant(m, bj.at("cap").get<double>());
      problem.budget = std::move(budget);
    }
    validate(problem);

    const GroupAssignment ours = solve(problem, SolveOptions{1});
    json rj = assignment_to_json(ours, names);
    rj["problem"] = problem_to_json(problem);
    save_json_file(rj, cli_detail::join_path(out_dir, "result_m" + std::to_string(m) + ".json"));

    json entry;
    entry["m"] = m;
    entry["feasible"] = ours.feasible;
    if (!ours.feasible) {
      entry["infeasible_reason"] = ours.infeasible_reason;
      per_m.push_back(std::move(entry));
      any_infeasible = true;
      continue;
    }

    // Random feasible groupings, sampled uniformly from the enumerated space.
    const std::vector<std::vector<std::vector<int>>> feasible = enumerate_feasible(problem);
    Rng baseline_rng(seed ^ (0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(m + 1)));
    std::vector<std::vector<std::vector<int>>> jobs;
    jobs.push_back(ours.groups);
    for (int r = 0; r < random_repeats; ++r) {
      const int idx = baseline_rng.uniform_int(0, static_cast<int>(feasible.size()) - 1);
      jobs.push_back(feasible[idx]);
    }

    std::vector<GroupEvaluation> evals(jobs.size());
    cli_detail::parallel_for(jobs.size(), threads, [&](std::size_t i) {
      evals[i] = evaluate_grouping(jobs[i], tasks, evaluate_steps, sim_cfg, init);
    });

    const GroupEvaluation& ours_eval = evals[0];
    double random_mean = 0.0;
    json random_totals = json::array();
    for (int r = 0; r < random_repeats; ++r) {
      random_mean += evals[r + 1].total_loss;
      random_totals.push_back(evals[r + 1].total_loss);
    }
    random_mean /= std::max(1, random_repeats);

    json eval_json;
    eval_json["total_loss"] = ours_eval.total_loss;
    eval_json["total_solo_loss"] = ours_eval.total_solo_loss;
    json per_task = json::object();
    for (int i = 0; i < n; ++i)
      per_task[names[i]] = json{{"best_group", ours_eval.best_group[i]},
                                {"best_loss", ours_eval.best_loss[i]},
                                {"solo_loss", ours_eval.solo_loss[i]}};
    eval_json["per_task"] = std::move(per_task);
    save_json_file(eval_json, cli_detail::join_path(out_dir, "eval_m" + std::to_string(m) + ".json"));

    entry["objective"] = ours.objective;
    entry["ours_total_loss"] = ours_eval.total_loss;
    entry["random_mean_total_loss"] = random_mean;
    entry["random_total_losses"] = std::move(random_totals);
    entry["stl_total_loss"] = stl_eval.total_loss;
    entry["mtl_total_loss"] = mtl_eval.total_loss;
    json jg = json::array();
    for (const std::vector<int>& g : ours.groups) {
      json gnames = json::array();
      for (int i : g) gnames.push_back(names[i]);
      jg.push_back(std::move(gnames));
    }
    entry["groups"] = std::move(jg);
    per_m.push_back(std::move(entry));

    csv << m << ',' << detail::format_double(ours.objective) << ','
        << detail::format_double(ours_eval.total_loss) << ','
        << detail::format_double(random_mean) << ','
        << detail::format_double(stl_eval.total_loss) << ','
        << detail::format_double(mtl_eval.total_loss) << '\n';
  }
  summary["per_m"] = std::move(per_m);
  save_json_file(summary, cli_detail::join_path(out_dir, "summary.json"));
  {
    std::ofstream csv_out(cli_detail::join_path(out_dir, "summary.csv"), std::ios::binary);
    if (!csv_out) throw std::runtime_error("cannot open summary.csv");
    csv_out << csv.str();
  }
  out << "pipeline wrote " << out_dir << " (" << m_values.size() << " split value(s))\n";
  return any_infeasible ? 4 : 0;
}

}  // namespace taskgroup
