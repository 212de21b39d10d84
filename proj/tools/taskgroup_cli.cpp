// Command-line front end: collect transfer gains from simulated multi-task
// training, solve grouping problems exactly, export MILP models, verify the
// theoretical properties, evaluate cost formulas, and run the end-to-end
// pipeline.
//
// Exit codes: 0 ok, 2 input/config error, 3 numeric failure or verification
// violation, 4 infeasible problem.

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "taskgroup/taskgroup.hpp"

namespace {

int dispatch(int argc, char** argv) {
  CLI::App app{"task grouping toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string gains_path;
  std::string problem_path;
  std::string out_path;
  std::uint64_t seed = 1;
  int threads = 1;

  auto* collect = app.add_subcommand("collect", "simulate training and collect transfer gains");
  collect->add_option("--config", config_path, "run config JSON")->required();
  collect->add_option("--out", out_path, "output directory")->required();

  auto* solve_cmd = app.add_subcommand("solve", "solve a grouping problem exactly");
  solve_cmd->add_option("--gains", gains_path, "gain matrix CSV");
  solve_cmd->add_option("--problem", problem_path, "problem JSON")->required();
  solve_cmd->add_option("--out", out_path, "result JSON path");
  solve_cmd->add_option("--threads", threads, "worker threads");

  auto* oracle_cmd = app.add_subcommand("oracle", "solve by exhaustive enumeration");
  oracle_cmd->add_option("--gains", gains_path, "gain matrix CSV");
  oracle_cmd->add_option("--problem", problem_path, "problem JSON")->required();
  oracle_cmd->add_option("--out", out_path, "result JSON path");

  auto* export_cmd = app.add_subcommand("export-mip", "write the linearized MILP in LP format");
  export_cmd->add_option("--gains", gains_path, "gain matrix CSV");
  export_cmd->add_option("--problem", problem_path, "problem JSON")->required();
  export_cmd->add_option("--out", out_path, "LP file path")->required();

  auto* evaluate_cmd = app.add_subcommand("evaluate", "train groups and report per-task losses");
  evaluate_cmd->add_option("--config", config_path, "evaluation config JSON")->required();
  evaluate_cmd->add_option("--out", out_path, "report JSON path");

  int observation_instances = 500;
  int prop1_instances = 200;
  double domain_radius = 5.0;
  auto* verify_cmd = app.add_subcommand("verify", "run the theoretical property campaigns");
  verify_cmd->add_option("--seed", seed, "campaign seed");
  verify_cmd->add_option("--observation-instances", observation_instances, "instances for the gain/loss ordering check");
  verify_cmd->add_option("--prop1-instances", prop1_instances, "instances for the averaging bound check");
  verify_cmd->add_option("--radius", domain_radius, "declared parameter ball radius");
  verify_cmd->add_option("--out", out_path, "report JSON path");

  long long cost_n = 1;
  std::string cost_method = "ours";
  double unit_f = 1.0, unit_b = 1.0, unit_c = 1.0;
  std::string variant = "appendix";
  std::string audit_counters, audit_log, audit_mode = "full";
  auto* cost_cmd = app.add_subcommand("cost", "closed-form collection cost calculator");
  cost_cmd->add_option("--n", cost_n, "task count")->required();
  cost_cmd->add_option("--method", cost_method, "tag | ours | ours-sampling");
  cost_cmd->add_option("--unit-f", unit_f, "feedforward unit cost");
  cost_cmd->add_option("--unit-b", unit_b, "backward unit cost");
  cost_cmd->add_option("--unit-c", unit_c, "parameter assignment unit cost");
  cost_cmd->add_option("--variant", variant, "appendix | main-text (print both update-cost figures)");
  cost_cmd->add_option("--audit-counters", audit_counters, "counters JSON from a collect run");
  cost_cmd->add_option("--audit-log", audit_log, "record log JSONL from a collect run");
  cost_cmd->add_option("--audit-mode", audit_mode, "full | lazy | sampled");
  cost_cmd->add_option("--out", out_path, "report JSON path");

  auto* pipeline_cmd = app.add_subcommand("pipeline", "collect, solve and evaluate end to end");
  pipeline_cmd->add_option("--config", config_path, "pipeline config JSON")->required();
  pipeline_cmd->add_option("--out", out_path, "output directory")->required();
  pipeline_cmd->add_option("--threads", threads, "worker threads");

  CLI11_PARSE(app, argc, argv);

  if (collect->parsed())
    return taskgroup::run_collect(taskgroup::load_json_file(config_path), out_path, std::cout);
  if (solve_cmd->parsed())
    return taskgroup::run_solve(gains_path, problem_path, out_path, threads, false, std::cout);
  if (oracle_cmd->parsed())
    return taskgroup::run_solve(gains_path, problem_path, out_path, 1, true, std::cout);
  if (export_cmd->parsed())
    return taskgroup::run_export_mip(gains_path, problem_path, out_path, std::cout);
  if (evaluate_cmd->parsed())
    return taskgroup::run_evaluate(taskgroup::load_json_file(config_path), out_path, std::cout);
  if (verify_cmd->parsed())
    return taskgroup::run_verify(seed, observation_instances, prop1_instances, domain_radius,
                                 out_path, std::cout);
  if (cost_cmd->parsed())
    return taskgroup::run_cost(cost_n, cost_method, unit_f, unit_b, unit_c,
                               variant == "main-text", audit_counters, audit_log, audit_mode,
                               out_path, std::cout);
  if (pipeline_cmd->parsed())
    return taskgroup::run_pipeline(taskgroup::load_json_file(config_path), out_path, threads,
                                   std::cout);
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const taskgroup::numeric_error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
