// Acceptance suite. Each test covers one release criterion and prints a
// single PASS/FAIL line so the run reads as a checklist.

#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>

#include <json.hpp>

#include "cli_helpers.hpp"
#include "lp_eval.hpp"
#include "taskgroup/taskgroup.hpp"

namespace taskgroup {
namespace {

using clitest::fresh_dir;
using clitest::read_file;
using clitest::run_cli;
using nlohmann::json;

class Criterion : public ::testing::Test {
 protected:
  void finish(int index, const std::string& name) {
    std::printf("[ACCEPTANCE] C%02d %s: %s\n", index, name.c_str(),
                HasFailure() ? "FAIL" : "PASS");
    std::fflush(stdout);
  }
};

std::vector<std::string> make_names(int n) {
  std::vector<std::string> names;
  for (int i = 0; i < n; ++i) names.push_back("t" + std::to_string(i));
  return names;
}

GainMatrix worked_gains() {
  Eigen::MatrixXd s(3, 3);
  s << 0.5, 0.4, -0.3,
       0.4, 0.5, -0.2,
      -0.3, -0.2, 0.5;
  return make_gain_matrix({"a", "b", "c"}, s);
}

GroupingProblem random_problem(Rng& rng, int max_n, int max_m) {
  const int n = rng.uniform_int(2, max_n);
  const int m = rng.uniform_int(1, std::min(max_m, n));
  Eigen::MatrixXd s(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) s(i, j) = rng.uniform(-1.0, 1.0);
  GroupingProblem p;
  p.gains = make_gain_matrix(make_names(n), s);
  p.num_groups = m;
  p.mode = rng.uniform() < 0.5 ? AssignMode::kCover : AssignMode::kPartition;
  if (rng.uniform() < 0.5) {
    BudgetConstraint budget;
    budget.per_task.resize(n, m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) budget.per_task(i, j) = rng.uniform(0.0, 1.0);
    budget.caps.resize(m);
    const bool heterogeneous = rng.uniform() < 0.5;
    const double base_cap = rng.uniform(1.0, 3.0);
    for (int j = 0; j < m; ++j)
      budget.caps(j) = heterogeneous ? rng.uniform(1.0, 3.0) : base_cap;
    p.budget = std::move(budget);
  }
  if (rng.uniform() < 0.5) {
    SizeBounds bounds;
    const bool heterogeneous = rng.uniform() < 0.5;
    const int base_min = rng.uniform_int(1, 2);
    const int base_max = rng.uniform_int(std::max(base_min, n / 2), n);
    for (int j = 0; j < m; ++j) {
      const int lo = heterogeneous ? rng.uniform_int(1, 2) : base_min;
      const int hi = heterogeneous ? rng.uniform_int(std::max(lo, n / 2), n) : base_max;
      bounds.min_size.push_back(lo);
      bounds.max_size.push_back(hi);
    }
    p.size_bounds = std::move(bounds);
  }
  return p;
}

std::vector<SyntheticTask> clustered_family(std::uint64_t seed, int tasks = 6, int clusters = 2) {
  QuadraticFamilyOptions opt;
  opt.tasks = tasks;
  opt.shared_dim = 3;
  opt.head_dim = 2;
  opt.clusters = clusters;
  opt.center_spread = 1.5;
  opt.cluster_jitter = 0.05;
  Rng rng(seed);
  return make_quadratic_family(opt, rng);
}

// --------------------------------------------------------------------------

TEST_F(Criterion, C01_SolverMatchesOracleOn300Instances) {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(20240001);
  int total = 0, feasible = 0;
  for (int k = 0; k < 300; ++k) {
    const GroupingProblem p = random_problem(rng, 6, 3);
    const GroupAssignment fast = solve(p);
    const GroupAssignment slow = solve_bruteforce(p);
    ++total;
    ASSERT_EQ(fast.feasible, slow.feasible) << "instance " << k;
    if (!fast.feasible) continue;
    ++feasible;
    EXPECT_EQ(fast.objective, slow.objective) << "instance " << k;
    EXPECT_EQ(fast.groups, slow.groups) << "instance " << k;
    EXPECT_TRUE(check_assignment(p, fast.to_matrix(p.gains.size()), fast.objective).ok)
        << "instance " << k;
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_EQ(total, 300);
  EXPECT_GT(feasible, 150);
  EXPECT_LT(elapsed, 60.0);
  finish(1, "solver exactness vs enumeration oracle");
}

TEST_F(Criterion, C02_WorkedInstanceBothModes) {
  for (const AssignMode mode : {AssignMode::kPartition, AssignMode::kCover}) {
    GroupingProblem p;
    p.gains = worked_gains();
    p.num_groups = 2;
    p.mode = mode;
    const GroupAssignment got = solve(p);
    ASSERT_TRUE(got.feasible);
    EXPECT_NEAR(got.objective, 1.4, 1e-12);
    ASSERT_EQ(got.groups.size(), 2u);
    EXPECT_EQ(got.groups[0], (std::vector<int>{0, 1}));
    EXPECT_EQ(got.groups[1], (std::vector<int>{2}));
  }
  finish(2, "worked 3-task instance, objective 1.4");
}

TEST_F(Criterion, C03_AveragingBoundHoldsAndShrinksLinearly) {
  const auto start = std::chrono::steady_clock::now();
  const Prop1Campaign campaign = run_prop1_campaign(20240003, 200, 5.0);
  EXPECT_EQ(campaign.instances, 200);
  EXPECT_GE(campaign.valid, 150);
  EXPECT_EQ(campaign.holds, campaign.valid);
  EXPECT_TRUE(campaign.ok());

  const EtaSweep sweep = run_eta_sweep(20240013, 0.1, 10, 5.0);
  EXPECT_TRUE(sweep.all_hold);
  EXPECT_TRUE(sweep.ratio_bounded);
  EXPECT_TRUE(sweep.tail_monotone);
  // O(eta): with the bound holding at every eta and RHS linear in eta, the
  // gap is pinched to a linear rate; the tail should halve with eta.
  const Prop1Report& a = sweep.rows[sweep.rows.size() - 2];
  const Prop1Report& b = sweep.rows.back();
  EXPECT_NEAR(b.lhs / a.lhs, 0.5, 0.2);

  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_LT(elapsed, 30.0);
  finish(3, "group-vs-average gain bound (200 instances + eta sweep)");
}

TEST_F(Criterion, C04_GainOrderingMatchesLossOrdering) {
  const Observation1Campaign campaign = run_observation1_campaign(20240004, 500);
  EXPECT_EQ(campaign.instances, 500);
  EXPECT_GE(campaign.valid, 400);
  EXPECT_EQ(campaign.consistent, campaign.valid);
  EXPECT_TRUE(campaign.ok());
  finish(4, "gain ordering equals loss ordering on 500 instances");
}

TEST_F(Criterion, C05_CostFormulasSymbolicAndMeasured) {
  // Closed forms for n in 1..100, in exact rational arithmetic.
  for (long long n = 1; n <= 100; ++n) {
    const CostBreakdown tag = cost_parts(CostMethod::kTag, n);
    ASSERT_EQ(tag.total_f(), Fraction(n * n + n));
    ASSERT_EQ(tag.total_b(), Fraction(n));
    ASSERT_EQ(tag.total_c(), Fraction(n));
    const CostBreakdown ours = cost_parts(CostMethod::kOurs, n);
    ASSERT_EQ(ours.total_f(), Fraction(n * n + 2 * n));
    ASSERT_EQ(ours.total_c(), Fraction(n * (n + 3), 2));
    const CostBreakdown sampling = cost_parts(CostMethod::kOursSampling, n);
    ASSERT_EQ(sampling.total_f(), Fraction(n * n + 6 * n + 2, 3));
    ASSERT_EQ(sampling.total_c(), Fraction((n + 1) * (n + 5), 6));
    Fraction update_sum(0), highorder_sum(0);
    for (long long u = 1; u <= n; ++u) {
      update_sum = update_sum + Fraction(u * (u + 3), 2 * n);
      highorder_sum = highorder_sum + Fraction(u * u + u, n);
    }
    ASSERT_EQ(update_sum, sampling.update_c);
    ASSERT_EQ(highorder_sum, sampling.highorder_f);
  }

  // Full-mode counters match the per-step formulas exactly.
  for (const int n : {4, 6}) {
    Rng rng(20240005 + n);
    QuadraticFamilyOptions opt;
    opt.tasks = n;
    const auto tasks = make_quadratic_family(opt, rng);
    const TrainState init = make_initial_state(tasks, rng);
    SimConfig cfg;
    cfg.eta.base = 0.02;
    const CollectOutput out = collect_run(tasks, CollectionPolicy{}, 50, cfg, init);
    EXPECT_EQ(out.counter.highorder_feedforward_evals, 50 * (n * n + n));
    EXPECT_EQ(out.counter.param_assignments, 50 * (n * (n + 3) / 2));
    EXPECT_TRUE(
        audit_against_counters(n, CollectionPolicy::Mode::kFull, out.counter, out.log).pass);
  }

  // Sampled-mode Monte Carlo over 1e4 steps within three standard errors.
  {
    const int n = 6;
    Rng rng(20240015);
    QuadraticFamilyOptions opt;
    opt.tasks = n;
    const auto tasks = make_quadratic_family(opt, rng);
    const TrainState init = make_initial_state(tasks, rng);
    SimConfig cfg;
    cfg.eta.base = 0.005;
    CollectionPolicy policy;
    policy.mode = CollectionPolicy::Mode::kSampled;
    policy.rng_seed = 515151;
    const CollectOutput out = collect_run(tasks, policy, 10000, cfg, init);
    const CounterAudit audit =
        audit_against_counters(n, CollectionPolicy::Mode::kSampled, out.counter, out.log);
    EXPECT_TRUE(audit.pass) << (audit.notes.empty() ? "" : audit.notes.front());
    EXPECT_NEAR(audit.expected_highorder_per_step, 56.0 / 3.0, 1e-12);
    EXPECT_LE(std::abs(audit.measured_highorder_per_step - 56.0 / 3.0),
              3.0 * audit.highorder_stderr);
    EXPECT_LE(std::abs(audit.measured_assignments_per_step - 77.0 / 6.0),
              3.0 * audit.assignments_stderr);
  }
  finish(5, "collection cost formulas, symbolic and measured");
}

TEST_F(Criterion, C06_LazyCollectionRoundsReductionAndStability) {
  const int steps = 100;
  SimConfig cfg;
  cfg.eta.base = 0.05;

  // Round counts and lookahead reduction.
  {
    const auto tasks = clustered_family(616161);
    Rng rng(1);
    const TrainState init = make_initial_state(tasks, rng);
    const CollectOutput full = collect_run(tasks, CollectionPolicy{}, steps, cfg, init);
    for (const int k : {5, 10, 25, 50}) {
      CollectionPolicy lazy;
      lazy.mode = CollectionPolicy::Mode::kLazy;
      lazy.interval = k;
      const CollectOutput out = collect_run(tasks, lazy, steps, cfg, init);
      EXPECT_EQ(out.collection_steps, (steps + k - 1) / k);
      const double reduction =
          static_cast<double>(full.counter.highorder_feedforward_evals) /
          static_cast<double>(out.counter.highorder_feedforward_evals);
      EXPECT_GE(reduction, 0.9 * k) << "interval " << k;
    }
  }

  // Grouping stability: lazy interval 10 must reproduce the full-collection
  // grouping on at least 8 of 10 seeds of the aligned family.
  int matches = 0;
  for (int seed = 0; seed < 10; ++seed) {
    const auto tasks = clustered_family(700000 + seed);
    Rng rng(seed + 1);
    const TrainState init = make_initial_state(tasks, rng);
    const CollectOutput full = collect_run(tasks, CollectionPolicy{}, steps, cfg, init);
    CollectionPolicy lazy;
    lazy.mode = CollectionPolicy::Mode::kLazy;
    lazy.interval = 10;
    const CollectOutput sparse = collect_run(tasks, lazy, steps, cfg, init);

    GroupingProblem dense_problem;
    dense_problem.gains = full.gains;
    dense_problem.num_groups = 2;
    dense_problem.mode = AssignMode::kPartition;
    GroupingProblem sparse_problem = dense_problem;
    sparse_problem.gains = sparse.gains;
    const GroupAssignment a = solve(dense_problem);
    const GroupAssignment b = solve(sparse_problem);
    ASSERT_TRUE(a.feasible);
    ASSERT_TRUE(b.feasible);
    if (a.groups == b.groups) ++matches;
  }
  EXPECT_GE(matches, 8);
  finish(6, "lazy collection rounds, cost reduction and grouping stability");
}

TEST_F(Criterion, C07_SizeConstraintCellsBeatRandomBaseline) {
  SimConfig cfg;
  cfg.eta.base = 0.05;
  const int collect_steps = 60;
  const int evaluate_steps = 60;
  const int repeats = 10;

  struct Cell {
    int min_size;
    int max_size;
  };
  std::vector<Cell> cells;
  for (const int max_size : {3, 4, 5, 6}) cells.push_back({1, max_size});
  for (const int min_size : {1, 2, 3}) cells.push_back({min_size, 6});

  int total_cells = 0, winning_cells = 0;
  for (const Cell& cell : cells) {
    for (int seed = 0; seed < 4; ++seed) {
      const auto tasks = clustered_family(808000 + seed);
      Rng rng(900 + seed);
      const TrainState init = make_initial_state(tasks, rng);
      const CollectOutput collected =
          collect_run(tasks, CollectionPolicy{}, collect_steps, cfg, init);

      GroupingProblem problem;
      problem.gains = collected.gains;
      problem.num_groups = 2;
      problem.mode = AssignMode::kPartition;
      SizeBounds bounds;
      bounds.min_size = {cell.min_size, cell.min_size};
      bounds.max_size = {cell.max_size, cell.max_size};
      problem.size_bounds = std::move(bounds);

      const GroupAssignment ours = solve(problem);
      ASSERT_TRUE(ours.feasible);
      const FeasibilityReport feas =
          check_assignment(problem, ours.to_matrix(6), ours.objective);
      ASSERT_TRUE(feas.ok) << (feas.violations.empty() ? "" : feas.violations.front());

      const auto feasible_set = enumerate_feasible(problem);
      ASSERT_FALSE(feasible_set.empty());
      Rng pick(7000 + seed * 131 + cell.min_size * 17 + cell.max_size);
      double random_total = 0.0;
      for (int r = 0; r < repeats; ++r) {
        const auto& groups =
            feasible_set[pick.uniform_int(0, static_cast<int>(feasible_set.size()) - 1)];
        random_total += evaluate_grouping(groups, tasks, evaluate_steps, cfg, init).total_loss;
      }
      const double random_mean = random_total / repeats;
      const double ours_total =
          evaluate_grouping(ours.groups, tasks, evaluate_steps, cfg, init).total_loss;

      ++total_cells;
      if (ours_total <= random_mean + 1e-12) ++winning_cells;
    }
  }
  EXPECT_EQ(total_cells, 28);
  EXPECT_GE(static_cast<double>(winning_cells) / total_cells, 0.9)
      << winning_cells << "/" << total_cells;
  finish(7, "size-bound cells: solutions respect bounds and beat random");
}

TEST_F(Criterion, C08_ExportedModelReproducesSolverOptimum) {
  Rng rng(20240008);
  int instances = 0;
  for (int k = 0; k < 14; ++k) {
    const int n = rng.uniform_int(2, 5);
    const int m = n <= 3 ? rng.uniform_int(1, 2) : 2;
    Eigen::MatrixXd s(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) s(i, j) = rng.uniform(-1.0, 1.0);
    GroupingProblem p;
    p.gains = make_gain_matrix(make_names(n), s);
    p.num_groups = m;
    p.mode = rng.uniform() < 0.5 ? AssignMode::kCover : AssignMode::kPartition;
    if (rng.uniform() < 0.4) {
      SizeBounds bounds;
      for (int j = 0; j < m; ++j) {
        bounds.min_size.push_back(1);
        bounds.max_size.push_back(rng.uniform_int(1, n));
      }
      p.size_bounds = std::move(bounds);
    }

    const lptest::LpModel model = lptest::parse_lp(mip_model_text(p));
    double best = -std::numeric_limits<double>::infinity();
    for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << (n * m)); ++bits) {
      Eigen::MatrixXi x(n, m);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) x(i, j) = static_cast<int>((bits >> (i * m + j)) & 1u);

      std::map<std::string, double> assignment;
      const std::vector<int> mins = resolved_min_sizes(p);
      const std::vector<int> maxs = resolved_max_sizes(p);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
          assignment["x_" + std::to_string(i) + "_" + std::to_string(j)] = x(i, j);
      for (int j = 0; j < m; ++j) {
        int size = 0;
        for (int i = 0; i < n; ++i) size += x(i, j);
        for (int sv = mins[j]; sv <= maxs[j]; ++sv)
          assignment["u_" + std::to_string(j) + "_" + std::to_string(sv)] = (size == sv) ? 1 : 0;
        const double y =
            (size >= mins[j] && size <= maxs[j] && size > 0) ? 1.0 / size : 0.0;
        assignment["y_" + std::to_string(j)] = y;
        for (int i = 0; i < n; ++i) {
          for (int kk = 0; kk < n; ++kk) {
            const std::string tag =
                std::to_string(i) + "_" + std::to_string(j) + "_" + std::to_string(kk);
            const double z = x(i, j) * x(kk, j);
            assignment["z_" + tag] = z;
            assignment["v_" + tag] = y * z;
          }
        }
      }
      for (int j1 = 0; j1 < m; ++j1)
        for (int j2 = j1 + 1; j2 < m; ++j2)
          for (int i = 0; i < n; ++i)
            assignment["p_" + std::to_string(i) + "_" + std::to_string(j1) + "_" +
                       std::to_string(j2)] = x(i, j1) * x(i, j2);

      const bool model_feasible = model.feasible(assignment);
      const bool formulation_feasible = check_assignment(p, x).ok;
      ASSERT_EQ(model_feasible, formulation_feasible) << "instance " << k;
      if (!model_feasible) continue;
      const double obj = model.objective.eval(assignment);
      std::vector<std::vector<int>> groups(m);
      for (int j = 0; j < m; ++j)
        for (int i = 0; i < n; ++i)
          if (x(i, j)) groups[j].push_back(i);
      ASSERT_NEAR(obj, grouping_objective(p.gains.values, groups), 1e-9);
      best = std::max(best, obj);
    }

    const GroupAssignment solved = solve(p);
    if (solved.feasible) {
      ASSERT_NEAR(best, solved.objective, 1e-6) << "instance " << k;
      ++instances;
    } else {
      ASSERT_EQ(best, -std::numeric_limits<double>::infinity());
    }
  }
  EXPECT_GE(instances, 8);
  finish(8, "exported MILP encodes the formulation exactly (n <= 5)");
}

TEST_F(Criterion, C09_AnalyticGradientsMatchFiniteDifferences) {
  const double h = 1e-5;
  auto fd_check = [&](const SyntheticTask& t, Rng& rng) {
    for (int k = 0; k < 100; ++k) {
      Eigen::VectorXd phi(t.shared_dim()), theta(t.head_dim());
      for (int i = 0; i < phi.size(); ++i) phi(i) = rng.uniform(-2.0, 2.0);
      for (int i = 0; i < theta.size(); ++i) theta(i) = rng.uniform(-2.0, 2.0);
      Eigen::VectorXd fd(phi.size());
      for (int i = 0; i < phi.size(); ++i) {
        Eigen::VectorXd hi = phi, lo = phi;
        hi(i) += h;
        lo(i) -= h;
        fd(i) = (task_loss(t, hi, theta) - task_loss(t, lo, theta)) / (2.0 * h);
      }
      const Eigen::VectorXd an = shared_gradient(t, phi);
      ASSERT_LE((an - fd).norm(), 1e-5 * std::max(1.0, an.norm())) << t.id;
    }
  };

  Rng rng(20240009);
  QuadraticFamilyOptions qopt;
  qopt.tasks = 1;
  fd_check(make_quadratic_family(qopt, rng)[0], rng);
  LinearRegressionFamilyOptions lopt;
  lopt.tasks = 1;
  fd_check(make_linear_regression_family(lopt, rng)[0], rng);
  finish(9, "analytic gradients vs central differences (100 points per kind)");
}

TEST_F(Criterion, C10_PipelineByteIdenticalAcrossThreadCounts) {
  const auto dir = fresh_dir("acc_pipeline");
  const json cfg{{"seed", 31415},
                 {"tasks",
                  {{"generator",
                    {{"kind", "quadratic"}, {"tasks", 6}, {"shared_dim", 3}, {"head_dim", 2},
                     {"clusters", 2}, {"center_spread", 1.5}}}}},
                 {"collect", {{"steps", 50}, {"eta", {{"kind", "constant"}, {"value", 0.05}}}}},
                 {"problem", {{"mode", "partition"}, {"m_values", {2, 3}}}},
                 {"evaluate_steps", 60},
                 {"random_repeats", 10}};
  const std::string cfg_path = (dir / "pipeline.json").string();
  {
    std::ofstream out(cfg_path);
    out << cfg.dump(2);
  }
  const auto out1 = dir / "threads1";
  const auto out8 = dir / "threads8";
  ASSERT_EQ(run_cli("pipeline --config " + cfg_path + " --out " + out1.string() + " --threads 1")
                .exit_code,
            0);
  ASSERT_EQ(run_cli("pipeline --config " + cfg_path + " --out " + out8.string() + " --threads 8")
                .exit_code,
            0);

  std::vector<std::string> names1, names8;
  for (const auto& entry : std::filesystem::directory_iterator(out1))
    names1.push_back(entry.path().filename().string());
  for (const auto& entry : std::filesystem::directory_iterator(out8))
    names8.push_back(entry.path().filename().string());
  std::sort(names1.begin(), names1.end());
  std::sort(names8.begin(), names8.end());
  ASSERT_EQ(names1, names8);
  ASSERT_GE(names1.size(), 8u);  // config, gains, records, counters, results, evals, summaries
  for (const std::string& name : names1) {
    EXPECT_EQ(read_file((out1 / name).string()), read_file((out8 / name).string()))
        << "file differs: " << name;
  }
  finish(10, "fixed-seed pipeline byte-identical for 1 and 8 threads");
}

}  // namespace
}  // namespace taskgroup
