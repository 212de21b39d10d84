#include "taskgroup/mip_export.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <limits>

#include "lp_eval.hpp"
#include "taskgroup/brute_force.hpp"
#include "taskgroup/feasibility.hpp"
#include "taskgroup/random.hpp"
#include "taskgroup/solver.hpp"

namespace taskgroup {
namespace {

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

// Given binary x values, derive the uniquely determined auxiliary variables
// (z, u, y, v, p) and return the full assignment.
std::map<std::string, double> derived_assignment(const GroupingProblem& p,
                                                 const Eigen::MatrixXi& x) {
  const int n = p.gains.size();
  const int m = p.num_groups;
  const std::vector<int> mins = resolved_min_sizes(p);
  const std::vector<int> maxs = resolved_max_sizes(p);
  std::map<std::string, double> a;
  auto name = [](const std::string& stem, std::initializer_list<int> idx) {
    std::string s = stem;
    for (int v : idx) s += "_" + std::to_string(v);
    return s;
  };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) a[name("x", {i, j})] = x(i, j);
  std::vector<int> size(m, 0);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < n; ++i) size[j] += x(i, j);
  for (int j = 0; j < m; ++j) {
    for (int s = mins[j]; s <= maxs[j]; ++s)
      a[name("u", {j, s})] = (size[j] == s) ? 1.0 : 0.0;
    const double y = (size[j] >= mins[j] && size[j] <= maxs[j] && size[j] > 0)
                         ? 1.0 / static_cast<double>(size[j])
                         : 0.0;
    a[name("y", {j})] = y;
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < n; ++k) {
        const double z = static_cast<double>(x(i, j) * x(k, j));
        a[name("z", {i, j, k})] = z;
        a[name("v", {i, j, k})] = y * z;
      }
    }
  }
  for (int j1 = 0; j1 < m; ++j1)
    for (int j2 = j1 + 1; j2 < m; ++j2)
      for (int i = 0; i < n; ++i)
        a[name("p", {i, j1, j2})] = static_cast<double>(x(i, j1) * x(i, j2));
  return a;
}

TEST(MipExport, SmallestModelHasExpectedVariables) {
  GroupingProblem p;
  p.gains = make_gain_matrix({"a", "b"}, (Eigen::MatrixXd(2, 2) << 0.2, 0.1, -0.1, 0.3).finished());
  p.num_groups = 1;
  p.mode = AssignMode::kCover;
  const std::string text = mip_model_text(p);
  const lptest::LpModel model = lptest::parse_lp(text);

  int x_vars = 0, z_vars = 0, u_vars = 0;
  for (const std::string& var : model.binaries) {
    if (var.rfind("x_", 0) == 0) ++x_vars;
    if (var.rfind("z_", 0) == 0) ++z_vars;
    if (var.rfind("u_", 0) == 0) ++u_vars;
  }
  EXPECT_EQ(x_vars, 2);
  EXPECT_EQ(z_vars, 4);
  EXPECT_EQ(u_vars, 2);  // u_0_1 and u_0_2
  EXPECT_TRUE(model.binaries.count("u_0_1"));
  EXPECT_TRUE(model.binaries.count("u_0_2"));
  EXPECT_TRUE(model.bounds.count("y_0"));
  EXPECT_NE(text.find("Maximize"), std::string::npos);
  EXPECT_NE(text.find("Subject To"), std::string::npos);
  EXPECT_NE(text.find("End"), std::string::npos);
}

TEST(MipExport, PartitionUsesEqualityCover) {
  GroupingProblem p;
  p.gains = worked_gains();
  p.num_groups = 2;
  p.mode = AssignMode::kPartition;
  const lptest::LpModel model = lptest::parse_lp(mip_model_text(p));
  int eq_cover = 0;
  for (const lptest::Constraint& c : model.constraints)
    if (c.name.rfind("cover_", 0) == 0) {
      EXPECT_EQ(c.sense, "=");
      ++eq_cover;
    }
  EXPECT_EQ(eq_cover, 3);
}

// The exported model must encode exactly the original feasible set and
// objective. Total enumeration over the binary assignment matrix, with the
// uniquely forced auxiliaries, is checked against the independent feasibility
// checker and the solver's optimum.
TEST(MipExport, EncodingMatchesFormulationByTotalEnumeration) {
  Rng rng(777);
  for (int instance = 0; instance < 12; ++instance) {
    const int n = rng.uniform_int(2, 4);
    const int m = rng.uniform_int(1, 2);
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
    if (rng.uniform() < 0.4) {
      BudgetConstraint budget;
      budget.per_task.resize(n, m);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) budget.per_task(i, j) = rng.uniform(0.0, 1.0);
      budget.caps = Eigen::VectorXd::Constant(m, rng.uniform(1.0, 2.5));
      p.budget = std::move(budget);
    }

    const lptest::LpModel model = lptest::parse_lp(mip_model_text(p));
    double best = -std::numeric_limits<double>::infinity();
    for (std::uint32_t bits = 0; bits < (1u << (n * m)); ++bits) {
      Eigen::MatrixXi x(n, m);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) x(i, j) = (bits >> (i * m + j)) & 1u;
      const std::map<std::string, double> assignment = derived_assignment(p, x);
      const bool model_feasible = model.feasible(assignment);
      const bool formulation_feasible = check_assignment(p, x).ok;
      ASSERT_EQ(model_feasible, formulation_feasible)
          << "instance " << instance << " bits " << bits;
      if (!model_feasible) continue;

      const double model_obj = model.objective.eval(assignment);
      std::vector<std::vector<int>> groups(m);
      for (int j = 0; j < m; ++j)
        for (int i = 0; i < n; ++i)
          if (x(i, j)) groups[j].push_back(i);
      ASSERT_NEAR(model_obj, grouping_objective(p.gains.values, groups), 1e-9);
      best = std::max(best, model_obj);
    }

    const GroupAssignment solved = solve(p);
    if (solved.feasible) {
      ASSERT_NEAR(best, solved.objective, 1e-6) << "instance " << instance;
    } else {
      ASSERT_EQ(best, -std::numeric_limits<double>::infinity());
    }
  }
}

TEST(MipExport, WorkedInstanceOptimumThroughTheModel) {
  GroupingProblem p;
  p.gains = worked_gains();
  p.num_groups = 2;
  p.mode = AssignMode::kPartition;
  const lptest::LpModel model = lptest::parse_lp(mip_model_text(p));
  double best = -std::numeric_limits<double>::infinity();
  const int n = 3, m = 2;
  for (std::uint32_t bits = 0; bits < (1u << (n * m)); ++bits) {
    Eigen::MatrixXi x(n, m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) x(i, j) = (bits >> (i * m + j)) & 1u;
    const auto assignment = derived_assignment(p, x);
    if (model.feasible(assignment)) best = std::max(best, model.objective.eval(assignment));
  }
  EXPECT_NEAR(best, 1.4, 1e-9);
}

TEST(MipExport, UnwritablePathFails) {
  GroupingProblem p;
  p.gains = worked_gains();
  p.num_groups = 2;
  EXPECT_THROW(export_mip(p, "/nonexistent_dir_tg/model.lp"), std::runtime_error);
}

TEST(MipExport, WritesFile) {
  GroupingProblem p;
  p.gains = worked_gains();
  p.num_groups = 2;
  const std::string path = (std::filesystem::temp_directory_path() / "tg_model.lp").string();
  export_mip(p, path);
  EXPECT_TRUE(std::filesystem::exists(path));
  EXPECT_GT(std::filesystem::file_size(path), 100u);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace taskgroup
