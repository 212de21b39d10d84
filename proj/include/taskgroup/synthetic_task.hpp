#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "taskgroup/random.hpp"

namespace taskgroup {

enum class TaskKind { kQuadratic, kLinearRegression };

// A differentiable task with a shared-parameter loss, a head loss and an
// additive offset that keeps the loss bounded away from zero:
//
//   quadratic:          L(phi, theta) = 1/2 (phi-center)' curvature (phi-center)
//                                       + 1/2 |theta - head_target|^2 + offset
//   linear regression:  L(phi, theta) = 1/2 |design phi - targets|^2
//                                       + 1/2 |theta - head_target|^2 + offset
//
// Both kinds have closed-form gradients, one-step lookahead losses and
// Lipschitz bounds, which is what makes the theoretical checks in
// simulation.hpp possible without estimation.
struct SyntheticTask {
  std::string id;
  TaskKind kind = TaskKind::kQuadratic;
  double weight = 1.0;  // lambda_i in the joint objective
  double offset = 0.0;  // c0 >= 0, a floor for the loss

  // quadratic kind
  Eigen::MatrixXd curvature;  // p x p symmetric PSD
  Eigen::VectorXd center;     // p

  // linear-regression kind
  Eigen::MatrixXd design;   // q x p
  Eigen::VectorXd targets;  // q

  Eigen::VectorXd head_target;  // p_i

  int shared_dim() const {
    return kind == TaskKind::kQuadratic ? static_cast<int>(center.size())
                                        : static_cast<int>(design.cols());
  }
  int head_dim() const { return static_cast<int>(head_target.size()); }
};

inline void validate(const SyntheticTask& t) {
  if (t.id.empty()) throw std::invalid_argument("SyntheticTask: empty id");
  if (t.offset < 0.0) throw std::invalid_argument("SyntheticTask: offset must be >= 0");
  if (t.weight <= 0.0) throw std::invalid_argument("SyntheticTask: weight must be > 0");
  if (t.kind == TaskKind::kQuadratic) {
    const int p = static_cast<int>(t.center.size());
    if (p < 1) throw std::invalid_argument("SyntheticTask: empty shared parameter");
    if (t.curvature.rows() != p || t.curvature.cols() != p)
      throw std::invalid_argument("SyntheticTask: curvature must be p x p");
    const double asym = (t.curvature - t.curvature.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10) throw std::invalid_argument("SyntheticTask: curvature not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(t.curvature);
    if (eig.eigenvalues().minCoeff() < -1e-10)
      throw std::invalid_argument("SyntheticTask: curvature not positive semidefinite");
  } else {
    if (t.design.rows() < 1 || t.design.cols() < 1)
      throw std::invalid_argument("SyntheticTask: empty design matrix");
    if (t.targets.size() != t.design.rows())
      throw std::invalid_argument("SyntheticTask: targets do not match design rows");
  }
}

inline double task_loss(const SyntheticTask& t, const Eigen::VectorXd& phi,
                        const Eigen::VectorXd& theta) {
  double shared = 0.0;
  if (t.kind == TaskKind::kQuadratic) {
    const Eigen::VectorXd d = phi - t.center;
    shared = 0.5 * d.dot(t.curvature * d);
  } else {
    const Eigen::VectorXd r = t.design * phi - t.targets;
    shared = 0.5 * r.squaredNorm();
  }
  const Eigen::VectorXd h = theta - t.head_target;
  return shared + 0.5 * h.squaredNorm() + t.offset;
}

inline Eigen::VectorXd shared_gradient(const SyntheticTask& t, const Eigen::VectorXd& phi) {
  if (t.kind == TaskKind::kQuadratic) return t.curvature * (phi - t.center);
  return t.design.transpose() * (t.design * phi - t.targets);
}

inline Eigen::VectorXd head_gradient(const SyntheticTask& t, const Eigen::VectorXd& theta) {
  return theta - t.head_target;
}

// Upper bound on sup ||grad_phi L(phi, .)|| over the ball ||phi|| <= radius.
inline double shared_lipschitz_bound(const SyntheticTask& t, double radius) {
  if (t.kind == TaskKind::kQuadratic) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(t.curvature);
    const double opnorm = eig.eigenvalues().cwiseAbs().maxCoeff();
    return opnorm * (radius + t.center.norm());
  }
  const Eigen::MatrixXd gram = t.design.transpose() * t.design;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const double opnorm = eig.eigenvalues().cwiseAbs().maxCoeff();
  return opnorm * radius + (t.design.transpose() * t.targets).norm();
}

// ---------------------------------------------------------------------------
// Generators

struct QuadraticFamilyOptions {
  int tasks = 4;
  int shared_dim = 3;
  int head_dim = 2;
  double curvature_min = 0.5;
  double curvature_max = 2.0;
  double center_spread = 1.0;
  double offset_min = 0.05;
  double offset_max = 0.2;
  // clusters > 0 assigns tasks round-robin to that many cluster centers;
  // tasks sharing a center transfer positively, which gives the aligned
  // families used by the grouping experiments.
  int clusters = 0;
  double cluster_jitter = 0.05;
};

namespace detail {

inline Eigen::MatrixXd random_psd(int p, double eig_min, double eig_max, Rng& rng) {
  Eigen::MatrixXd a(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) a(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  Eigen::VectorXd eigs(p);
  for (int i = 0; i < p; ++i) eigs(i) = rng.uniform(eig_min, eig_max);
  Eigen::MatrixXd h = q * eigs.asDiagonal() * q.transpose();
  return 0.5 * (h + h.transpose());
}

inline Eigen::VectorXd random_vector(int p, double scale, Rng& rng) {
  Eigen::VectorXd v(p);
  for (int i = 0; i < p; ++i) v(i) = scale * rng.normal();
  return v;
}

}  // namespace detail

inline std::vector<SyntheticTask> make_quadratic_family(const QuadraticFamilyOptions& opt,
                                                        Rng& rng) {
  if (opt.tasks < 1) throw std::invalid_argument("make_quadratic_family: tasks must be >= 1");
  std::vector<Eigen::VectorXd> cluster_centers;
  if (opt.clusters > 0) {
    for (int c = 0; c < opt.clusters; ++c)
      cluster_centers.push_back(detail::random_vector(opt.shared_dim, opt.center_spread, rng));
  }
  std::vector<SyntheticTask> tasks;
  tasks.reserve(opt.tasks);
  for (int i = 0; i < opt.tasks; ++i) {
    SyntheticTask t;
    t.id = "task" + std::to_string(i);
    t.kind = TaskKind::kQuadratic;
    t.curvature = detail::random_psd(opt.shared_dim, opt.curvature_min, opt.curvature_max, rng);
    if (opt.clusters > 0) {
      t.center = cluster_centers[i % opt.clusters] +
                 detail::random_vector(opt.shared_dim, opt.cluster_jitter, rng);
    } else {
      t.center = detail::random_vector(opt.shared_dim, opt.center_spread, rng);
    }
    t.head_target = detail::random_vector(opt.head_dim, 1.0, rng);
    t.offset = rng.uniform(opt.offset_min, opt.offset_max);
    validate(t);
    tasks.push_back(std::move(t));
  }
  return tasks;
}

struct LinearRegressionFamilyOptions {
  int tasks = 4;
  int shared_dim = 3;
  int head_dim = 2;
  int samples = 8;
  double offset_min = 0.05;
  double offset_max = 0.2;
};

inline std::vector<SyntheticTask> make_linear_regression_family(
    const LinearRegressionFamilyOptions& opt, Rng& rng) {
  if (opt.tasks < 1)
    throw std::invalid_argument("make_linear_regression_family: tasks must be >= 1");
  std::vector<SyntheticTask> tasks;
  tasks.reserve(opt.tasks);
  for (int i = 0; i < opt.tasks; ++i) {
    SyntheticTask t;
    t.id = "task" + std::to_string(i);
    t.kind = TaskKind::kLinearRegression;
    t.design.resize(opt.samples, opt.shared_dim);
    for (int r = 0; r < opt.samples; ++r)
      for (int c = 0; c < opt.shared_dim; ++c) t.design(r, c) = rng.normal();
    const Eigen::VectorXd truth = detail::random_vector(opt.shared_dim, 1.0, rng);
    t.targets = t.design * truth;
    t.head_target = detail::random_vector(opt.head_dim, 1.0, rng);
    t.offset = rng.uniform(opt.offset_min, opt.offset_max);
    validate(t);
    tasks.push_back(std::move(t));
  }
  return tasks;
}

inline std::vector<std::string> task_names(const std::vector<SyntheticTask>& tasks) {
  std::vector<std::string> names;
  names.reserve(tasks.size());
  for (const SyntheticTask& t : tasks) names.push_back(t.id);
  return names;
}

}  // namespace taskgroup
