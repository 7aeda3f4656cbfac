// Copyright 2026 The c2dfb Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include "c2dfb/problems.hpp"
#include "c2dfb/rng.hpp"

namespace c2dfb {

QuadraticProblem::QuadraticProblem(std::vector<Eigen::MatrixXd> b, std::vector<Vec> c, double init_scale)
    : b_(std::move(b)), c_(std::move(c)), init_scale_(init_scale) {
  if (b_.empty() || b_.size() != c_.size()) throw InvalidSpecError("quadratic problem needs one (B_i, c_i) per node");
  const auto dy = b_.front().rows();
  const auto dx = b_.front().cols();
  if (dx < 1 || dy < 1) throw InvalidSpecError("quadratic problem dimensions must be positive");
  b_mean_ = Eigen::MatrixXd::Zero(dy, dx);
  c_mean_ = Vec::Zero(dy);
  double max_b_norm2 = 0.0;
  double max_c_norm = 0.0;
  for (std::size_t i = 0; i < b_.size(); ++i) {
    if (b_[i].rows() != dy || b_[i].cols() != dx || c_[i].size() != dy)
      throw ShapeError("quadratic problem: node " + std::to_string(i) + " has inconsistent dimensions");
    b_mean_ += b_[i];
    c_mean_ += c_[i];
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(b_[i]);
    max_b_norm2 = std::max(max_b_norm2, svd.singularValues()(0) * svd.singularValues()(0));
    max_c_norm = std::max(max_c_norm, c_[i].norm());
  }
  b_mean_ /= static_cast<double>(b_.size());
  c_mean_ /= static_cast<double>(b_.size());

  // Joint Hessian of g_i is [[B^T B, -B^T], [-B, I]] with top eigenvalue 1 + ||B||^2.
  constants_.mu = 1.0;
  constants_.L_g = 1.0 + max_b_norm2;
  constants_.L_f = 1.0;
  // Lipschitz constant of f_i in y over the unit ball.
  constants_.C_f = 1.0 + max_c_norm;
  constants_.rho_f = 0.0;
  constants_.rho_g = 0.0;
  constants_.analytic = true;
}

double QuadraticProblem::f(int i, const Vec& x, const Vec& y) const {
  return 0.5 * (y - c_[i]).squaredNorm() + 0.5 * x.squaredNorm();
}

double QuadraticProblem::g(int i, const Vec& x, const Vec& y) const { return 0.5 * (y - b_[i] * x).squaredNorm(); }

Vec QuadraticProblem::grad_x_f(int, const Vec& x, const Vec&) const { return x; }

Vec QuadraticProblem::grad_y_f(int i, const Vec&, const Vec& y) const { return y - c_[i]; }

Vec QuadraticProblem::grad_x_g(int i, const Vec& x, const Vec& y) const {
  return -b_[i].transpose() * (y - b_[i] * x);
}

Vec QuadraticProblem::grad_y_g(int i, const Vec& x, const Vec& y) const { return y - b_[i] * x; }

std::optional<TaskMetrics> QuadraticProblem::task_metrics(const Vec& x, const Vec& y) const {
  TaskMetrics t;
  t.train_loss = g_mean(x, y);
  t.val_loss = f_mean(x, y);
  return t;
}

std::pair<Vec, Vec> QuadraticProblem::initial_point(int node, std::uint64_t seed) const {
  Rng rng = make_rng(seed, "quadratic-init", static_cast<std::uint64_t>(node));
  std::normal_distribution<double> normal(0.0, init_scale_);
  Vec x(dim_x()), y(dim_y());
  for (auto& v : x) v = normal(rng);
  for (auto& v : y) v = normal(rng);
  return {x, y};
}

Vec QuadraticProblem::y_star(const Vec& x) const { return b_mean_ * x; }

Vec QuadraticProblem::y_lambda_star(const Vec& x, double lambda) const {
  return (c_mean_ + lambda * (b_mean_ * x)) / (1.0 + lambda);
}

double QuadraticProblem::psi(const Vec& x) const { return f_mean(x, y_star(x)); }

Vec QuadraticProblem::grad_psi(const Vec& x) const {
  return x + b_mean_.transpose() * (b_mean_ * x - c_mean_);
}

double QuadraticProblem::psi_lambda(const Vec& x, double lambda) const {
  const Vec yl = y_lambda_star(x, lambda);
  const Vec ys = y_star(x);
  return f_mean(x, yl) + lambda * (g_mean(x, yl) - g_mean(x, ys));
}

Vec QuadraticProblem::grad_psi_lambda(const Vec& x, double lambda) const {
  return x + (lambda / (1.0 + lambda)) * (b_mean_.transpose() * (b_mean_ * x - c_mean_));
}

Vec QuadraticProblem::inner_optimum(InnerObjective obj, const Stack& xs, double lambda) const {
  if (xs.rows() != node_count() || xs.cols() != dim_x()) throw ShapeError("inner_optimum: stacked x has wrong shape");
  Vec bx = Vec::Zero(dim_y());
  for (int i = 0; i < node_count(); ++i) bx += b_[i] * row_of(xs, i);
  bx /= static_cast<double>(node_count());
  if (obj == InnerObjective::lower) return bx;
  return (c_mean_ + lambda * bx) / (1.0 + lambda);
}

std::unique_ptr<QuadraticProblem> make_quadratic_problem(int m, int dim_x, int dim_y, std::uint64_t seed,
                                                         const QuadraticOptions& opt) {
  if (m < 1 || dim_x < 1 || dim_y < 1) throw InvalidSpecError("quadratic problem dimensions must be >= 1");
  Rng rng = make_rng(seed, "quadratic-problem");
  std::normal_distribution<double> normal(0.0, 1.0);
  const double bscale = opt.coupling / std::sqrt(static_cast<double>(dim_x));
  std::vector<Eigen::MatrixXd> b(m, Eigen::MatrixXd(dim_y, dim_x));
  std::vector<Vec> c(m, Vec(dim_y));
  for (int i = 0; i < m; ++i) {
    for (int r = 0; r < dim_y; ++r)
      for (int k = 0; k < dim_x; ++k) b[i](r, k) = bscale * normal(rng);
    for (int r = 0; r < dim_y; ++r) c[i](r) = opt.target * normal(rng);
  }
  return std::make_unique<QuadraticProblem>(std::move(b), std::move(c), opt.init_scale);
}

}  // namespace c2dfb
