// Copyright 2026 The c2dfb Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "c2dfb/problems.hpp"

namespace c2dfb {

double ProblemConstants::l() const {
  double best = std::numeric_limits<double>::quiet_NaN();
  for (double v : {C_f, L_f, L_g, rho_g}) {
    if (std::isfinite(v)) best = std::isfinite(best) ? std::max(best, v) : v;
  }
  return best;
}

std::optional<TaskMetrics> BilevelProblem::task_metrics(const Vec&, const Vec&) const { return std::nullopt; }

std::optional<TaskMetrics> BilevelProblem::node_averaged_task_metrics(const Stack& x, const Stack& y) const {
  const auto m = x.rows();
  if (m == 0 || y.rows() != m) throw ShapeError("task metrics: x and y stacks disagree on node count");
  TaskMetrics sum;
  bool has_accuracy = false;
  double accuracy = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto t = task_metrics(row_of(x, i), row_of(y, i));
    if (!t) return std::nullopt;
    sum.train_loss += t->train_loss;
    sum.val_loss += t->val_loss;
    if (t->val_accuracy) {
      has_accuracy = true;
      accuracy += *t->val_accuracy;
    }
  }
  sum.train_loss /= static_cast<double>(m);
  sum.val_loss /= static_cast<double>(m);
  if (has_accuracy) sum.val_accuracy = accuracy / static_cast<double>(m);
  return sum;
}

double BilevelProblem::f_mean(const Vec& x, const Vec& y) const {
  double s = 0.0;
  for (int i = 0; i < node_count(); ++i) s += f(i, x, y);
  return s / node_count();
}

double BilevelProblem::g_mean(const Vec& x, const Vec& y) const {
  double s = 0.0;
  for (int i = 0; i < node_count(); ++i) s += g(i, x, y);
  return s / node_count();
}

Vec BilevelProblem::inner_gradient(InnerObjective obj, double lambda, int node, const Vec& x, const Vec& y) const {
  if (obj == InnerObjective::lower) return grad_y_g(node, x, y);
  return grad_y_f(node, x, y) + lambda * grad_y_g(node, x, y);
}

double BilevelProblem::inner_value(InnerObjective obj, double lambda, int node, const Vec& x, const Vec& y) const {
  if (obj == InnerObjective::lower) return g(node, x, y);
  return f(node, x, y) + lambda * g(node, x, y);
}

Vec hypergradient_estimate(const BilevelProblem& p, int node, const Vec& x, const Vec& y, const Vec& z,
                           double lambda) {
  if (x.size() != p.dim_x() || y.size() != p.dim_y() || z.size() != p.dim_y())
    throw ShapeError("hypergradient_estimate: expected dims (" + std::to_string(p.dim_x()) + ", " +
                     std::to_string(p.dim_y()) + ", " + std::to_string(p.dim_y()) + "), got (" +
                     std::to_string(x.size()) + ", " + std::to_string(y.size()) + ", " +
                     std::to_string(z.size()) + ")");
  if (!(lambda > 0.0)) throw InvalidConfigError("penalty lambda must be positive");
  return p.grad_x_f(node, x, y) + lambda * (p.grad_x_g(node, x, y) - p.grad_x_g(node, x, z));
}

SoftmaxResult softmax_cross_entropy(const Eigen::MatrixXd& logits, const std::vector<int>& labels,
                                    bool with_gradient) {
  SoftmaxResult r;
  const auto n = logits.rows();
  if (n == 0) return r;
  if (with_gradient) r.dlogits.resize(n, logits.cols());
  double loss = 0.0;
  int correct = 0;
  for (Eigen::Index s = 0; s < n; ++s) {
    const double mx = logits.row(s).maxCoeff();
    Eigen::RowVectorXd e = (logits.row(s).array() - mx).exp();
    const double z = e.sum();
    const int b = labels[s];
    loss += std::log(z) - (logits(s, b) - mx);
    Eigen::Index arg;
    logits.row(s).maxCoeff(&arg);
    if (arg == b) ++correct;
    if (with_gradient) {
      r.dlogits.row(s) = e / z;
      r.dlogits(s, b) -= 1.0;
    }
  }
  r.loss = loss / n;
  r.accuracy = static_cast<double>(correct) / n;
  if (with_gradient) r.dlogits /= static_cast<double>(n);
  return r;
}

}  // namespace c2dfb
