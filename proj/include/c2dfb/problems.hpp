// Copyright 2026 The c2dfb Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "c2dfb/dataset.hpp"
#include "c2dfb/types.hpp"

namespace c2dfb {

// Smoothness metadata. NaN marks a constant that is not known.
struct ProblemConstants {
  double mu = std::numeric_limits<double>::quiet_NaN();   // strong convexity of g in y
  double L_f = std::numeric_limits<double>::quiet_NaN();
  double L_g = std::numeric_limits<double>::quiet_NaN();
  double C_f = std::numeric_limits<double>::quiet_NaN();
  double rho_f = std::numeric_limits<double>::quiet_NaN();
  double rho_g = std::numeric_limits<double>::quiet_NaN();
  bool analytic = false;  // exact values rather than bounds at the initial point

  bool known() const { return std::isfinite(mu) && mu > 0.0 && std::isfinite(l()); }
  // max{C_f, L_f, L_g, rho_g} over the known entries.
  double l() const;
  double kappa() const { return l() / mu; }
};

// Which objective an inner loop minimizes over y.
enum class InnerObjective {
  penalized,  // h_i = f_i + lambda g_i
  lower,      // g_i
};

struct TaskMetrics {
  double train_loss = 0.0;
  double val_loss = 0.0;
  std::optional<double> val_accuracy;
};

class ExactOracles;

// Per-node first-order oracles of min_x (1/m) sum_i f_i(x, y*(x)) with
// y*(x) = argmin_y (1/m) sum_i g_i(x, y).
class BilevelProblem {
 public:
  virtual ~BilevelProblem() = default;

  virtual std::string family() const = 0;
  virtual int node_count() const = 0;
  virtual int dim_x() const = 0;
  virtual int dim_y() const = 0;

  virtual double f(int node, const Vec& x, const Vec& y) const = 0;
  virtual double g(int node, const Vec& x, const Vec& y) const = 0;
  virtual Vec grad_x_f(int node, const Vec& x, const Vec& y) const = 0;
  virtual Vec grad_y_f(int node, const Vec& x, const Vec& y) const = 0;
  virtual Vec grad_x_g(int node, const Vec& x, const Vec& y) const = 0;
  virtual Vec grad_y_g(int node, const Vec& x, const Vec& y) const = 0;

  virtual const ProblemConstants& constants() const = 0;
  virtual const ExactOracles* oracles() const { return nullptr; }
  virtual std::optional<TaskMetrics> task_metrics(const Vec& x, const Vec& y) const;
  // Mean over nodes of task_metrics(x_i, y_i): every node's own model on the pooled data.
  std::optional<TaskMetrics> node_averaged_task_metrics(const Stack& x, const Stack& y) const;

  // Starting point of node i; seed comes from the run's init substream.
  virtual std::pair<Vec, Vec> initial_point(int node, std::uint64_t seed) const = 0;

  double f_mean(const Vec& x, const Vec& y) const;
  double g_mean(const Vec& x, const Vec& y) const;

  // grad_y r_i for the chosen inner objective.
  Vec inner_gradient(InnerObjective obj, double lambda, int node, const Vec& x, const Vec& y) const;
  double inner_value(InnerObjective obj, double lambda, int node, const Vec& x, const Vec& y) const;
};

// Closed forms available on verification instances.
class ExactOracles {
 public:
  virtual ~ExactOracles() = default;
  virtual Vec y_star(const Vec& x) const = 0;
  virtual Vec y_lambda_star(const Vec& x, double lambda) const = 0;
  virtual double psi(const Vec& x) const = 0;
  virtual Vec grad_psi(const Vec& x) const = 0;
  virtual double psi_lambda(const Vec& x, double lambda) const = 0;
  virtual Vec grad_psi_lambda(const Vec& x, double lambda) const = 0;
  // argmin_d (1/m) sum_i r_i(x_i, d) where node i holds row i of xs.
  virtual Vec inner_optimum(InnerObjective obj, const Stack& xs, double lambda) const = 0;
};

// u_i = grad_x f_i(x, y) + lambda (grad_x g_i(x, y) - grad_x g_i(x, z)).
Vec hypergradient_estimate(const BilevelProblem& p, int node, const Vec& x, const Vec& y, const Vec& z,
                           double lambda);

// ---------------------------------------------------------------------------
// Quadratic verification instance:
//   g_i(x, y) = 1/2 ||y - B_i x||^2,  f_i(x, y) = 1/2 ||y - c_i||^2 + 1/2 ||x||^2
// B_i has N(0, coupling^2 / d_x) entries and c_i has N(0, target^2) entries.
struct QuadraticOptions {
  double coupling = 0.5;
  double target = 1.0;
  double init_scale = 1.0;
};

class QuadraticProblem final : public BilevelProblem, public ExactOracles {
 public:
  QuadraticProblem(std::vector<Eigen::MatrixXd> b, std::vector<Vec> c, double init_scale = 1.0);

  std::string family() const override { return "quadratic"; }
  int node_count() const override { return static_cast<int>(b_.size()); }
  int dim_x() const override { return static_cast<int>(b_.front().cols()); }
  int dim_y() const override { return static_cast<int>(b_.front().rows()); }

  double f(int node, const Vec& x, const Vec& y) const override;
  double g(int node, const Vec& x, const Vec& y) const override;
  Vec grad_x_f(int node, const Vec& x, const Vec& y) const override;
  Vec grad_y_f(int node, const Vec& x, const Vec& y) const override;
  Vec grad_x_g(int node, const Vec& x, const Vec& y) const override;
  Vec grad_y_g(int node, const Vec& x, const Vec& y) const override;

  const ProblemConstants& constants() const override { return constants_; }
  const ExactOracles* oracles() const override { return this; }
  std::optional<TaskMetrics> task_metrics(const Vec& x, const Vec& y) const override;
  std::pair<Vec, Vec> initial_point(int node, std::uint64_t seed) const override;

  Vec y_star(const Vec& x) const override;
  Vec y_lambda_star(const Vec& x, double lambda) const override;
  double psi(const Vec& x) const override;
  Vec grad_psi(const Vec& x) const override;
  double psi_lambda(const Vec& x, double lambda) const override;
  Vec grad_psi_lambda(const Vec& x, double lambda) const override;
  Vec inner_optimum(InnerObjective obj, const Stack& xs, double lambda) const override;

  const Eigen::MatrixXd& b(int node) const { return b_[node]; }
  const Vec& c(int node) const { return c_[node]; }
  const Eigen::MatrixXd& b_mean() const { return b_mean_; }
  const Vec& c_mean() const { return c_mean_; }

 private:
  std::vector<Eigen::MatrixXd> b_;
  std::vector<Vec> c_;
  Eigen::MatrixXd b_mean_;
  Vec c_mean_;
  double init_scale_;
  ProblemConstants constants_;
};

std::unique_ptr<QuadraticProblem> make_quadratic_problem(int m, int dim_x, int dim_y, std::uint64_t seed,
                                                         const QuadraticOptions& opt = {});

// ---------------------------------------------------------------------------
// Coefficient tuning: linear softmax classifier y (classes x features,
// class-major), per-coordinate regularizer weights exp(x):
//   f_i = mean validation cross-entropy,
//   g_i = mean train cross-entropy + y^T diag(exp(x)) y.
// f does not depend on x, so grad_x f_i = 0.
class CoefficientTuningProblem final : public BilevelProblem {
 public:
  CoefficientTuningProblem(std::vector<NodeData> train, std::vector<NodeData> validation, int feature_dim,
                           int classes, double x_init);

  std::string family() const override { return "coefficient_tuning"; }
  int node_count() const override { return static_cast<int>(train_.size()); }
  int dim_x() const override { return feature_dim_ * classes_; }
  int dim_y() const override { return feature_dim_ * classes_; }

  double f(int node, const Vec& x, const Vec& y) const override;
  double g(int node, const Vec& x, const Vec& y) const override;
  Vec grad_x_f(int node, const Vec& x, const Vec& y) const override;
  Vec grad_y_f(int node, const Vec& x, const Vec& y) const override;
  Vec grad_x_g(int node, const Vec& x, const Vec& y) const override;
  Vec grad_y_g(int node, const Vec& x, const Vec& y) const override;

  const ProblemConstants& constants() const override { return constants_; }
  std::optional<TaskMetrics> task_metrics(const Vec& x, const Vec& y) const override;
  std::pair<Vec, Vec> initial_point(int node, std::uint64_t seed) const override;

  int classes() const { return classes_; }
  int feature_dim() const { return feature_dim_; }

 private:
  std::vector<NodeData> train_;
  std::vector<NodeData> validation_;
  NodeData train_all_;
  NodeData validation_all_;
  int feature_dim_;
  int classes_;
  double x_init_;
  ProblemConstants constants_;
};

struct CoefficientTuningOptions {
  SparseDataOptions data;
  double heterogeneity = 0.8;
  double x_init = -6.0;
};

std::unique_ptr<CoefficientTuningProblem> make_coefficient_tuning_problem(const LabeledData& data, int m,
                                                                         double h, std::uint64_t seed,
                                                                         double x_init = -6.0);
std::unique_ptr<CoefficientTuningProblem> make_coefficient_tuning_problem(int m, std::uint64_t seed,
                                                                         const CoefficientTuningOptions& opt = {});

// ---------------------------------------------------------------------------
// Hyper-representation toy: x is a linear backbone (head_dim x feature_dim,
// row-major), y a softmax head (classes x head_dim, row-major):
//   f_i = mean validation cross-entropy, g_i = mean train cross-entropy + ridge ||y||^2.
class HyperRepresentationProblem final : public BilevelProblem {
 public:
  HyperRepresentationProblem(std::vector<NodeData> train, std::vector<NodeData> validation, int feature_dim,
                             int head_dim, int classes, double ridge);

  std::string family() const override { return "hyper_representation"; }
  int node_count() const override { return static_cast<int>(train_.size()); }
  int dim_x() const override { return head_dim_ * feature_dim_; }
  int dim_y() const override { return classes_ * head_dim_; }

  double f(int node, const Vec& x, const Vec& y) const override;
  double g(int node, const Vec& x, const Vec& y) const override;
  Vec grad_x_f(int node, const Vec& x, const Vec& y) const override;
  Vec grad_y_f(int node, const Vec& x, const Vec& y) const override;
  Vec grad_x_g(int node, const Vec& x, const Vec& y) const override;
  Vec grad_y_g(int node, const Vec& x, const Vec& y) const override;

  const ProblemConstants& constants() const override { return constants_; }
  std::optional<TaskMetrics> task_metrics(const Vec& x, const Vec& y) const override;
  std::pair<Vec, Vec> initial_point(int node, std::uint64_t seed) const override;

  double ridge() const { return ridge_; }

 private:
  std::vector<NodeData> train_;
  std::vector<NodeData> validation_;
  NodeData train_all_;
  NodeData validation_all_;
  int feature_dim_;
  int head_dim_;
  int classes_;
  double ridge_;
  ProblemConstants constants_;
};

struct HyperRepresentationOptions {
  DenseDataOptions data;
  int head_dim = 16;
  double heterogeneity = 0.8;
  double ridge = 1e-2;
};

std::unique_ptr<HyperRepresentationProblem> make_hyper_representation_toy(int m, int feature_dim, int head_dim,
                                                                         std::uint64_t seed,
                                                                         const HyperRepresentationOptions& opt = {});

// Softmax cross-entropy of a linear model: returns mean loss and, when
// requested, d loss / d logits (n x classes, already divided by n).
struct SoftmaxResult {
  double loss = 0.0;
  double accuracy = 0.0;
  Eigen::MatrixXd dlogits;
};
SoftmaxResult softmax_cross_entropy(const Eigen::MatrixXd& logits, const std::vector<int>& labels,
                                    bool with_gradient);

}  // namespace c2dfb
