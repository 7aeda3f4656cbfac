// Copyright 2026 The c2dfb Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "c2dfb/problems.hpp"
#include "c2dfb/rng.hpp"

namespace c2dfb {

namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajorMatrix>;

double max_row_norm2(const NodeData& d) {
  double best = 0.0;
  for (Eigen::Index r = 0; r < d.features.outerSize(); ++r) {
    double s = 0.0;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(d.features, r); it; ++it)
      s += it.value() * it.value();
    best = std::max(best, s);
  }
  return best;
}

NodeData concat(const std::vector<NodeData>& parts, int feature_dim) {
  NodeData all;
  Eigen::Index rows = 0;
  for (const auto& p : parts) rows += p.size();
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::Index offset = 0;
  for (const auto& p : parts) {
    for (Eigen::Index r = 0; r < p.features.outerSize(); ++r)
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(p.features, r); it; ++it)
        trip.emplace_back(static_cast<int>(offset + r), static_cast<int>(it.col()), it.value());
    all.labels.insert(all.labels.end(), p.labels.begin(), p.labels.end());
    offset += p.size();
  }
  all.features.resize(rows, feature_dim);
  all.features.setFromTriplets(trip.begin(), trip.end());
  return all;
}

}  // namespace

CoefficientTuningProblem::CoefficientTuningProblem(std::vector<NodeData> train, std::vector<NodeData> validation,
                                                   int feature_dim, int classes, double x_init)
    : train_(std::move(train)),
      validation_(std::move(validation)),
      feature_dim_(feature_dim),
      classes_(classes),
      x_init_(x_init) {
  if (train_.empty() || train_.size() != validation_.size())
    throw InvalidSpecError("coefficient tuning needs train and validation data for every node");
  double a2 = 0.0;
  for (std::size_t i = 0; i < train_.size(); ++i) {
    if (train_[i].size() == 0 || validation_[i].size() == 0)
      throw InvalidSpecError("split error: node " + std::to_string(i) + " has an empty partition");
    a2 = std::max({a2, max_row_norm2(train_[i]), max_row_norm2(validation_[i])});
  }
  train_all_ = concat(train_, feature_dim_);
  validation_all_ = concat(validation_, feature_dim_);
  // Softmax cross-entropy Hessian is bounded by ||a||^2 / 2; bounds hold at x_init.
  const double reg = 2.0 * std::exp(x_init_);
  constants_.mu = reg;
  constants_.L_f = 0.5 * a2;
  constants_.L_g = 0.5 * a2 + reg;
  constants_.C_f = std::sqrt(2.0 * a2);
  constants_.analytic = false;
}

namespace {

SoftmaxResult evaluate(const NodeData& d, const Vec& y, int classes, int features, bool grad) {
  const ConstMap w(y.data(), classes, features);
  const Eigen::MatrixXd logits = d.features * w.transpose();
  return softmax_cross_entropy(logits, d.labels, grad);
}

Vec flatten(const Eigen::MatrixXd& m) {
  Vec out(m.size());
  Eigen::Map<RowMajorMatrix>(out.data(), m.rows(), m.cols()) = m;
  return out;
}

}  // namespace

double CoefficientTuningProblem::f(int i, const Vec&, const Vec& y) const {
  return evaluate(validation_[i], y, classes_, feature_dim_, false).loss;
}

double CoefficientTuningProblem::g(int i, const Vec& x, const Vec& y) const {
  return evaluate(train_[i], y, classes_, feature_dim_, false).loss + (x.array().exp() * y.array().square()).sum();
}

Vec CoefficientTuningProblem::grad_x_f(int, const Vec&, const Vec&) const { return Vec::Zero(dim_x()); }

Vec CoefficientTuningProblem::grad_y_f(int i, const Vec&, const Vec& y) const {
  const SoftmaxResult r = evaluate(validation_[i], y, classes_, feature_dim_, true);
  return flatten(r.dlogits.transpose() * validation_[i].features);
}

Vec CoefficientTuningProblem::grad_x_g(int, const Vec& x, const Vec& y) const {
  return (x.array().exp() * y.array().square()).matrix();
}

Vec CoefficientTuningProblem::grad_y_g(int i, const Vec& x, const Vec& y) const {
  const SoftmaxResult r = evaluate(train_[i], y, classes_, feature_dim_, true);
  Vec out = flatten(r.dlogits.transpose() * train_[i].features);
  out.array() += 2.0 * x.array().exp() * y.array();
  return out;
}

std::optional<TaskMetrics> CoefficientTuningProblem::task_metrics(const Vec&, const Vec& y) const {
  TaskMetrics t;
  t.train_loss = evaluate(train_all_, y, classes_, feature_dim_, false).loss;
  const SoftmaxResult v = evaluate(validation_all_, y, classes_, feature_dim_, false);
  t.val_loss = v.loss;
  t.val_accuracy = v.accuracy;
  return t;
}

std::pair<Vec, Vec> CoefficientTuningProblem::initial_point(int, std::uint64_t) const {
  return {Vec::Constant(dim_x(), x_init_), Vec::Zero(dim_y())};
}

std::unique_ptr<CoefficientTuningProblem> make_coefficient_tuning_problem(const LabeledData& data, int m, double h,
                                                                         std::uint64_t seed, double x_init) {
  if (data.train.size() == 0 || data.validation.size() == 0)
    throw InvalidSpecError("coefficient tuning needs non-empty train and validation partitions");
  const HeterogeneousSplit tr = partition_heterogeneous(data.train, m, h, derive_seed(seed, "split-train"));
  const HeterogeneousSplit va = partition_heterogeneous(data.validation, m, h, derive_seed(seed, "split-val"));
  return std::make_unique<CoefficientTuningProblem>(split_to_nodes(data.train, tr), split_to_nodes(data.validation, va),
                                                    data.train.feature_dim, data.train.classes, x_init);
}

std::unique_ptr<CoefficientTuningProblem> make_coefficient_tuning_problem(int m, std::uint64_t seed,
                                                                         const CoefficientTuningOptions& opt) {
  const LabeledData data = make_sparse_classification_data(opt.data, derive_seed(seed, "data"));
  return make_coefficient_tuning_problem(data, m, opt.heterogeneity, seed, opt.x_init);
}

}  // namespace c2dfb
