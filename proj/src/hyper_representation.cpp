// Copyright 2026 The c2dfb Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <random>

#include "c2dfb/problems.hpp"
#include "c2dfb/rng.hpp"

namespace c2dfb {

namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajorMatrix>;

Vec flatten(const Eigen::MatrixXd& m) {
  Vec out(m.size());
  Eigen::Map<RowMajorMatrix>(out.data(), m.rows(), m.cols()) = m;
  return out;
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

struct Forward {
  Eigen::MatrixXd hidden;  // n x head_dim
  SoftmaxResult out;
};

Forward forward(const NodeData& d, const Vec& x, const Vec& y, int feature_dim, int head_dim, int classes,
                bool grad) {
  const ConstMap backbone(x.data(), head_dim, feature_dim);
  const ConstMap head(y.data(), classes, head_dim);
  Forward fw;
  fw.hidden = d.features * backbone.transpose();
  fw.out = softmax_cross_entropy(fw.hidden * head.transpose(), d.labels, grad);
  return fw;
}

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

}  // namespace

HyperRepresentationProblem::HyperRepresentationProblem(std::vector<NodeData> train, std::vector<NodeData> validation,
                                                       int feature_dim, int head_dim, int classes, double ridge)
    : train_(std::move(train)),
      validation_(std::move(validation)),
      feature_dim_(feature_dim),
      head_dim_(head_dim),
      classes_(classes),
      ridge_(ridge) {
  if (train_.empty() || train_.size() != validation_.size())
    throw InvalidSpecError("hyper-representation needs train and validation data for every node");
  if (!(ridge_ > 0.0)) throw InvalidSpecError("hyper-representation ridge must be positive");
  double a2 = 0.0;
  for (std::size_t i = 0; i < train_.size(); ++i) {
    if (train_[i].size() == 0 || validation_[i].size() == 0)
      throw InvalidSpecError("split error: node " + std::to_string(i) + " has an empty partition");
    a2 = std::max({a2, max_row_norm2(train_[i]), max_row_norm2(validation_[i])});
  }
  train_all_ = concat(train_, feature_dim_);
  validation_all_ = concat(validation_, feature_dim_);
  // Bounds at the initial backbone (entries N(0, 1/feature_dim), so ||B a||^2 ~ ||a||^2 * head_dim / feature_dim).
  const double phi2 = a2 * static_cast<double>(head_dim_) / feature_dim_;
  constants_.mu = 2.0 * ridge_;
  constants_.L_f = 0.5 * phi2;
  constants_.L_g = 0.5 * phi2 + 2.0 * ridge_;
  constants_.C_f = std::sqrt(2.0 * phi2);
  constants_.analytic = false;
}

double HyperRepresentationProblem::f(int i, const Vec& x, const Vec& y) const {
  return forward(validation_[i], x, y, feature_dim_, head_dim_, classes_, false).out.loss;
}

double HyperRepresentationProblem::g(int i, const Vec& x, const Vec& y) const {
  return forward(train_[i], x, y, feature_dim_, head_dim_, classes_, false).out.loss + ridge_ * y.squaredNorm();
}

Vec HyperRepresentationProblem::grad_x_f(int i, const Vec& x, const Vec& y) const {
  const Forward fw = forward(validation_[i], x, y, feature_dim_, head_dim_, classes_, true);
  const ConstMap head(y.data(), classes_, head_dim_);
  // d/dB of loss(Y B a) = Y^T G^T A.
  const Eigen::MatrixXd dh = fw.out.dlogits * head;  // n x head_dim
  return flatten(dh.transpose() * validation_[i].features);
}

Vec HyperRepresentationProblem::grad_y_f(int i, const Vec& x, const Vec& y) const {
  const Forward fw = forward(validation_[i], x, y, feature_dim_, head_dim_, classes_, true);
  return flatten(fw.out.dlogits.transpose() * fw.hidden);
}

Vec HyperRepresentationProblem::grad_x_g(int i, const Vec& x, const Vec& y) const {
  const Forward fw = forward(train_[i], x, y, feature_dim_, head_dim_, classes_, true);
  const ConstMap head(y.data(), classes_, head_dim_);
  const Eigen::MatrixXd dh = fw.out.dlogits * head;
  return flatten(dh.transpose() * train_[i].features);
}

Vec HyperRepresentationProblem::grad_y_g(int i, const Vec& x, const Vec& y) const {
  const Forward fw = forward(train_[i], x, y, feature_dim_, head_dim_, classes_, true);
  return flatten(fw.out.dlogits.transpose() * fw.hidden) + 2.0 * ridge_ * y;
}

std::optional<TaskMetrics> HyperRepresentationProblem::task_metrics(const Vec& x, const Vec& y) const {
  TaskMetrics t;
  t.train_loss = forward(train_all_, x, y, feature_dim_, head_dim_, classes_, false).out.loss;
  const Forward v = forward(validation_all_, x, y, feature_dim_, head_dim_, classes_, false);
  t.val_loss = v.out.loss;
  t.val_accuracy = v.out.accuracy;
  return t;
}

std::pair<Vec, Vec> HyperRepresentationProblem::initial_point(int, std::uint64_t seed) const {
  // Shared backbone so that all nodes start in consensus.
  Rng rng = make_rng(seed, "hyper-representation-init");
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(feature_dim_)));
  Vec x(dim_x());
  for (auto& v : x) v = normal(rng);
  return {x, Vec::Zero(dim_y())};
}

std::unique_ptr<HyperRepresentationProblem> make_hyper_representation_toy(int m, int feature_dim, int head_dim,
                                                                         std::uint64_t seed,
                                                                         const HyperRepresentationOptions& opt) {
  if (m < 1 || feature_dim < 1 || head_dim < 1) throw InvalidSpecError("hyper-representation dims must be >= 1");
  DenseDataOptions dopt = opt.data;
  dopt.feature_dim = feature_dim;
  const LabeledData data = make_dense_classification_data(dopt, derive_seed(seed, "data"));
  const HeterogeneousSplit tr = partition_heterogeneous(data.train, m, opt.heterogeneity, derive_seed(seed, "split-train"));
  const HeterogeneousSplit va =
      partition_heterogeneous(data.validation, m, opt.heterogeneity, derive_seed(seed, "split-val"));
  return std::make_unique<HyperRepresentationProblem>(split_to_nodes(data.train, tr),
                                                      split_to_nodes(data.validation, va), feature_dim, head_dim,
                                                      dopt.classes, opt.ridge);
}

}  // namespace c2dfb
