// Copyright 2026 The c2dfb Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/SparseCore>

#include "c2dfb/types.hpp"

namespace c2dfb {

struct Sample {
  int label = 0;
  std::vector<std::pair<int, double>> features;  // (index, value), index ascending
};

struct Dataset {
  int feature_dim = 0;
  int classes = 0;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
};

struct LabeledData {
  Dataset train;
  Dataset validation;
};

// Sparse bag-of-words style data with MinMax-scaled values in (0, 1]. Every
// class owns a block of topic features that its samples draw from with
// probability topic_probability; the rest of the non-zeros are uniform noise.
struct SparseDataOptions {
  int feature_dim = 500;
  int classes = 10;
  int samples = 2000;
  int nonzeros_per_sample = 20;
  double topic_probability = 0.35;
  double validation_fraction = 0.5;
};

LabeledData make_sparse_classification_data(const SparseDataOptions& opt, std::uint64_t seed);

// Gaussian class clusters with unit-norm means separated by `separation`.
struct DenseDataOptions {
  int feature_dim = 32;
  int classes = 4;
  int samples = 1200;
  double separation = 1.5;
  double noise = 1.0;
  double validation_fraction = 0.5;
};

LabeledData make_dense_classification_data(const DenseDataOptions& opt, std::uint64_t seed);

// Text form, one header line then one row per sample:
//   c2dfb-dataset 1 <feature_dim> <classes> <samples>
//   <label> <index>:<value> <index>:<value> ...
// Values are written with 17 significant digits and read back exactly.
void write_dataset(std::ostream& os, const Dataset& data);
Dataset read_dataset(std::istream& is);

void save_dataset(const std::string& path, const Dataset& data);
Dataset load_dataset(const std::string& path);

struct HeterogeneousSplit {
  double h = 0.0;
  int node_count = 0;
  std::uint64_t seed = 0;
  std::vector<int> assignment;  // node of each sample
  std::vector<std::string> warnings;

  std::vector<int> counts() const;
  std::vector<std::vector<int>> class_histograms(const Dataset& data) const;
};

// For every class c, a fraction h of its samples goes to node c mod m and the
// rest is dealt round-robin (in shuffled order) to the other nodes.
// h = 1/m gives a uniform split. Nodes left empty borrow one sample from the
// largest node and the split records a warning.
HeterogeneousSplit partition_heterogeneous(const Dataset& data, int node_count, double h,
                                           std::uint64_t seed);

// Per-node slice of a dataset in matrix form.
struct NodeData {
  Eigen::SparseMatrix<double, Eigen::RowMajor> features;  // n x feature_dim
  std::vector<int> labels;

  int size() const { return static_cast<int>(labels.size()); }
};

std::vector<NodeData> split_to_nodes(const Dataset& data, const HeterogeneousSplit& split);
NodeData to_node_data(const Dataset& data);

}  // namespace c2dfb
