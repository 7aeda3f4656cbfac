// Copyright 2026 The c2dfb Authors.
// SPDX-License-Identifier: Apache-2.0

#include "c2dfb/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "c2dfb/rng.hpp"

namespace c2dfb {

namespace {

LabeledData split_train_validation(std::vector<Sample> all, double validation_fraction, Rng& rng) {
  std::shuffle(all.begin(), all.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::llround(validation_fraction * all.size()));
  LabeledData out;
  out.validation.samples.assign(all.begin(), all.begin() + n_val);
  out.train.samples.assign(all.begin() + n_val, all.end());
  return out;
}

}  // namespace

LabeledData make_sparse_classification_data(const SparseDataOptions& opt, std::uint64_t seed) {
  if (opt.feature_dim < opt.classes || opt.classes < 2 || opt.samples < 1 ||
      opt.nonzeros_per_sample < 1 || opt.nonzeros_per_sample > opt.feature_dim)
    throw InvalidSpecError("sparse dataset options are inconsistent");
  Rng rng = make_rng(seed, "sparse-data");
  const int block = opt.feature_dim / opt.classes;
  std::uniform_int_distribution<int> any_feature(0, opt.feature_dim - 1);
  std::uniform_int_distribution<int> in_block(0, block - 1);
  std::uniform_real_distribution<double> value(0.05, 1.0);
  std::bernoulli_distribution from_topic(opt.topic_probability);

  std::vector<Sample> all;
  all.reserve(opt.samples);
  for (int s = 0; s < opt.samples; ++s) {
    Sample smp;
    smp.label = s % opt.classes;
    std::vector<double> row(opt.feature_dim, 0.0);
    int placed = 0;
    while (placed < opt.nonzeros_per_sample) {
      const int j = from_topic(rng) ? smp.label * block + in_block(rng) : any_feature(rng);
      if (row[j] == 0.0) {
        row[j] = value(rng);
        ++placed;
      }
    }
    for (int j = 0; j < opt.feature_dim; ++j)
      if (row[j] != 0.0) smp.features.emplace_back(j, row[j]);
    all.push_back(std::move(smp));
  }
  LabeledData out = split_train_validation(std::move(all), opt.validation_fraction, rng);
  out.train.feature_dim = out.validation.feature_dim = opt.feature_dim;
  out.train.classes = out.validation.classes = opt.classes;
  return out;
}

LabeledData make_dense_classification_data(const DenseDataOptions& opt, std::uint64_t seed) {
  if (opt.feature_dim < 1 || opt.classes < 2 || opt.samples < 1)
    throw InvalidSpecError("dense dataset options are inconsistent");
  Rng rng = make_rng(seed, "dense-data");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Vec> means(opt.classes);
  for (auto& mu : means) {
    mu = Vec(opt.feature_dim);
    for (int j = 0; j < opt.feature_dim; ++j) mu(j) = normal(rng);
    mu *= opt.separation / mu.norm();
  }
  std::vector<Sample> all;
  all.reserve(opt.samples);
  for (int s = 0; s < opt.samples; ++s) {
    Sample smp;
    smp.label = s % opt.classes;
    for (int j = 0; j < opt.feature_dim; ++j) {
      const double v = means[smp.label](j) + opt.noise / std::sqrt(opt.feature_dim) * normal(rng);
      smp.features.emplace_back(j, v);
    }
    all.push_back(std::move(smp));
  }
  LabeledData out = split_train_validation(std::move(all), opt.validation_fraction, rng);
  out.train.feature_dim = out.validation.feature_dim = opt.feature_dim;
  out.train.classes = out.validation.classes = opt.classes;
  return out;
}

void write_dataset(std::ostream& os, const Dataset& data) {
  os << "c2dfb-dataset 1 " << data.feature_dim << ' ' << data.classes << ' ' << data.samples.size() << '\n';
  os << std::setprecision(17);
  for (const auto& s : data.samples) {
    os << s.label;
    for (const auto& [j, v] : s.features) os << ' ' << j << ':' << v;
    os << '\n';
  }
}

Dataset read_dataset(std::istream& is) {
  std::string magic;
  int version = 0;
  std::size_t n = 0;
  Dataset data;
  if (!(is >> magic >> version >> data.feature_dim >> data.classes >> n) || magic != "c2dfb-dataset" ||
      version != 1)
    throw IoError("dataset: bad header");
  std::string line;
  std::getline(is, line);
  data.samples.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    if (!std::getline(is, line)) throw IoError("dataset: expected " + std::to_string(n) + " rows");
    std::istringstream row(line);
    Sample s;
    if (!(row >> s.label) || s.label < 0 || s.label >= data.classes)
      throw IoError("dataset: bad label on row " + std::to_string(r));
    std::string tok;
    int last = -1;
    while (row >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos) throw IoError("dataset: bad feature '" + tok + "'");
      const int j = std::stoi(tok.substr(0, colon));
      const double v = std::stod(tok.substr(colon + 1));
      if (j <= last || j >= data.feature_dim || !std::isfinite(v))
        throw IoError("dataset: invalid feature '" + tok + "' on row " + std::to_string(r));
      last = j;
      s.features.emplace_back(j, v);
    }
    data.samples.push_back(std::move(s));
  }
  return data;
}

void save_dataset(const std::string& path, const Dataset& data) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path + " for writing");
  write_dataset(os, data);
  if (!os) throw IoError("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  return read_dataset(is);
}

std::vector<int> HeterogeneousSplit::counts() const {
  std::vector<int> c(node_count, 0);
  for (int a : assignment) ++c[a];
  return c;
}

std::vector<std::vector<int>> HeterogeneousSplit::class_histograms(const Dataset& data) const {
  std::vector<std::vector<int>> hist(node_count, std::vector<int>(data.classes, 0));
  for (std::size_t s = 0; s < assignment.size(); ++s) ++hist[assignment[s]][data.samples[s].label];
  return hist;
}

HeterogeneousSplit partition_heterogeneous(const Dataset& data, int node_count, double h,
                                           std::uint64_t seed) {
  if (node_count < 1) throw InvalidSpecError("split needs at least one node");
  if (node_count > 1 && !(h >= 1.0 / node_count - 1e-12 && h <= 1.0))
    throw InvalidSpecError("heterogeneity h must lie in [1/m, 1], got " + std::to_string(h));
  if (data.size() < static_cast<std::size_t>(node_count))
    throw InvalidSpecError("split error: " + std::to_string(data.size()) + " samples cannot cover " +
                           std::to_string(node_count) + " nodes");

  HeterogeneousSplit split;
  split.h = h;
  split.node_count = node_count;
  split.seed = seed;
  split.assignment.assign(data.size(), 0);
  if (node_count == 1) return split;

  Rng rng = make_rng(seed, "split");
  std::vector<std::vector<int>> by_class(data.classes);
  for (std::size_t s = 0; s < data.size(); ++s) by_class[data.samples[s].label].push_back(static_cast<int>(s));

  for (int c = 0; c < data.classes; ++c) {
    auto& members = by_class[c];
    if (members.empty()) continue;
    if (static_cast<int>(members.size()) < node_count)
      split.warnings.push_back("class " + std::to_string(c) + " has " + std::to_string(members.size()) +
                               " samples for " + std::to_string(node_count) + " nodes; split is degraded");
    std::shuffle(members.begin(), members.end(), rng);
    const int owner = c % node_count;
    const auto n_owner = static_cast<std::size_t>(std::llround(h * members.size()));
    std::size_t pos = 0;
    for (; pos < n_owner; ++pos) split.assignment[members[pos]] = owner;
    // The others receive the remainder in turn, starting at a random offset.
    std::uniform_int_distribution<int> offset(0, node_count - 2);
    int turn = offset(rng);
    for (; pos < members.size(); ++pos) {
      int node = turn % (node_count - 1);
      if (node >= owner) ++node;
      split.assignment[members[pos]] = node;
      ++turn;
    }
  }

  std::vector<int> counts = split.counts();
  for (int node = 0; node < node_count; ++node) {
    if (counts[node] > 0) continue;
    const int donor = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    for (std::size_t s = 0; s < split.assignment.size(); ++s) {
      if (split.assignment[s] == donor) {
        split.assignment[s] = node;
        --counts[donor];
        ++counts[node];
        break;
      }
    }
    split.warnings.push_back("node " + std::to_string(node) + " received no samples; borrowed one from node " +
                             std::to_string(donor));
  }
  return split;
}

NodeData to_node_data(const Dataset& data) {
  NodeData nd;
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t r = 0; r < data.size(); ++r) {
    for (const auto& [j, v] : data.samples[r].features) trip.emplace_back(static_cast<int>(r), j, v);
    nd.labels.push_back(data.samples[r].label);
  }
  nd.features.resize(static_cast<Eigen::Index>(data.size()), data.feature_dim);
  nd.features.setFromTriplets(trip.begin(), trip.end());
  return nd;
}

std::vector<NodeData> split_to_nodes(const Dataset& data, const HeterogeneousSplit& split) {
  std::vector<Dataset> parts(split.node_count);
  for (auto& p : parts) {
    p.feature_dim = data.feature_dim;
    p.classes = data.classes;
  }
  for (std::size_t s = 0; s < data.size(); ++s) parts[split.assignment[s]].samples.push_back(data.samples[s]);
  std::vector<NodeData> out;
  out.reserve(parts.size());
  for (int i = 0; i < split.node_count; ++i) {
    if (parts[i].samples.empty())
      throw InvalidSpecError("split error: node " + std::to_string(i) + " has an empty partition");
    out.push_back(to_node_data(parts[i]));
  }
  return out;
}

}  // namespace c2dfb
