// Copyright 2026 The c2dfb Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace c2dfb {

using Vec = Eigen::VectorXd;

// One row per node. Row-major so that a node's parameters are contiguous.
using Stack = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Words = std::uint64_t;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidSpecError : public Error {
 public:
  using Error::Error;
};

class InvalidConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// Raised by the inner solver when its progress metric blows up.
class DivergenceError : public NumericError {
 public:
  using NumericError::NumericError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

inline Vec row_of(const Stack& s, Eigen::Index i) { return s.row(i).transpose(); }

// Mean over nodes, as a column vector.
inline Vec node_mean(const Stack& s) { return s.colwise().mean().transpose(); }

// ||S - 1 s_bar||_F^2
inline double consensus_error(const Stack& s) {
  const Eigen::RowVectorXd mean = s.colwise().mean();
  return (s.rowwise() - mean).squaredNorm();
}

}  // namespace c2dfb
