// Copyright (c) 2026 dpgrad authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

namespace dpgrad {

using Index = Eigen::Index;

// Engine buffers are row-major contiguous; Eigen's default is column-major.
template <class Scalar>
using MatrixR = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Matrix = MatrixR<double>;
using Vector = Eigen::VectorXd;

using MatMap = Eigen::Map<Matrix>;
using ConstMatMap = Eigen::Map<const Matrix>;
using VecMap = Eigen::Map<Vector>;
using ConstVecMap = Eigen::Map<const Vector>;

using IntMatrix = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using IntVector = Eigen::VectorXi;

/// Mismatched tensor/matrix extents.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Out-of-domain scalar parameter (negative std, C <= 0, ...).
struct ValueError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Operation called in the wrong order (e.g. backward without forward).
struct StateError : std::logic_error {
  using std::logic_error::logic_error;
};

/// A numeric solve could not meet its target within its bracket.
struct InfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad key/value in a run-config file; messages carry file:line context.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string shape_str(std::span<const Index> shape);

/// Formats a double with 9 significant digits (the CSV serialization contract).
std::string fmt9(double v);

}  // namespace dpgrad
