// Copyright (c) 2026 dpgrad authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <numeric>
#include <utility>
#include <vector>

#include "dpgrad/alloc_meter.hpp"
#include "dpgrad/common.hpp"

namespace dpgrad {

/// Dense n-dimensional array with row-major contiguous storage.  All math runs
/// through Eigen maps over the buffer; allocations report to AllocMeter so the
/// benchmark's instrumented peak reflects every large buffer in the engine.
template <class Scalar = double>
class TensorT {
 public:
  TensorT() = default;

  explicit TensorT(std::vector<Index> shape) : shape_(std::move(shape)) {
    size_ = 1;
    for (Index e : shape_) {
      if (e <= 0) throw ShapeError("tensor extent must be positive, got shape " + shape_str(shape_));
      size_ *= e;
    }
    allocate();
    std::fill(data_, data_ + size_, Scalar(0));
  }

  TensorT(std::initializer_list<Index> shape) : TensorT(std::vector<Index>(shape)) {}

  static TensorT from(std::vector<Index> shape, std::initializer_list<Scalar> values) {
    TensorT t(std::move(shape));
    if (static_cast<Index>(values.size()) != t.size_)
      throw ShapeError("initializer length does not match shape " + shape_str(t.shape_));
    std::copy(values.begin(), values.end(), t.data_);
    return t;
  }

  TensorT(const TensorT& other) : shape_(other.shape_), size_(other.size_) {
    if (size_ > 0) {
      allocate();
      std::copy(other.data_, other.data_ + size_, data_);
    }
  }

  TensorT(TensorT&& other) noexcept
      : shape_(std::move(other.shape_)), size_(other.size_), data_(other.data_) {
    other.size_ = 0;
    other.data_ = nullptr;
    other.shape_.clear();
  }

  TensorT& operator=(const TensorT& other) {
    if (this != &other) {
      TensorT tmp(other);
      swap(tmp);
    }
    return *this;
  }

  TensorT& operator=(TensorT&& other) noexcept {
    if (this != &other) {
      release();
      shape_ = std::move(other.shape_);
      size_ = other.size_;
      data_ = other.data_;
      other.shape_.clear();
      other.size_ = 0;
      other.data_ = nullptr;
    }
    return *this;
  }

  ~TensorT() { release(); }

  void swap(TensorT& other) noexcept {
    shape_.swap(other.shape_);
    std::swap(size_, other.size_);
    std::swap(data_, other.data_);
  }

  bool empty() const { return size_ == 0; }
  Index size() const { return size_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index extent(Index i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::span<const Index> shape() const { return shape_; }

  Scalar* data() { return data_; }
  const Scalar* data() const { return data_; }

  Scalar& operator()(Index i) { return data_[i]; }
  Scalar operator()(Index i) const { return data_[i]; }
  Scalar& operator()(Index i, Index j) {
    assert(rank() == 2);
    return data_[i * extent(1) + j];
  }
  Scalar operator()(Index i, Index j) const {
    assert(rank() == 2);
    return data_[i * extent(1) + j];
  }
  Scalar& operator()(Index i, Index j, Index k) {
    assert(rank() == 3);
    return data_[(i * extent(1) + j) * extent(2) + k];
  }
  Scalar operator()(Index i, Index j, Index k) const {
    assert(rank() == 3);
    return data_[(i * extent(1) + j) * extent(2) + k];
  }

  /// Flat view over all elements.
  Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> vec() { return {data_, size_}; }
  Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> vec() const { return {data_, size_}; }

  /// Rank-2 view.
  Eigen::Map<MatrixR<Scalar>> mat() {
    assert(rank() == 2);
    return {data_, extent(0), extent(1)};
  }
  Eigen::Map<const MatrixR<Scalar>> mat() const {
    assert(rank() == 2);
    return {data_, extent(0), extent(1)};
  }

  /// Arbitrary rows x cols reshape; requires rows*cols == size().
  Eigen::Map<MatrixR<Scalar>> reshaped(Index rows, Index cols) {
    if (rows * cols != size_) throw ShapeError("reshape does not preserve element count");
    return {data_, rows, cols};
  }
  Eigen::Map<const MatrixR<Scalar>> reshaped(Index rows, Index cols) const {
    if (rows * cols != size_) throw ShapeError("reshape does not preserve element count");
    return {data_, rows, cols};
  }

  /// For a rank-3 tensor {B, T, d}: the i-th example as a T x d matrix view.
  Eigen::Map<MatrixR<Scalar>> slice(Index i) {
    assert(rank() == 3);
    return {data_ + i * extent(1) * extent(2), extent(1), extent(2)};
  }
  Eigen::Map<const MatrixR<Scalar>> slice(Index i) const {
    assert(rank() == 3);
    return {data_ + i * extent(1) * extent(2), extent(1), extent(2)};
  }

  /// Reinterprets the extents without touching storage.
  void reshape(std::vector<Index> shape) {
    Index n = 1;
    for (Index e : shape) n *= e;
    if (n != size_) throw ShapeError("reshape does not preserve element count");
    shape_ = std::move(shape);
  }

  void fill(Scalar v) { std::fill(data_, data_ + size_, v); }
  void set_zero() { fill(Scalar(0)); }

  bool all_finite() const {
    for (Index i = 0; i < size_; ++i)
      if (!std::isfinite(data_[i])) return false;
    return true;
  }

 private:
  void allocate() {
    data_ = new Scalar[static_cast<std::size_t>(size_)];
    AllocMeter::on_alloc(size_);
  }
  void release() {
    if (data_ != nullptr) {
      delete[] data_;
      AllocMeter::on_free(size_);
      data_ = nullptr;
      size_ = 0;
    }
  }

  std::vector<Index> shape_;
  Index size_ = 0;
  Scalar* data_ = nullptr;
};

using Tensor = TensorT<double>;

/// Counter-based deterministic RNG.  Draw i depends only on (seed, i), so
/// streams are reproducible independent of how calls are batched.  Not
/// thread-safe: one instance per thread.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64() {
    ++counter_;
    return mix64(seed_ + counter_ * kGamma);
  }

  /// Uniform on the open interval (0, 1).
  double uniform01() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; consumes exactly two counter ticks.
  double normal() {
    const double u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Uniform integer in [0, n); rejection sampling, exact.
  Index uniform_index(Index n) {
    assert(n > 0);
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t rem = (UINT64_MAX % un + 1) % un;  // 2^64 mod n
    const std::uint64_t threshold = 0 - rem;
    std::uint64_t v = next_u64();
    while (rem != 0 && v >= threshold) v = next_u64();
    return static_cast<Index>(v % un);
  }

  bool bernoulli(double p) { return uniform01() < p; }

  /// Independent stream derived from this seed; used to separate data/init/
  /// sampling/noise streams of one run.
  SeededRng fork(std::uint64_t stream) const { return SeededRng(mix64(seed_ ^ mix64(stream + 0x6A09E667F3BCC909ull))); }

  static std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

/// Exact matrix product of two rank-2 tensors.
template <class Scalar>
TensorT<Scalar> gemm(const TensorT<Scalar>& a, const TensorT<Scalar>& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw ShapeError("gemm expects rank-2 operands, got " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  if (a.extent(1) != b.extent(0))
    throw ShapeError("gemm inner extents mismatch: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  TensorT<Scalar> c({a.extent(0), b.extent(1)});
  c.mat().noalias() = a.mat() * b.mat();
  return c;
}

/// I.i.d. N(0, std^2) samples; std = 0 yields the zero tensor.  The standard
/// draw happens first and is scaled afterwards, so streams at different stds
/// share the same underlying normals.
template <class Scalar>
TensorT<Scalar> gaussian_noise(std::vector<Index> shape, double std, SeededRng& rng) {
  if (std < 0) throw ValueError("gaussian_noise: std must be nonnegative");
  TensorT<Scalar> t(std::move(shape));
  Scalar* p = t.data();
  for (Index i = 0; i < t.size(); ++i) p[i] = static_cast<Scalar>(std * rng.normal());
  return t;
}

inline Tensor gaussian_noise(std::vector<Index> shape, double std, SeededRng& rng) {
  return gaussian_noise<double>(std::move(shape), std, rng);
}

}  // namespace dpgrad
