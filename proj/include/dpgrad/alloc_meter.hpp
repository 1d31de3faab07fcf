// Copyright (c) 2026 dpgrad authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstdint>

namespace dpgrad {

// Process-wide counter of live 64-bit reals held by Tensor storage.  This is
// the memory measurement the benchmark reports: deterministic and directly
// comparable to the analytic ledger, unlike OS RSS.  Small fixed-size locals
// (per-row vectors, norm accumulators) and Eigen's internal gemm blocking
// buffers are not counted; they fall under the ledger's bookkeeping constant.
class AllocMeter {
 public:
  static void on_alloc(std::int64_t n);
  static void on_free(std::int64_t n);

  static std::int64_t live();
  /// High-water mark of live() since the last reset_watermarks().
  static std::int64_t peak();
  /// Largest single allocation since the last reset_watermarks().
  static std::int64_t largest_single();

  static void reset_watermarks();

 private:
  static std::atomic<std::int64_t> live_;
  static std::atomic<std::int64_t> peak_;
  static std::atomic<std::int64_t> largest_;
};

/// Resets watermarks on construction; samples them on demand.
struct MeterScope {
  MeterScope() { AllocMeter::reset_watermarks(); }
  std::int64_t peak() const { return AllocMeter::peak(); }
  std::int64_t largest_single() const { return AllocMeter::largest_single(); }
};

}  // namespace dpgrad
