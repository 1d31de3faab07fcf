// Copyright (c) 2026 dpgrad authors
// SPDX-License-Identifier: Apache-2.0
#include "dpgrad/alloc_meter.hpp"

namespace dpgrad {

std::atomic<std::int64_t> AllocMeter::live_{0};
std::atomic<std::int64_t> AllocMeter::peak_{0};
std::atomic<std::int64_t> AllocMeter::largest_{0};

void AllocMeter::on_alloc(std::int64_t n) {
  const std::int64_t now = live_.fetch_add(n, std::memory_order_relaxed) + n;
  std::int64_t prev = peak_.load(std::memory_order_relaxed);
  while (prev < now && !peak_.compare_exchange_weak(prev, now, std::memory_order_relaxed)) {
  }
  prev = largest_.load(std::memory_order_relaxed);
  while (prev < n && !largest_.compare_exchange_weak(prev, n, std::memory_order_relaxed)) {
  }
}

void AllocMeter::on_free(std::int64_t n) { live_.fetch_sub(n, std::memory_order_relaxed); }

std::int64_t AllocMeter::live() { return live_.load(std::memory_order_relaxed); }
std::int64_t AllocMeter::peak() { return peak_.load(std::memory_order_relaxed); }
std::int64_t AllocMeter::largest_single() { return largest_.load(std::memory_order_relaxed); }

void AllocMeter::reset_watermarks() {
  const std::int64_t now = live_.load(std::memory_order_relaxed);
  peak_.store(now, std::memory_order_relaxed);
  largest_.store(0, std::memory_order_relaxed);
}

}  // namespace dpgrad
