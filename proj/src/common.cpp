// Copyright (c) 2026 dpgrad authors
// SPDX-License-Identifier: Apache-2.0
#include "dpgrad/common.hpp"

#include <cstdio>

namespace dpgrad {

std::string shape_str(std::span<const Index> shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) s += " x ";
    s += std::to_string(shape[i]);
  }
  s += "]";
  return s;
}

std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace dpgrad
