// Copyright 2026 The mixocc Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <span>
#include <stdexcept>
#include <vector>

namespace mixocc {

// Dense row-major cost matrix.
struct CostMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  CostMatrix() = default;
  CostMatrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}
  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

struct Assignment {
  std::vector<int> col_of_row;  // injective, size == rows
  double cost = 0.0;
};

/// Minimum-cost injective assignment of every row to a distinct column
/// (rows <= cols). Among co-optimal assignments the lexicographically
/// smallest `col_of_row` is returned. Throws std::invalid_argument when
/// rows > cols or a cost is not finite.
Assignment hungarian(const CostMatrix& cost);

/// Plain shortest-augmenting-path solve without the tie-break pass.
Assignment hungarian_unordered(const CostMatrix& cost);

}  // namespace mixocc
