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

#include "training/hungarian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mixocc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Shortest augmenting paths with row/column potentials, O(n^2 m).
// Rows and columns are addressed through index lists so that the tie-break
// pass can solve sub-problems without copying the matrix.
Assignment solve(const CostMatrix& c, std::span<const int> rows, std::span<const int> cols) {
  const int n = static_cast<int>(rows.size());
  const int m = static_cast<int>(cols.size());
  Assignment out;
  out.col_of_row.assign(n, -1);
  if (n == 0) return out;

  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  std::vector<double> minv(m + 1);
  std::vector<char> used(m + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = c(rows[i0 - 1], cols[j - 1]) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  for (int j = 1; j <= m; ++j) {
    if (p[j] != 0) out.col_of_row[p[j] - 1] = j - 1;
  }
  for (int i = 0; i < n; ++i) out.cost += c(rows[i], cols[out.col_of_row[i]]);
  return out;
}

void check(const CostMatrix& cost) {
  if (cost.rows > cost.cols) throw std::invalid_argument("hungarian: more rows than columns");
  for (double x : cost.data) {
    if (!std::isfinite(x)) throw std::invalid_argument("hungarian: non-finite cost");
  }
}

}  // namespace

Assignment hungarian_unordered(const CostMatrix& cost) {
  check(cost);
  std::vector<int> rows(cost.rows), cols(cost.cols);
  for (int i = 0; i < cost.rows; ++i) rows[i] = i;
  for (int j = 0; j < cost.cols; ++j) cols[j] = j;
  return solve(cost, rows, cols);
}

Assignment hungarian(const CostMatrix& cost) {
  Assignment best = hungarian_unordered(cost);
  const int n = cost.rows;
  if (n <= 1) {
    if (n == 1) {
      // Smallest column attaining the row minimum.
      int arg = 0;
      for (int j = 1; j < cost.cols; ++j) {
        if (cost(0, j) < cost(0, arg)) arg = j;
      }
      best.col_of_row = {arg};
      best.cost = cost(0, arg);
    }
    return best;
  }
  const double opt = best.cost;
  double scale = 1.0;
  for (double x : cost.data) scale = std::max(scale, std::abs(x));
  const double tol = 1e-12 * scale * n;

  // Fix rows in order, each to the smallest column that keeps the optimum
  // reachable.
  Assignment out;
  out.col_of_row.assign(n, -1);
  std::vector<char> taken(cost.cols, 0);
  double fixed = 0.0;
  for (int i = 0; i < n; ++i) {
    std::vector<int> rest_rows;
    for (int r = i + 1; r < n; ++r) rest_rows.push_back(r);
    bool done = false;
    for (int j = 0; j < cost.cols && !done; ++j) {
      if (taken[j]) continue;
      const double head = fixed + cost(i, j);
      std::vector<int> rest_cols;
      for (int k = 0; k < cost.cols; ++k) {
        if (!taken[k] && k != j) rest_cols.push_back(k);
      }
      // Row-minimum lower bound prunes most candidates without a solve.
      double bound = head;
      for (int r : rest_rows) {
        double mn = kInf;
        for (int k : rest_cols) mn = std::min(mn, cost(r, k));
        bound += mn;
      }
      if (bound > opt + tol) continue;
      const double total = head + solve(cost, rest_rows, rest_cols).cost;
      if (total <= opt + tol) {
        out.col_of_row[i] = j;
        taken[j] = 1;
        fixed = head;
        done = true;
      }
    }
    if (!done) return best;  // numerical corner case; keep the raw optimum
  }
  out.cost = 0.0;
  for (int i = 0; i < n; ++i) out.cost += cost(i, out.col_of_row[i]);
  return out;
}

}  // namespace mixocc
