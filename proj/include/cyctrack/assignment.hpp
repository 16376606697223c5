#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "cyctrack/appearance.hpp"

namespace cyctrack {

struct Assignment {
  std::size_t row = 0;
  std::size_t col = 0;

  friend bool operator==(const Assignment&, const Assignment&) = default;
};

namespace detail {

// Shortest augmenting path Hungarian method with potentials, O(n^2 m) for an
// n x m matrix with n <= m. Returns the column of each row.
inline std::vector<std::size_t> hungarian_rows_le_cols(const std::vector<double>& cost,
                                                       std::size_t n, std::size_t m) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * m + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
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
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n, 0);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

}  // namespace detail

/// Optimal bipartite matching over admissible pairs: the matching uses as
/// many admissible pairs as possible and, among those, has minimum total
/// cost. Inadmissible pairs are never returned. Output is sorted by row.
inline std::vector<Assignment> solve_assignment(const CostMatrix& c) {
  const std::size_t rows = c.rows();
  const std::size_t cols = c.cols();
  if (rows == 0 || cols == 0) return {};

  double max_abs = 0.0;
  bool any = false;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < cols; ++k) {
      if (c.admissible(r, k)) {
        if (!std::isfinite(c.value(r, k))) {
          throw ContractViolation("solve_assignment: admissible cost is not finite");
        }
        any = true;
        max_abs = std::max(max_abs, std::abs(c.value(r, k)));
      }
    }
  }
  if (!any) return {};

  // Any matching with one more admissible pair beats any with fewer.
  const double forbidden = 2.0 * max_abs * static_cast<double>(std::min(rows, cols) + 1) + 1.0;

  const bool transpose = rows > cols;
  const std::size_t n = transpose ? cols : rows;
  const std::size_t m = transpose ? rows : cols;
  std::vector<double> cost(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t r = transpose ? j : i;
      const std::size_t k = transpose ? i : j;
      cost[i * m + j] = c.admissible(r, k) ? c.value(r, k) : forbidden;
    }
  }

  const std::vector<std::size_t> sol = detail::hungarian_rows_le_cols(cost, n, m);
  std::vector<Assignment> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = transpose ? sol[i] : i;
    const std::size_t k = transpose ? i : sol[i];
    if (c.admissible(r, k)) out.push_back({r, k});
  }
  std::sort(out.begin(), out.end(),
            [](const Assignment& a, const Assignment& b) { return a.row < b.row; });
  return out;
}

/// Sum of costs of the given pairs, accumulated in row order.
inline double assignment_cost(const CostMatrix& c, const std::vector<Assignment>& pairs) {
  double total = 0.0;
  for (const auto& p : pairs) total += c.value(p.row, p.col);
  return total;
}

}  // namespace cyctrack
