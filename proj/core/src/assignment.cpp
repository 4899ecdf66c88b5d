#include "crossview/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace crossview {

namespace {

// Jonker-Volgenant style shortest augmenting path solver for the square
// min-cost assignment problem. O(n^3). `a` is n x n row-major and may hold
// +inf for forbidden entries as long as a perfect matching of finite cost
// exists (the padded construction below guarantees one).
std::vector<int> hungarian(const std::vector<double>& a, std::size_t n) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = static_cast<int>(i);
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = static_cast<std::size_t>(p[j0]);
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = static_cast<int>(j0);
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[static_cast<std::size_t>(p[j])] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = static_cast<std::size_t>(way[j0]);
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (std::size_t j = 1; j <= n; ++j) {
    if (p[j] > 0) row_to_col[static_cast<std::size_t>(p[j] - 1)] = static_cast<int>(j - 1);
  }
  return row_to_col;
}

}  // namespace

Assignment solve_assignment(const std::vector<double>& cost, std::size_t rows, std::size_t cols,
                            double unmatched_cost) {
  if (cost.size() != rows * cols) {
    throw std::invalid_argument("solve_assignment: cost size mismatch");
  }
  Assignment out;
  if (rows == 0 && cols == 0) return out;

  // Pad to (rows+cols) square: diagonal dummies absorb unmatched entities,
  // the bottom-right block is zero so dummies can pair with each other.
  const std::size_t n = rows + cols;
  const double inf = kInfeasible;
  std::vector<double> a(n * n, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < cols; ++j) a[r * n + j] = cost[r * cols + j];
    for (std::size_t j = cols; j < n; ++j) {
      a[r * n + j] = (j - cols == r) ? unmatched_cost : inf;
    }
  }
  for (std::size_t r = rows; r < n; ++r) {
    for (std::size_t j = 0; j < cols; ++j) {
      a[r * n + j] = (r - rows == j) ? unmatched_cost : inf;
    }
  }

  const std::vector<int> row_to_col = hungarian(a, n);
  for (std::size_t r = 0; r < rows; ++r) {
    const int c = row_to_col[r];
    if (c >= 0 && static_cast<std::size_t>(c) < cols &&
        std::isfinite(cost[r * cols + static_cast<std::size_t>(c)])) {
      out.matches.push_back({r, static_cast<std::size_t>(c)});
      out.total_cost += cost[r * cols + static_cast<std::size_t>(c)];
    } else {
      out.unmatched_rows.push_back(r);
    }
  }
  std::vector<char> col_matched(cols, false);
  for (const auto& [r, c] : out.matches) col_matched[c] = true;
  for (std::size_t c = 0; c < cols; ++c) {
    if (!col_matched[c]) out.unmatched_cols.push_back(c);
  }
  return out;
}

}  // namespace crossview
