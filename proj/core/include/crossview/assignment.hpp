#pragma once

#include <cstddef>
#include <limits>
#include <vector>

namespace crossview {

/// Result of a gated one-to-one assignment between two entity sets.
struct Assignment {
  /// matched[k] = {row, col} pairs actually assigned.
  std::vector<std::pair<std::size_t, std::size_t>> matches;
  std::vector<std::size_t> unmatched_rows;
  std::vector<std::size_t> unmatched_cols;
  double total_cost = 0.0;  // sum of matched costs only
};

constexpr double kInfeasible = std::numeric_limits<double>::infinity();

/// Optimal gated assignment. cost is row-major (rows x cols); entries equal
/// to kInfeasible can never be matched. Each unmatched entity is charged
/// `unmatched_cost`, and the solver minimizes
///   sum(matched costs) + unmatched_cost * (#unmatched rows + #unmatched cols).
/// With every feasible cost <= unmatched_cost this yields the
/// maximum-cardinality matching of minimum total cost. Exact (Hungarian
/// algorithm on the padded square matrix).
Assignment solve_assignment(const std::vector<double>& cost, std::size_t rows, std::size_t cols,
                            double unmatched_cost);

}  // namespace crossview
