#include "crossview/assignment.hpp"
#include "crossview/tracking.hpp"

#include <doctest.h>

#include <random>

using namespace crossview;

namespace {

/// Exhaustive search over every gated matching (all subsets of feasible
/// pairs forming a one-to-one matching), scoring with the same objective:
/// matched costs plus unmatched_cost per unmatched entity.
struct BruteForce {
  const std::vector<double>& cost;
  std::size_t rows, cols;
  double unmatched_cost;
  double best = std::numeric_limits<double>::infinity();

  void search(std::size_t row, std::vector<int>& col_used, double matched_sum,
              std::size_t matched_count) {
    if (row == rows) {
      const double total = matched_sum +
                           unmatched_cost * (static_cast<double>(rows - matched_count) +
                                             static_cast<double>(cols - matched_count));
      best = std::min(best, total);
      return;
    }
    search(row + 1, col_used, matched_sum, matched_count);  // leave row unmatched
    for (std::size_t c = 0; c < cols; ++c) {
      if (col_used[c]) continue;
      const double v = cost[row * cols + c];
      if (!std::isfinite(v)) continue;
      col_used[c] = 1;
      search(row + 1, col_used, matched_sum + v, matched_count + 1);
      col_used[c] = 0;
    }
  }
};

double objective(const Assignment& a, double unmatched_cost) {
  return a.total_cost + unmatched_cost * (static_cast<double>(a.unmatched_rows.size()) +
                                          static_cast<double>(a.unmatched_cols.size()));
}

}  // namespace

TEST_CASE("associate basics") {
  const double gate = 5.0;
  {
    const Assignment a = associate({{0, 0}}, {{0.3, 0}}, gate);
    REQUIRE(a.matches.size() == 1);
    CHECK(a.matches[0] == std::pair<std::size_t, std::size_t>{0, 0});
  }
  {
    const Assignment a = associate({{0, 0}}, {{6.0, 0}}, gate);
    CHECK(a.matches.empty());
    CHECK(a.unmatched_rows == std::vector<std::size_t>{0});
    CHECK(a.unmatched_cols == std::vector<std::size_t>{0});
  }
  {
    const Assignment a = associate({}, {}, gate);
    CHECK(a.matches.empty());
  }
}

TEST_CASE("assignment equals factorial brute force on random instances") {
  std::mt19937 rng(61);
  std::uniform_real_distribution<double> pos(-8.0, 8.0);
  const double gate = 6.0;
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t rows = 6, cols = 6;
    std::vector<Vec2> preds, dets;
    for (std::size_t i = 0; i < rows; ++i) preds.emplace_back(pos(rng), pos(rng));
    for (std::size_t i = 0; i < cols; ++i) dets.emplace_back(pos(rng), pos(rng));

    std::vector<double> cost(rows * cols, kInfeasible);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        const double d2 = (preds[r] - dets[c]).squaredNorm();
        if (d2 <= gate * gate) cost[r * cols + c] = d2;
      }
    }
    const Assignment got = associate(preds, dets, gate);

    BruteForce bf{cost, rows, cols, gate * gate};
    std::vector<int> used(cols, 0);
    bf.search(0, used, 0.0, 0);
    CHECK(objective(got, gate * gate) == doctest::Approx(bf.best).epsilon(1e-9));
  }
}

TEST_CASE("assignment optimality up to 7x7, rectangular included") {
  std::mt19937 rng(67);
  std::uniform_real_distribution<double> pos(-5.0, 5.0);
  std::uniform_int_distribution<std::size_t> size(0, 7);
  const double gate = 4.0;
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t rows = size(rng), cols = size(rng);
    std::vector<Vec2> preds, dets;
    for (std::size_t i = 0; i < rows; ++i) preds.emplace_back(pos(rng), pos(rng));
    for (std::size_t i = 0; i < cols; ++i) dets.emplace_back(pos(rng), pos(rng));
    std::vector<double> cost(rows * cols, kInfeasible);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        const double d2 = (preds[r] - dets[c]).squaredNorm();
        if (d2 <= gate * gate) cost[r * cols + c] = d2;
      }
    }
    const Assignment got = associate(preds, dets, gate);
    BruteForce bf{cost, rows, cols, gate * gate};
    std::vector<int> used(cols, 0);
    bf.search(0, used, 0.0, 0);
    if (rows == 0 && cols == 0) {
      CHECK(got.matches.empty());
    } else {
      CHECK(objective(got, gate * gate) <= bf.best + 1e-9);
    }
  }
}
