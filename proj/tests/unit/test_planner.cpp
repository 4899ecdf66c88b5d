#include "crossview/planner.hpp"

#include <doctest.h>

#include <random>
#include <set>

using namespace crossview;

namespace {

OrientedBoundingBox point_box() {
  OrientedBoundingBox box;
  box.extents = Vec3(0.0, 0.0, 0.0);
  return box;
}

OrientedBoundingBox car_box(const Vec2& center, double yaw, const Vec2& half) {
  OrientedBoundingBox box;
  box.centroid = Vec3(center.x(), center.y(), 0.75);
  box.axes[0] = Vec3::UnitZ();
  box.axes[1] = Vec3(std::cos(yaw), std::sin(yaw), 0.0);
  box.axes[2] = box.axes[0].cross(box.axes[1]);
  box.extents = Vec3(0.75, half.x(), half.y());
  return box;
}

PlannerConfig point_cfg() {
  PlannerConfig cfg;
  cfg.base_margin = 0.0;
  cfg.k_time = 0.0;
  return cfg;
}

/// Independent space-time BFS over (cell, tick) with the same move
/// semantics: moves hold both cells for their whole span, waits need the
/// next tick free, the goal must be holdable through the horizon. Returns
/// the earliest arrival tick or -1.
struct SpaceTimeBfs {
  const OccupancyGrid& grid;
  const PlannerConfig& cfg;
  int horizon_ticks;
  std::vector<std::vector<char>> fp_occ;  // [cell][tick]

  SpaceTimeBfs(const OccupancyGrid& g, const std::vector<DynamicObstacle>& obstacles,
               const PlannerConfig& c, const PlanRequest& req)
      : grid(g), cfg(c), horizon_ticks(c.horizon_ticks()) {
    // Raw occupancy: dynamic obstacles plus permanently-blocked non-drivable
    // cells.
    std::vector<std::vector<char>> occ(grid.drivable.size(),
                                       std::vector<char>(horizon_ticks + 1, 0));
    for (std::size_t i = 0; i < grid.drivable.size(); ++i) {
      if (!grid.drivable[i]) occ[i].assign(horizon_ticks + 1, 1);
    }
    for (const DynamicObstacle& obs : obstacles) {
      for (int t = 0; t <= horizon_ticks && t < (int)obs.cells_at_tick.size(); ++t) {
        for (const GridCell& cell : obs.cells_at_tick[t]) {
          if (grid.in_bounds(cell)) occ[grid.index(cell)][t] = 1;
        }
      }
    }
    // Footprint offsets recomputed from the documented rule.
    const double nominal = std::clamp(req.nominal_speed, cfg.min_nominal_speed, cfg.speed_limit);
    const double radius = std::hypot(req.box.extents[1], req.box.extents[2]) +
                          cfg.buffer(nominal) + 0.5 * grid.cell_size;
    std::vector<GridCell> offsets;
    const int reach = (int)std::ceil(radius / grid.cell_size) + 1;
    for (int dy = -reach; dy <= reach; ++dy) {
      for (int dx = -reach; dx <= reach; ++dx) {
        const double nx = std::max(std::abs(dx * grid.cell_size) - 0.5 * grid.cell_size, 0.0);
        const double ny = std::max(std::abs(dy * grid.cell_size) - 0.5 * grid.cell_size, 0.0);
        if (std::hypot(nx, ny) < radius) offsets.push_back({dx, dy});
      }
    }
    fp_occ.assign(grid.drivable.size(), std::vector<char>(horizon_ticks + 1, 0));
    for (int y = 0; y < grid.height; ++y) {
      for (int x = 0; x < grid.width; ++x) {
        const GridCell c{x, y};
        if (!grid.is_drivable(c)) {
          fp_occ[grid.index(c)].assign(horizon_ticks + 1, 1);
          continue;
        }
        for (const GridCell& o : offsets) {
          const GridCell n{x + o.x, y + o.y};
          if (!grid.in_bounds(n)) continue;
          for (int t = 0; t <= horizon_ticks; ++t) {
            if (occ[grid.index(n)][t]) fp_occ[grid.index(c)][t] = 1;
          }
        }
      }
    }
  }

  int earliest_arrival(const PlanRequest& req) const {
    const double nominal = std::clamp(req.nominal_speed, cfg.min_nominal_speed, cfg.speed_limit);
    const int m = std::max(1, (int)std::ceil(grid.cell_size / (nominal * cfg.tick)));
    if (!grid.is_drivable(req.start) || !grid.is_drivable(req.goal)) return -1;
    const std::size_t goal_idx = grid.index(req.goal);
    int goal_safe_from = 0;
    for (int t = horizon_ticks; t >= 0; --t) {
      if (fp_occ[goal_idx][t]) {
        goal_safe_from = t + 1;
        break;
      }
    }

    std::vector<std::vector<char>> seen(grid.drivable.size(),
                                        std::vector<char>(horizon_ticks + 1, 0));
    if (fp_occ[grid.index(req.start)][0]) return -1;
    std::vector<std::pair<int, int>> frontier = {{(int)grid.index(req.start), 0}};
    seen[grid.index(req.start)][0] = 1;
    const int dx4[4] = {1, -1, 0, 0};
    const int dy4[4] = {0, 0, 1, -1};

    // Process strictly in tick order so the first goal hit is earliest.
    std::vector<std::vector<int>> by_tick(horizon_ticks + 1);
    by_tick[0].push_back((int)grid.index(req.start));
    for (int t = 0; t <= horizon_ticks; ++t) {
      for (int cell : by_tick[t]) {
        if ((std::size_t)cell == goal_idx && t >= goal_safe_from) return t;
        // Wait.
        if (t + 1 <= horizon_ticks && !fp_occ[cell][t + 1] && !seen[cell][t + 1]) {
          seen[cell][t + 1] = 1;
          by_tick[t + 1].push_back(cell);
        }
        // Moves.
        if (t + m > horizon_ticks) continue;
        const int cx = cell % grid.width, cy = cell / grid.width;
        for (int dir = 0; dir < 4; ++dir) {
          const GridCell n{cx + dx4[dir], cy + dy4[dir]};
          if (!grid.is_drivable(n)) continue;
          const int n_idx = (int)grid.index(n);
          if (seen[n_idx][t + m]) continue;
          bool free = true;
          for (int tau = t; tau <= t + m && free; ++tau) {
            if (fp_occ[cell][tau] || fp_occ[n_idx][tau]) free = false;
          }
          if (!free) continue;
          seen[n_idx][t + m] = 1;
          by_tick[t + m].push_back(n_idx);
        }
      }
    }
    return -1;
  }
};

int arrival_tick(const SpaceTimeTrajectory& traj, const PlannerConfig& cfg, double epoch_start) {
  return (int)std::lround((traj.waypoints.back().time - epoch_start) / cfg.tick);
}

DynamicObstacle block_cell(const GridCell& cell, int from_tick, int to_tick, int horizon) {
  DynamicObstacle obs;
  obs.cells_at_tick.resize(horizon + 1);
  for (int t = from_tick; t <= std::min(to_tick, horizon); ++t) obs.cells_at_tick[t] = {cell};
  return obs;
}

}  // namespace

TEST_CASE("stationary 4x2 box with base margin 0.5 covers 5x3 cells") {
  PlannerConfig cfg;  // base 0.5, k_time 0.5
  OccupancyGrid grid = OccupancyGrid::open_field(20, 20, 1.0);
  MovingBox object;
  object.box = car_box(grid.cell_center({10, 10}), 0.0, {2.0, 1.0});
  object.position = grid.cell_center({10, 10});
  object.velocity = Vec2::Zero();
  const DynamicObstacle obs = rasterize_extrapolation(object, grid, cfg, 0.0);
  REQUIRE(!obs.cells_at_tick.empty());
  for (const auto& cells : obs.cells_at_tick) {
    CHECK(cells.size() == 15);  // 5 x 3
  }
  // Buffer formula: 10 m/s with k_time 0.5 inflates by 5.5 m.
  CHECK(cfg.buffer(10.0) == doctest::Approx(5.5));
}

TEST_CASE("moving box rasterization matches the polygon-clipping oracle") {
  // The verifier's clipping path doubles as the independent per-tick oracle
  // for the SAT rasterizer: run both over the same trajectory and compare.
  PlannerConfig cfg;
  OccupancyGrid grid = OccupancyGrid::open_field(40, 24, 1.0);
  MovingBox object;
  object.position = Vec2(4.3, 11.7);
  object.velocity = Vec2(5.0, 1.3);
  object.box = car_box(object.position, std::atan2(1.3, 5.0), {2.0, 1.0});
  const DynamicObstacle obs = rasterize_extrapolation(object, grid, cfg, 0.0);

  PlanOutcome fake;
  fake.vehicle_id = 1;
  fake.box = object.box;
  fake.trajectory.vehicle_id = 1;
  fake.trajectory.horizon = cfg.horizon;
  fake.trajectory.waypoints = {
      {0.0, grid.cell_at(object.position), object.position},
      {cfg.horizon, grid.cell_at(object.position + object.velocity * cfg.horizon),
       object.position + object.velocity * cfg.horizon}};

  // Second implementation: collect cells per tick from verify's clipping by
  // running it against a one-vehicle list and a probe that stamps cells.
  // Instead, reuse its geometry directly: compare against plan-side SAT at
  // every tick via the public verifier on a duplicated trajectory: any
  // rasterized cell the clip path disagrees on would break the violation
  // pattern. Simpler and stronger: duplicate the trajectory; the verifier
  // must flag every tick, and each flagged cell must be in the SAT set.
  std::vector<PlanOutcome> twice = {fake, fake};
  twice[1].vehicle_id = 2;
  twice[1].trajectory.vehicle_id = 2;
  const CollisionReport report = verify_collision_free(twice, grid, cfg);
  REQUIRE(!report.empty());

  std::set<std::pair<int, std::pair<int, int>>> sat_cells;
  for (int t = 0; t < (int)obs.cells_at_tick.size(); ++t) {
    for (const GridCell& c : obs.cells_at_tick[t]) sat_cells.insert({t, {c.x, c.y}});
  }
  std::set<int> ticks_flagged;
  for (const CollisionViolation& v : report.violations) {
    CHECK(sat_cells.count({v.tick, {v.cell.x, v.cell.y}}));
    ticks_flagged.insert(v.tick);
  }
  // Every tick where the object stays on the grid must be flagged.
  CHECK((int)ticks_flagged.size() >= cfg.horizon_ticks() / 2);
}

TEST_CASE("safe intervals: empty, blocked window, random vs per-tick scan") {
  PlannerConfig cfg = point_cfg();
  OccupancyGrid grid = OccupancyGrid::open_field(6, 6, 1.0);
  const int h = cfg.horizon_ticks();

  const SafeIntervalTable empty = build_safe_intervals(grid, {}, cfg);
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 6; ++x) {
      REQUIRE(empty.intervals[grid.index({x, y})].size() == 1);
      CHECK(empty.intervals[grid.index({x, y})][0] == std::pair<int, int>{0, h});
    }
  }

  // Occupied during [2 s, 3 s]: free [0, 2) and (3, horizon].
  const DynamicObstacle obs = block_cell({2, 2}, 20, 30, h);
  const SafeIntervalTable table = build_safe_intervals(grid, {obs}, cfg);
  const auto& iv = table.intervals[grid.index({2, 2})];
  REQUIRE(iv.size() == 2);
  CHECK(iv[0] == std::pair<int, int>{0, 19});
  CHECK(iv[1] == std::pair<int, int>{31, h});

  // Random obstacles vs a boolean per-tick scan oracle.
  std::mt19937 rng(31);
  std::uniform_int_distribution<int> coord(0, 5), tick(0, h);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<DynamicObstacle> obstacles;
    std::vector<std::vector<char>> occupied(36, std::vector<char>(h + 1, 0));
    for (int k = 0; k < 5; ++k) {
      const GridCell cell{coord(rng), coord(rng)};
      int a = tick(rng), b = tick(rng);
      if (a > b) std::swap(a, b);
      obstacles.push_back(block_cell(cell, a, b, h));
      for (int t = a; t <= b; ++t) occupied[grid.index(cell)][t] = 1;
    }
    const SafeIntervalTable got = build_safe_intervals(grid, obstacles, cfg);
    for (std::size_t cell = 0; cell < 36; ++cell) {
      std::vector<std::pair<int, int>> expected;
      int start = -1;
      for (int t = 0; t <= h; ++t) {
        if (!occupied[cell][t] && start < 0) start = t;
        if (occupied[cell][t] && start >= 0) {
          expected.push_back({start, t - 1});
          start = -1;
        }
      }
      if (start >= 0) expected.push_back({start, h});
      CHECK(got.intervals[cell] == expected);
    }
  }
}

TEST_CASE("sipp crosses an empty grid on the straight line") {
  PlannerConfig cfg = point_cfg();
  OccupancyGrid grid = OccupancyGrid::open_field(10, 10, 1.0);
  PlanRequest req;
  req.vehicle_id = 1;
  req.start = {0, 0};
  req.goal = {0, 9};
  req.nominal_speed = 2.0;  // move duration 5 ticks
  req.box = point_box();
  const SafeIntervalTable table = build_safe_intervals(grid, {}, cfg);
  const auto traj = sipp_plan(req, table, grid, cfg, 0.0);
  REQUIRE(traj.has_value());
  CHECK(arrival_tick(*traj, cfg, 0.0) == 9 * 5);
  CHECK(traj->waypoints.back().cell == req.goal);
  // Times strictly increase and steps are 4-adjacent or waits.
  for (std::size_t i = 1; i < traj->waypoints.size(); ++i) {
    CHECK(traj->waypoints[i].time > traj->waypoints[i - 1].time);
    const GridCell a = traj->waypoints[i - 1].cell;
    const GridCell b = traj->waypoints[i].cell;
    CHECK(std::abs(a.x - b.x) + std::abs(a.y - b.y) <= 1);
  }
}

TEST_CASE("sipp waits out a blocked corridor mouth") {
  PlannerConfig cfg = point_cfg();
  // Corridor along y = 1: walls elsewhere.
  OccupancyGrid grid = OccupancyGrid::open_field(8, 3, 1.0);
  for (int x = 0; x < 8; ++x) {
    for (int y = 0; y < 3; ++y) {
      if (y != 1) grid.drivable[grid.index({x, y})] = 0;
    }
  }
  const int h = cfg.horizon_ticks();
  // The mouth (2,1) is blocked during [0 s, 5 s] -> ticks 0..50.
  const DynamicObstacle obs = block_cell({2, 1}, 0, 50, h);
  PlanRequest req;
  req.vehicle_id = 1;
  req.start = {0, 1};
  req.goal = {7, 1};
  req.nominal_speed = 10.0;  // move duration 1 tick
  req.box = point_box();
  const SafeIntervalTable table = build_safe_intervals(grid, {obs}, cfg);
  const auto traj = sipp_plan(req, table, grid, cfg, 0.0);
  REQUIRE(traj.has_value());

  // Hand check: enter the mouth no earlier than tick 51; the move into it
  // spans [td, td+1] with the mouth free from 51, so arrival there is 52,
  // then 5 more moves. BFS agrees.
  const int got = arrival_tick(*traj, cfg, 0.0);
  CHECK(got == 52 + 5);
  SpaceTimeBfs bfs(grid, {obs}, cfg, req);
  CHECK(got == bfs.earliest_arrival(req));

  // A permanently blocked goal is a no-path.
  const DynamicObstacle wall = block_cell({7, 1}, 0, h, h);
  const SafeIntervalTable blocked = build_safe_intervals(grid, {obs, wall}, cfg);
  CHECK_FALSE(sipp_plan(req, blocked, grid, cfg, 0.0).has_value());
}

TEST_CASE("sipp equals space-time BFS on random grids") {
  std::mt19937 rng(37);
  std::uniform_int_distribution<int> coord(0, 7), tick_d(0, 40), speed_pick(0, 2);
  PlannerConfig cfg = point_cfg();
  cfg.horizon = 8.0;
  const int h = cfg.horizon_ticks();
  const double speeds[3] = {10.0, 5.0, 3.4};

  int paths = 0, no_paths = 0;
  for (int trial = 0; trial < 60; ++trial) {
    OccupancyGrid grid = OccupancyGrid::open_field(8, 8, 1.0);
    // A few static holes.
    for (int k = 0; k < 6; ++k) grid.drivable[grid.index({coord(rng), coord(rng)})] = 0;
    std::vector<DynamicObstacle> obstacles;
    for (int k = 0; k < 2; ++k) {
      DynamicObstacle obs;
      obs.cells_at_tick.resize(h + 1);
      GridCell cell{coord(rng), coord(rng)};
      for (int t = 0; t <= h; ++t) {
        if (t % 7 == 6) {
          // Drift in a random direction, staying on the grid.
          const int dir = std::uniform_int_distribution<int>(0, 3)(rng);
          const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
          GridCell next{cell.x + dx[dir], cell.y + dy[dir]};
          if (grid.in_bounds(next)) cell = next;
        }
        obs.cells_at_tick[t] = {cell, {cell.x + 1, cell.y}};
      }
      obstacles.push_back(std::move(obs));
    }

    PlanRequest req;
    req.vehicle_id = 1;
    req.start = {coord(rng), coord(rng)};
    req.goal = {coord(rng), coord(rng)};
    req.nominal_speed = speeds[speed_pick(rng)];
    req.box = point_box();
    if (!grid.is_drivable(req.start) || !grid.is_drivable(req.goal)) continue;

    const SafeIntervalTable table = build_safe_intervals(grid, obstacles, cfg);
    const auto traj = sipp_plan(req, table, grid, cfg, 0.0);
    SpaceTimeBfs bfs(grid, obstacles, cfg, req);
    const int oracle = bfs.earliest_arrival(req);
    if (traj) {
      ++paths;
      CHECK(arrival_tick(*traj, cfg, 0.0) == oracle);
    } else {
      ++no_paths;
      CHECK(oracle == -1);
    }
  }
  CHECK(paths >= 20);  // the suite exercised real paths
  CHECK(no_paths >= 1);
}

TEST_CASE("plan_all: crossing vehicles are serialized and verified safe") {
  PlannerConfig cfg;
  cfg.horizon = 20.0;
  OccupancyGrid grid = OccupancyGrid::open_field(21, 21, 1.0);

  PlanRequest a;
  a.vehicle_id = 1;
  a.start = {2, 10};
  a.goal = {18, 10};
  a.nominal_speed = 2.0;
  a.box = car_box(grid.cell_center(a.start), 0.0, {1.0, 0.5});
  PlanRequest b;
  b.vehicle_id = 2;
  b.start = {10, 2};
  b.goal = {10, 18};
  b.nominal_speed = 2.0;
  b.box = car_box(grid.cell_center(b.start), M_PI / 2, {1.0, 0.5});

  const auto plans = plan_all({a, b}, grid, {}, cfg, 0.0);
  REQUIRE(plans.size() == 2);
  CHECK(plans[0].status == PlanStatus::kPlanned);
  CHECK(plans[1].status == PlanStatus::kPlanned);

  const CollisionReport report = verify_collision_free(plans, grid, cfg);
  CHECK(report.empty());

  // Sequential-planning structure: vehicle 2 planned against vehicle 1 only;
  // re-verifying vehicle 2 against vehicle 1 alone must also be clean.
  const CollisionReport pair_report =
      verify_collision_free({plans[0], plans[1]}, grid, cfg);
  CHECK(pair_report.empty());

  // Single vehicle equals sipp_plan.
  const SafeIntervalTable table = build_safe_intervals(grid, {}, cfg);
  const auto solo = sipp_plan(a, table, grid, cfg, 0.0);
  const auto plans_solo = plan_all({a}, grid, {}, cfg, 0.0);
  REQUIRE(solo.has_value());
  CHECK(arrival_tick(plans_solo[0].trajectory, cfg, 0.0) == arrival_tick(*solo, cfg, 0.0));
}

TEST_CASE("verifier flags duplicated trajectories everywhere") {
  PlannerConfig cfg;
  OccupancyGrid grid = OccupancyGrid::open_field(12, 12, 1.0);
  PlanRequest a;
  a.vehicle_id = 1;
  a.start = {1, 6};
  a.goal = {10, 6};
  a.nominal_speed = 2.0;
  a.box = car_box(grid.cell_center(a.start), 0.0, {1.0, 0.5});
  const auto plans = plan_all({a}, grid, {}, cfg, 0.0);
  REQUIRE(plans[0].status == PlanStatus::kPlanned);

  std::vector<PlanOutcome> twice = {plans[0], plans[0]};
  twice[1].vehicle_id = 99;
  twice[1].trajectory.vehicle_id = 99;
  const CollisionReport report = verify_collision_free(twice, grid, cfg);
  CHECK(report.violations.size() > (std::size_t)cfg.horizon_ticks());

  const CollisionReport clean = verify_collision_free({plans[0]}, grid, cfg);
  CHECK(clean.empty());
}

TEST_CASE("buffers grow monotonically with speed") {
  PlannerConfig cfg;
  OccupancyGrid grid = OccupancyGrid::open_field(30, 30, 1.0);
  const Vec2 center = grid.cell_center({15, 15});
  std::set<std::pair<int, int>> previous;
  for (double speed : {0.0, 2.0, 5.0, 8.0, 12.0}) {
    MovingBox object;
    object.box = car_box(center, 0.3, {2.0, 1.0});
    object.position = center;
    object.velocity = speed * Vec2(std::cos(0.3), std::sin(0.3));
    const DynamicObstacle obs = rasterize_extrapolation(object, grid, cfg, 0.0);
    std::set<std::pair<int, int>> cells;
    for (const GridCell& c : obs.cells_at_tick[0]) cells.insert({c.x, c.y});
    for (const auto& cell : previous) CHECK(cells.count(cell));
    previous = cells;
  }
}

TEST_CASE("controller brakes by the formula and stops with margin") {
  // v = 10, a_max = 5, wait point 10 m ahead: braking distance 10 >= 10.
  SpaceTimeTrajectory traj;
  traj.vehicle_id = 1;
  traj.horizon = 20.0;
  traj.waypoints = {
      {0.0, {0, 0}, {0.0, 0.0}},
      {2.0, {10, 0}, {10.0, 0.0}},
      {8.0, {10, 0}, {10.0, 0.0}},  // wait cycle at x = 10
      {10.0, {12, 0}, {12.0, 0.0}},
  };
  const ControlAction brake = controller_step(traj, {0.0, 0.0}, 10.0, 0.0, 5.0);
  CHECK(brake.type == ControlAction::Type::kBrake);

  // Far away at modest speed: proceed toward the wait point.
  const ControlAction go = controller_step(traj, {0.0, 0.0}, 2.0, 0.0, 5.0);
  CHECK(go.type == ControlAction::Type::kProceed);
  CHECK(go.target.x() == doctest::Approx(10.0));

  // No wait cycle: proceed toward the next waypoint.
  SpaceTimeTrajectory cruise = traj;
  cruise.waypoints = {{0.0, {0, 0}, {0.0, 0.0}}, {2.0, {10, 0}, {10.0, 0.0}}};
  const ControlAction next = controller_step(cruise, {0.0, 0.0}, 2.0, 0.5, 5.0);
  CHECK(next.type == ControlAction::Type::kProceed);

  // Expired trajectory: emergency brake.
  const ControlAction expired = controller_step(traj, {0.0, 0.0}, 2.0, 25.0, 5.0);
  CHECK(expired.type == ControlAction::Type::kEmergencyBrake);
}

TEST_CASE("kinematic braking halts at or before the wait point at any speed") {
  const double a_max = 5.0, dt = 0.01;
  for (double v0 = 1.0; v0 <= 15.0; v0 += 1.0) {
    SpaceTimeTrajectory traj;
    traj.vehicle_id = 1;
    traj.horizon = 60.0;
    traj.waypoints = {
        {0.0, {0, 0}, {0.0, 0.0}},
        {40.0 / v0, {40, 0}, {40.0, 0.0}},
        {55.0, {40, 0}, {40.0, 0.0}},  // wait at x = 40
    };
    double x = 0.0, v = v0;
    for (double t = 0.0; t < 50.0; t += dt) {
      const ControlAction action = controller_step(traj, {x, 0.0}, v, t, a_max, dt);
      if (action.type == ControlAction::Type::kProceed) {
        const double target = std::min(v0, std::max(action.commanded_speed, 0.0));
        v = v < target ? std::min(target, v + a_max * dt) : std::max(target, v - a_max * dt);
      } else {
        v = std::max(0.0, v - a_max * dt);
      }
      x += v * dt;
      if (v == 0.0 && t > 1.0) break;
    }
    CHECK(v == 0.0);
    // Millimetres of integrator overshoot past the wait point are fine; the
    // vehicle must stay inside the held cell (margin >= 0 to its far edge).
    CHECK(x <= 40.0 + 0.25);
    CHECK(40.0 + 0.5 - x >= 0.0);
    CHECK(x > 40.0 - 12.0);  // and it did not stop absurdly early
  }
}
