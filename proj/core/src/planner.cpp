#include "crossview/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <unordered_map>

namespace crossview {

OccupancyGrid OccupancyGrid::open_field(int width, int height, double cell_size) {
  OccupancyGrid g;
  g.width = width;
  g.height = height;
  g.cell_size = cell_size;
  g.drivable.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 1);
  return g;
}

Vec2 SpaceTimeTrajectory::position_at(double t) const {
  if (waypoints.empty()) return Vec2::Zero();
  if (t <= waypoints.front().time) return waypoints.front().position;
  if (t >= waypoints.back().time) return waypoints.back().position;
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    if (t <= waypoints[i].time) {
      const auto& a = waypoints[i - 1];
      const auto& b = waypoints[i];
      if (b.time <= a.time) return b.position;
      const double s = (t - a.time) / (b.time - a.time);
      return a.position * (1.0 - s) + b.position * s;
    }
  }
  return waypoints.back().position;
}

double SpaceTimeTrajectory::speed_at(double t) const {
  if (waypoints.size() < 2 || t < waypoints.front().time || t >= waypoints.back().time) {
    return 0.0;
  }
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    if (t < waypoints[i].time) {
      const auto& a = waypoints[i - 1];
      const auto& b = waypoints[i];
      const double dt = b.time - a.time;
      if (dt <= 0.0) return 0.0;
      return (b.position - a.position).norm() / dt;
    }
  }
  return 0.0;
}

namespace {

/// Motion direction at time t: the direction of the segment containing t,
/// falling back to the most recent moving segment, then to +x.
Vec2 direction_at(const SpaceTimeTrajectory& traj, double t) {
  Vec2 dir = Vec2::UnitX();
  if (traj.waypoints.size() < 2) return dir;
  std::size_t seg = traj.waypoints.size() - 1;
  for (std::size_t i = 1; i < traj.waypoints.size(); ++i) {
    if (t < traj.waypoints[i].time) {
      seg = i;
      break;
    }
  }
  for (std::size_t i = seg; i >= 1; --i) {
    const Vec2 d = traj.waypoints[i].position - traj.waypoints[i - 1].position;
    if (d.norm() > 1e-9) return d.normalized();
  }
  return dir;
}

/// Cells whose open interior intersects the oriented rectangle
/// (separating-axis test over the two cell axes and two rectangle axes).
std::vector<GridCell> rect_cells_sat(const Vec2& center, const Vec2& major_dir, double half_major,
                                     double half_lateral, const OccupancyGrid& grid) {
  std::vector<GridCell> out;
  const Vec2 u = major_dir.normalized();
  const Vec2 v(-u.y(), u.x());
  const double reach = std::hypot(half_major, half_lateral);
  const GridCell lo = grid.cell_at(center - Vec2(reach, reach));
  const GridCell hi = grid.cell_at(center + Vec2(reach, reach));
  const double h = 0.5 * grid.cell_size;
  const Vec2 axes[4] = {Vec2(1.0, 0.0), Vec2(0.0, 1.0), u, v};
  constexpr double kEps = 1e-9;

  for (int y = lo.y; y <= hi.y; ++y) {
    for (int x = lo.x; x <= hi.x; ++x) {
      const GridCell c{x, y};
      if (!grid.in_bounds(c)) continue;
      const Vec2 d = grid.cell_center(c) - center;
      bool overlap = true;
      for (const Vec2& n : axes) {
        const double rect_ext = half_major * std::abs(u.dot(n)) + half_lateral * std::abs(v.dot(n));
        const double cell_ext = h * (std::abs(n.x()) + std::abs(n.y()));
        if (std::abs(d.dot(n)) >= rect_ext + cell_ext - kEps) {
          overlap = false;
          break;
        }
      }
      if (overlap) out.push_back(c);
    }
  }
  return out;
}

}  // namespace

DynamicObstacle rasterize_extrapolation(const MovingBox& object, const OccupancyGrid& grid,
                                        const PlannerConfig& cfg, double epoch_start) {
  (void)epoch_start;
  DynamicObstacle obs;
  const int h_ticks = cfg.horizon_ticks();
  obs.cells_at_tick.resize(static_cast<std::size_t>(h_ticks) + 1);

  const double speed = object.velocity.norm();
  const Vec2 dir = speed > 1e-6 ? Vec2(object.velocity.normalized())
                                : Vec2(object.box.axes[1].head<2>()).normalized();
  const double buffer = cfg.buffer(speed);
  const double half_major = object.box.extents[1] + buffer;
  const double half_lateral = object.box.extents[2] + buffer;

  for (int k = 0; k <= h_ticks; ++k) {
    const Vec2 center = object.position + object.velocity * (k * cfg.tick);
    obs.cells_at_tick[static_cast<std::size_t>(k)] =
        rect_cells_sat(center, dir, half_major, half_lateral, grid);
  }
  return obs;
}

DynamicObstacle rasterize_trajectory(const SpaceTimeTrajectory& traj,
                                     const OrientedBoundingBox& box, const OccupancyGrid& grid,
                                     const PlannerConfig& cfg, double epoch_start) {
  DynamicObstacle obs;
  const int h_ticks = cfg.horizon_ticks();
  obs.cells_at_tick.resize(static_cast<std::size_t>(h_ticks) + 1);

  for (int k = 0; k <= h_ticks; ++k) {
    const double t = epoch_start + k * cfg.tick;
    const Vec2 center = traj.position_at(t);
    const double speed = traj.speed_at(t);
    const Vec2 dir = direction_at(traj, t);
    const double buffer = cfg.buffer(speed);
    obs.cells_at_tick[static_cast<std::size_t>(k)] = rect_cells_sat(
        center, dir, box.extents[1] + buffer, box.extents[2] + buffer, grid);
  }
  return obs;
}

namespace {

using TickMask = std::vector<std::uint64_t>;  // bit per tick, 1 = occupied

std::size_t mask_words(int horizon_ticks) {
  return static_cast<std::size_t>(horizon_ticks) / 64 + 1;
}

void set_tick(TickMask& m, int t) {
  m[static_cast<std::size_t>(t) / 64] |= (1ULL << (static_cast<std::size_t>(t) % 64));
}

bool get_tick(const TickMask& m, int t) {
  return (m[static_cast<std::size_t>(t) / 64] >> (static_cast<std::size_t>(t) % 64)) & 1ULL;
}

/// Dense per-cell occupancy over ticks from a list of obstacles; cells not
/// drivable are marked permanently occupied.
std::vector<TickMask> dense_occupancy(const OccupancyGrid& grid,
                                      const std::vector<DynamicObstacle>& obstacles,
                                      int horizon_ticks) {
  const std::size_t words = mask_words(horizon_ticks);
  std::vector<TickMask> occ(grid.drivable.size(), TickMask(words, 0));
  for (std::size_t i = 0; i < grid.drivable.size(); ++i) {
    if (!grid.drivable[i]) {
      occ[i].assign(words, ~0ULL);
    }
  }
  for (const DynamicObstacle& obs : obstacles) {
    const int ticks = std::min<int>(horizon_ticks, static_cast<int>(obs.cells_at_tick.size()) - 1);
    for (int t = 0; t <= ticks; ++t) {
      for (const GridCell& c : obs.cells_at_tick[static_cast<std::size_t>(t)]) {
        if (grid.in_bounds(c)) set_tick(occ[grid.index(c)], t);
      }
    }
  }
  return occ;
}

std::vector<std::pair<int, int>> free_runs(const TickMask& m, int horizon_ticks) {
  std::vector<std::pair<int, int>> runs;
  int start = -1;
  for (int t = 0; t <= horizon_ticks; ++t) {
    if (!get_tick(m, t)) {
      if (start < 0) start = t;
    } else if (start >= 0) {
      runs.push_back({start, t - 1});
      start = -1;
    }
  }
  if (start >= 0) runs.push_back({start, horizon_ticks});
  return runs;
}

}  // namespace

SafeIntervalTable build_safe_intervals(const OccupancyGrid& grid,
                                       const std::vector<DynamicObstacle>& obstacles,
                                       const PlannerConfig& cfg) {
  SafeIntervalTable table;
  table.horizon_ticks = cfg.horizon_ticks();
  const auto occ = dense_occupancy(grid, obstacles, table.horizon_ticks);
  table.intervals.resize(occ.size());
  for (std::size_t i = 0; i < occ.size(); ++i) {
    table.intervals[i] = free_runs(occ[i], table.horizon_ticks);
  }
  return table;
}

namespace {

/// Relative cell offsets covered by a disc of radius r around the center of
/// cell (0,0): every cell whose square comes strictly closer than r.
std::vector<GridCell> disc_offsets(double radius, double cell_size) {
  std::vector<GridCell> offsets;
  const int reach = static_cast<int>(std::ceil(radius / cell_size)) + 1;
  for (int dy = -reach; dy <= reach; ++dy) {
    for (int dx = -reach; dx <= reach; ++dx) {
      const double nx = std::max(std::abs(dx * cell_size) - 0.5 * cell_size, 0.0);
      const double ny = std::max(std::abs(dy * cell_size) - 0.5 * cell_size, 0.0);
      if (std::hypot(nx, ny) < radius) offsets.push_back({dx, dy});
    }
  }
  return offsets;
}

struct SippState {
  int cell = 0;
  int interval = 0;
};

}  // namespace

std::optional<SpaceTimeTrajectory> sipp_plan(const PlanRequest& req,
                                             const SafeIntervalTable& intervals,
                                             const OccupancyGrid& grid, const PlannerConfig& cfg,
                                             double epoch_start) {
  const int h_ticks = intervals.horizon_ticks;
  const std::size_t words = mask_words(h_ticks);
  if (!grid.is_drivable(req.start) || !grid.is_drivable(req.goal)) return std::nullopt;

  // Rebuild dense occupancy from the table, then compose the planned
  // footprint: a center cell is blocked while any covered cell is occupied.
  std::vector<TickMask> occ(grid.drivable.size(), TickMask(words, 0));
  for (std::size_t i = 0; i < occ.size(); ++i) {
    TickMask m(words, ~0ULL);
    for (const auto& [s, e] : intervals.intervals[i]) {
      for (int t = s; t <= e; ++t) {
        m[static_cast<std::size_t>(t) / 64] &= ~(1ULL << (static_cast<std::size_t>(t) % 64));
      }
    }
    occ[i] = std::move(m);
  }

  const double nominal =
      std::clamp(req.nominal_speed, cfg.min_nominal_speed, cfg.speed_limit);
  const double footprint_radius = std::hypot(req.box.extents[1], req.box.extents[2]) +
                                  cfg.buffer(nominal) + 0.5 * grid.cell_size;
  const std::vector<GridCell> offsets = disc_offsets(footprint_radius, grid.cell_size);

  std::vector<TickMask> fp_occ(grid.drivable.size(), TickMask(words, 0));
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      const GridCell c{x, y};
      if (!grid.is_drivable(c)) continue;
      TickMask& m = fp_occ[grid.index(c)];
      for (const GridCell& o : offsets) {
        const GridCell n{x + o.x, y + o.y};
        if (!grid.in_bounds(n)) continue;  // outside the planned region is unconstrained
        const TickMask& src = occ[grid.index(n)];
        for (std::size_t w = 0; w < words; ++w) m[w] |= src[w];
      }
    }
  }

  std::vector<std::vector<std::pair<int, int>>> fp_intervals(grid.drivable.size());
  for (std::size_t i = 0; i < fp_occ.size(); ++i) {
    if (grid.drivable[i]) fp_intervals[i] = free_runs(fp_occ[i], h_ticks);
  }

  const int move_ticks =
      std::max(1, static_cast<int>(std::ceil(grid.cell_size / (nominal * cfg.tick))));

  const int start_idx = static_cast<int>(grid.index(req.start));
  const int goal_idx = static_cast<int>(grid.index(req.goal));

  // Locate the start interval containing tick 0.
  int start_interval = -1;
  for (std::size_t k = 0; k < fp_intervals[static_cast<std::size_t>(start_idx)].size(); ++k) {
    const auto& [s, e] = fp_intervals[static_cast<std::size_t>(start_idx)][k];
    if (s <= 0 && 0 <= e) {
      start_interval = static_cast<int>(k);
      break;
    }
  }
  if (start_interval < 0) return std::nullopt;

  struct NodeKey {
    int cell;
    int interval;
    bool operator==(const NodeKey& o) const { return cell == o.cell && interval == o.interval; }
  };
  struct NodeKeyHash {
    std::size_t operator()(const NodeKey& k) const {
      return std::hash<long long>()((static_cast<long long>(k.cell) << 20) ^ k.interval);
    }
  };
  struct Record {
    int arrival = 0;
    NodeKey parent{-1, -1};
    int departure_from_parent = 0;
  };
  std::unordered_map<NodeKey, Record, NodeKeyHash> records;

  auto heuristic = [&](int cell_idx) {
    const int cx = cell_idx % grid.width, cy = cell_idx / grid.width;
    return (std::abs(cx - req.goal.x) + std::abs(cy - req.goal.y)) * move_ticks;
  };

  using QueueItem = std::tuple<int, int, NodeKey>;  // f, g, key
  auto cmp = [](const QueueItem& a, const QueueItem& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    return std::get<1>(a) > std::get<1>(b);
  };
  std::priority_queue<QueueItem, std::vector<QueueItem>, decltype(cmp)> open(cmp);

  const NodeKey start_key{start_idx, start_interval};
  records[start_key] = {0, {-1, -1}, 0};
  open.push({heuristic(start_idx), 0, start_key});

  const int dx4[4] = {1, -1, 0, 0};
  const int dy4[4] = {0, 0, 1, -1};

  NodeKey goal_key{-1, -1};
  while (!open.empty()) {
    const auto [f, g, key] = open.top();
    open.pop();
    auto rec_it = records.find(key);
    if (rec_it == records.end() || rec_it->second.arrival != g) continue;  // stale entry

    const auto& cell_intervals = fp_intervals[static_cast<std::size_t>(key.cell)];
    const auto& [is, ie] = cell_intervals[static_cast<std::size_t>(key.interval)];
    (void)is;

    if (key.cell == goal_idx && ie == h_ticks) {
      goal_key = key;
      break;
    }

    const int cx = key.cell % grid.width, cy = key.cell / grid.width;
    for (int dir = 0; dir < 4; ++dir) {
      const GridCell n{cx + dx4[dir], cy + dy4[dir]};
      if (!grid.is_drivable(n)) continue;
      const int n_idx = static_cast<int>(grid.index(n));
      const auto& n_intervals = fp_intervals[static_cast<std::size_t>(n_idx)];
      for (std::size_t j = 0; j < n_intervals.size(); ++j) {
        const auto& [js, je] = n_intervals[j];
        // Depart at td >= g; the move spans [td, td + m] and holds both
        // cells, so td + m must stay inside both intervals.
        const int td = std::max(g, js);
        if (td + move_ticks > std::min(ie, je)) continue;
        if (je < g) continue;
        const int arrival = td + move_ticks;
        const NodeKey nk{n_idx, static_cast<int>(j)};
        auto it = records.find(nk);
        if (it == records.end() || arrival < it->second.arrival) {
          records[nk] = {arrival, key, td};
          open.push({arrival + heuristic(n_idx), arrival, nk});
        }
      }
    }
  }

  if (goal_key.cell < 0) return std::nullopt;

  // Walk parents back to the start, collecting (cell, arrival, departure).
  struct Step {
    int cell;
    int arrival;
    int departure;  // tick the vehicle leaves this cell (arrival of next - m)
  };
  std::vector<Step> steps;
  NodeKey cur = goal_key;
  int child_departure = -1;
  while (cur.cell >= 0) {
    const Record& rec = records[cur];
    steps.push_back({cur.cell, rec.arrival, child_departure});
    child_departure = rec.departure_from_parent;
    cur = rec.parent;
  }
  std::reverse(steps.begin(), steps.end());
  // steps[i].departure currently holds the departure tick toward the *next*
  // step (or -1 for the goal); normalize so waits are explicit.

  SpaceTimeTrajectory traj;
  traj.vehicle_id = req.vehicle_id;
  traj.horizon = epoch_start + cfg.horizon;
  auto emit = [&](int tick, int cell_idx) {
    const GridCell c{cell_idx % grid.width, cell_idx / grid.width};
    traj.waypoints.push_back({epoch_start + tick * cfg.tick, c, grid.cell_center(c)});
  };
  for (std::size_t i = 0; i < steps.size(); ++i) {
    emit(steps[i].arrival, steps[i].cell);
    if (i + 1 < steps.size()) {
      const int departure = steps[i].departure;
      if (departure > steps[i].arrival) emit(departure, steps[i].cell);
    }
  }
  return traj;
}

std::vector<PlanOutcome> plan_all(const std::vector<PlanRequest>& ordered_requests,
                                  const OccupancyGrid& grid,
                                  const std::vector<DynamicObstacle>& oblivious,
                                  const PlannerConfig& cfg, double epoch_start) {
  std::vector<DynamicObstacle> obstacles = oblivious;
  std::vector<PlanOutcome> outcomes;
  outcomes.reserve(ordered_requests.size());

  for (const PlanRequest& req : ordered_requests) {
    const SafeIntervalTable table = build_safe_intervals(grid, obstacles, cfg);
    auto traj = sipp_plan(req, table, grid, cfg, epoch_start);

    PlanOutcome outcome;
    outcome.vehicle_id = req.vehicle_id;
    outcome.box = req.box;
    if (traj) {
      outcome.status = PlanStatus::kPlanned;
      outcome.trajectory = std::move(*traj);
    } else {
      outcome.status = PlanStatus::kHeld;
      outcome.trajectory.vehicle_id = req.vehicle_id;
      outcome.trajectory.horizon = epoch_start + cfg.horizon;
      const Vec2 pos = grid.cell_center(req.start);
      outcome.trajectory.waypoints = {{epoch_start, req.start, pos},
                                      {epoch_start + cfg.horizon, req.start, pos}};
    }
    obstacles.push_back(
        rasterize_trajectory(outcome.trajectory, req.box, grid, cfg, epoch_start));
    outcomes.push_back(std::move(outcome));
  }
  return outcomes;
}

namespace {

/// Area of the oriented rectangle clipped to a cell square
/// (Sutherland-Hodgman). Independent of the SAT rasterizer on purpose.
double rect_cell_overlap_area(const Vec2& center, const Vec2& u, double half_major,
                              double half_lateral, const Vec2& cell_lo, double cell_size) {
  const Vec2 v(-u.y(), u.x());
  std::vector<Vec2> poly = {
      center + u * half_major + v * half_lateral, center - u * half_major + v * half_lateral,
      center - u * half_major - v * half_lateral, center + u * half_major - v * half_lateral};

  // Clip against the four half-planes of the cell square.
  const double x0 = cell_lo.x(), x1 = cell_lo.x() + cell_size;
  const double y0 = cell_lo.y(), y1 = cell_lo.y() + cell_size;
  struct HalfPlane {
    double a, b, c;  // keep points with a*x + b*y <= c
  };
  const HalfPlane planes[4] = {{1, 0, x1}, {-1, 0, -x0}, {0, 1, y1}, {0, -1, -y0}};

  for (const HalfPlane& hp : planes) {
    std::vector<Vec2> next;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n && n >= 2; ++i) {
      const Vec2& a = poly[i];
      const Vec2& b = poly[(i + 1) % n];
      const double da = hp.a * a.x() + hp.b * a.y() - hp.c;
      const double db = hp.a * b.x() + hp.b * b.y() - hp.c;
      if (da <= 0.0) next.push_back(a);
      if ((da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0)) {
        const double s = da / (da - db);
        next.push_back(a + (b - a) * s);
      }
    }
    poly = std::move(next);
    if (poly.size() < 3) return 0.0;
  }

  double area = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % poly.size()];
    area += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * std::abs(area);
}

}  // namespace

CollisionReport verify_collision_free(const std::vector<PlanOutcome>& plans,
                                      const OccupancyGrid& grid, const PlannerConfig& cfg) {
  CollisionReport report;
  if (plans.empty()) return report;

  double t0 = std::numeric_limits<double>::infinity();
  double t1 = -std::numeric_limits<double>::infinity();
  for (const PlanOutcome& p : plans) {
    if (p.trajectory.waypoints.empty()) continue;
    t0 = std::min(t0, p.trajectory.start_time());
    t1 = std::max(t1, p.trajectory.horizon);
  }
  if (!std::isfinite(t0)) return report;

  const int ticks = static_cast<int>(std::lround((t1 - t0) / cfg.tick));
  std::vector<int> stamp(grid.drivable.size(), -1);
  std::vector<int> owner(grid.drivable.size(), -1);

  for (int k = 0; k <= ticks; ++k) {
    const double t = t0 + k * cfg.tick;
    for (const PlanOutcome& p : plans) {
      if (p.trajectory.waypoints.empty()) continue;
      const Vec2 center = p.trajectory.position_at(t);
      const double speed = p.trajectory.speed_at(t);
      const Vec2 dir = direction_at(p.trajectory, t);
      const double buffer = cfg.buffer(speed);
      const double hm = p.box.extents[1] + buffer;
      const double hl = p.box.extents[2] + buffer;

      const double reach = std::hypot(hm, hl);
      const GridCell lo = grid.cell_at(center - Vec2(reach, reach));
      const GridCell hi = grid.cell_at(center + Vec2(reach, reach));
      for (int y = lo.y; y <= hi.y; ++y) {
        for (int x = lo.x; x <= hi.x; ++x) {
          const GridCell c{x, y};
          if (!grid.in_bounds(c)) continue;
          const Vec2 cell_lo = grid.origin + Vec2(x * grid.cell_size, y * grid.cell_size);
          if (rect_cell_overlap_area(center, dir, hm, hl, cell_lo, grid.cell_size) <= 1e-9) {
            continue;
          }
          const std::size_t idx = grid.index(c);
          if (stamp[idx] == k && owner[idx] != p.vehicle_id) {
            report.violations.push_back({k, c, owner[idx], p.vehicle_id});
          } else {
            stamp[idx] = k;
            owner[idx] = p.vehicle_id;
          }
        }
      }
    }
  }
  return report;
}

ControlAction controller_step(const SpaceTimeTrajectory& traj, const Vec2& position, double speed,
                              double now, double a_max, double control_dt) {
  ControlAction action;
  if (traj.waypoints.empty() || now > traj.horizon) {
    action.type = ControlAction::Type::kEmergencyBrake;
    return action;
  }

  // Next wait point: the first upcoming waypoint pair holding one cell.
  std::optional<Vec2> wait_position;
  for (std::size_t i = 0; i + 1 < traj.waypoints.size(); ++i) {
    const auto& a = traj.waypoints[i];
    const auto& b = traj.waypoints[i + 1];
    if (b.time <= now) continue;
    if (a.cell == b.cell) {
      wait_position = a.position;
      break;
    }
  }

  if (wait_position) {
    const double distance_to_wait = (*wait_position - position).norm();
    const double braking_distance = speed * speed / (2.0 * a_max);
    // Hold while the wait point is at or behind the vehicle: the wait is
    // still active (pairs in the past are skipped above), so the vehicle
    // stays put in the held cell instead of steering back through it.
    const Vec2 travel = direction_at(traj, now);
    if (travel.dot(*wait_position - position) <= 1e-9) {
      action.type = ControlAction::Type::kBrake;
      return action;
    }
    // One-cycle lookahead: brake while stopping short is still possible.
    if (braking_distance >= distance_to_wait - speed * control_dt) {
      action.type = ControlAction::Type::kBrake;
      return action;
    }
    action.type = ControlAction::Type::kProceed;
    action.target = *wait_position;
    action.commanded_speed = traj.speed_at(now);
    if (action.commanded_speed <= 0.0) {
      // Heading toward a wait point inside a stale plan: keep segment pace.
      for (std::size_t i = 1; i < traj.waypoints.size(); ++i) {
        const double s = (traj.waypoints[i].position - traj.waypoints[i - 1].position).norm();
        const double dt = traj.waypoints[i].time - traj.waypoints[i - 1].time;
        if (s > 1e-9 && dt > 0.0) {
          action.commanded_speed = s / dt;
          break;
        }
      }
    }
    return action;
  }

  // No wait cycle: steer toward the next upcoming waypoint (or the last one).
  const SpaceTimeTrajectory::Waypoint* target = &traj.waypoints.back();
  for (const auto& wp : traj.waypoints) {
    if (wp.time > now) {
      target = &wp;
      break;
    }
  }
  action.type = ControlAction::Type::kProceed;
  action.target = target->position;
  action.commanded_speed = traj.speed_at(now);
  if (action.commanded_speed <= 0.0) {
    for (std::size_t i = 1; i < traj.waypoints.size(); ++i) {
      const double s = (traj.waypoints[i].position - traj.waypoints[i - 1].position).norm();
      const double dt = traj.waypoints[i].time - traj.waypoints[i - 1].time;
      if (s > 1e-9 && dt > 0.0) {
        action.commanded_speed = s / dt;
        break;
      }
    }
  }
  return action;
}

}  // namespace crossview
