#pragma once

#include "crossview/extraction.hpp"
#include "crossview/geometry.hpp"

#include <optional>
#include <vector>

namespace crossview {

struct PlannerError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GridCell {
  int x = 0;
  int y = 0;
  bool operator==(const GridCell& o) const { return x == o.x && y == o.y; }
};

/// Static planning grid: drivable mask over square cells.
struct OccupancyGrid {
  Vec2 origin = Vec2::Zero();  // world position of cell (0,0)'s lower-left corner
  double cell_size = 1.0;
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> drivable;  // row-major, width * height

  bool in_bounds(const GridCell& c) const {
    return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height;
  }
  bool is_drivable(const GridCell& c) const {
    return in_bounds(c) && drivable[index(c)] != 0;
  }
  std::size_t index(const GridCell& c) const {
    return static_cast<std::size_t>(c.y) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(c.x);
  }
  Vec2 cell_center(const GridCell& c) const {
    return origin + Vec2((c.x + 0.5) * cell_size, (c.y + 0.5) * cell_size);
  }
  GridCell cell_at(const Vec2& p) const {
    return {static_cast<int>(std::floor((p.x() - origin.x()) / cell_size)),
            static_cast<int>(std::floor((p.y() - origin.y()) / cell_size))};
  }

  static OccupancyGrid open_field(int width, int height, double cell_size = 1.0);
};

struct PlannerConfig {
  double tick = 0.1;               // seconds, occupancy and plan resolution
  double horizon = 10.0;           // seconds
  double base_margin = 0.5;        // meters, buffer at rest
  double k_time = 0.5;             // seconds, buffer grows by k_time * speed
  double speed_limit = 10.0;       // m/s cap on nominal planning speed
  double min_nominal_speed = 1.0;  // m/s floor so stationary vehicles can plan

  int horizon_ticks() const { return static_cast<int>(std::lround(horizon / tick)); }
  double buffer(double speed) const { return base_margin + k_time * speed; }
};

/// Occupied cells per tick (tick 0 = epoch start). Ticks cover the full
/// horizon; an empty cell list means the obstacle occupies nothing then.
struct DynamicObstacle {
  std::vector<std::vector<GridCell>> cells_at_tick;
};

/// Per-cell sorted disjoint free intervals [start_tick, end_tick], inclusive,
/// within [0, horizon_ticks]. Cells under static obstacles have none.
struct SafeIntervalTable {
  int horizon_ticks = 0;
  std::vector<std::vector<std::pair<int, int>>> intervals;  // indexed like the grid
};

/// Timed waypoints; consecutive waypoints are 4-adjacent cells or the same
/// cell (a wait). After the last waypoint the vehicle holds its final cell
/// for the rest of the horizon.
struct SpaceTimeTrajectory {
  int vehicle_id = 0;
  double horizon = 0.0;  // absolute end time of validity
  struct Waypoint {
    double time = 0.0;
    GridCell cell;
    Vec2 position = Vec2::Zero();
  };
  std::vector<Waypoint> waypoints;

  double start_time() const { return waypoints.empty() ? 0.0 : waypoints.front().time; }
  /// Linear interpolation between waypoints; clamps to the endpoints.
  Vec2 position_at(double t) const;
  /// Segment speed at time t (0 while waiting or outside the waypoint span).
  double speed_at(double t) const;
};

/// Describes a vehicle in motion for rasterization: oriented box footprint
/// swept along either a planned trajectory or a constant-velocity
/// extrapolation of a tracked object.
struct MovingBox {
  OrientedBoundingBox box;
  Vec2 position = Vec2::Zero();   // used by extrapolation
  Vec2 velocity = Vec2::Zero();   // used by extrapolation
};

/// Rasterizes a constant-velocity extrapolation of a box over the horizon.
/// Cells intersecting the box inflated by the motion-adaptive buffer
/// (base_margin + k_time * speed) are occupied at every tick.
DynamicObstacle rasterize_extrapolation(const MovingBox& object, const OccupancyGrid& grid,
                                        const PlannerConfig& cfg, double epoch_start);

/// Rasterizes a planned trajectory: the box travels along the waypoints,
/// oriented along the instantaneous motion direction, inflated by the buffer
/// for the instantaneous speed (waits shrink to the base margin). After the
/// final waypoint the box parks at the final cell through the horizon.
DynamicObstacle rasterize_trajectory(const SpaceTimeTrajectory& traj,
                                     const OrientedBoundingBox& box, const OccupancyGrid& grid,
                                     const PlannerConfig& cfg, double epoch_start);

/// Complement of the obstacles' occupancy per cell, coalesced to maximal
/// runs of free ticks.
SafeIntervalTable build_safe_intervals(const OccupancyGrid& grid,
                                       const std::vector<DynamicObstacle>& obstacles,
                                       const PlannerConfig& cfg);

struct PlanRequest {
  int vehicle_id = 0;
  GridCell start;
  GridCell goal;
  double current_speed = 0.0;
  double nominal_speed = 5.0;  // cruise speed used for move durations
  OrientedBoundingBox box;     // spatial footprint source
};

/// SIPP: A* over (cell, safe interval) states with earliest-arrival costs.
/// Moves are 4-adjacent with duration ceil(cell / (nominal_speed * tick))
/// ticks plus in-interval waits; a move holds both cells for its whole
/// span. The planned footprint is a disc covering the buffered box plus
/// half a cell of sweep slack, so the rasterized trajectory stays inside
/// what was reserved. The goal must be holdable through the horizon.
/// Returns nullopt when no such path exists within the horizon.
std::optional<SpaceTimeTrajectory> sipp_plan(const PlanRequest& req,
                                             const SafeIntervalTable& intervals,
                                             const OccupancyGrid& grid, const PlannerConfig& cfg,
                                             double epoch_start);

enum class PlanStatus { kPlanned, kHeld };

struct PlanOutcome {
  int vehicle_id = 0;
  PlanStatus status = PlanStatus::kHeld;
  SpaceTimeTrajectory trajectory;  // hold-in-place when status == kHeld
  OrientedBoundingBox box;
};

/// Sequential planning: vehicles are planned in the given order, each seeing
/// the oblivious obstacles plus every earlier vehicle's rasterized
/// trajectory. No-path vehicles hold in place and are rasterized as
/// stationary obstacles for their successors.
std::vector<PlanOutcome> plan_all(const std::vector<PlanRequest>& ordered_requests,
                                  const OccupancyGrid& grid,
                                  const std::vector<DynamicObstacle>& oblivious,
                                  const PlannerConfig& cfg, double epoch_start);

struct CollisionViolation {
  int tick = 0;
  GridCell cell;
  int vehicle_a = 0;
  int vehicle_b = 0;
};

struct CollisionReport {
  std::vector<CollisionViolation> violations;
  bool empty() const { return violations.empty(); }
};

/// Exhaustive per-tick check that no two buffered footprints share a cell.
/// Deliberately a separate code path from the rasterizer: footprint cells
/// come from polygon clipping rather than separating-axis tests.
CollisionReport verify_collision_free(const std::vector<PlanOutcome>& plans,
                                      const OccupancyGrid& grid, const PlannerConfig& cfg);

/// Vehicle-side controller decision for one control cycle.
struct ControlAction {
  enum class Type { kProceed, kBrake, kEmergencyBrake } type = Type::kProceed;
  Vec2 target = Vec2::Zero();      // waypoint to steer toward when proceeding
  double commanded_speed = 0.0;    // segment speed when proceeding
};

/// Follows a (possibly stale) trajectory. Finds the next wait point; with
/// braking distance v^2 / (2 a_max), brakes as soon as the *next* control
/// cycle could no longer stop short of it (one-cycle lookahead of the
/// braking-distance >= distance-to-wait-point rule). An expired trajectory
/// (now past its horizon) triggers an emergency brake.
ControlAction controller_step(const SpaceTimeTrajectory& traj, const Vec2& position,
                              double speed, double now, double a_max,
                              double control_dt = 0.01);

}  // namespace crossview
