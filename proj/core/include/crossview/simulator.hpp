#pragma once

#include "crossview/extraction.hpp"
#include "crossview/geometry.hpp"
#include "crossview/planner.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace crossview {

struct SimulatorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Virtual range sensor. Beams span the vertical field of view symmetrically
/// about the sensor's x-y plane; azimuths sweep the full circle. Mount
/// orientation (roll/pitch/yaw) lives in the pose.
struct SensorModel {
  RigidTransform pose;  // sensor frame -> world, ground truth
  double fov_deg = 30.0;
  int beams = 32;
  double azimuth_step_deg = 1.0;
  double max_range = 120.0;
  double noise_sigma = 0.0;

  int azimuth_count() const { return static_cast<int>(std::lround(360.0 / azimuth_step_deg)); }
};

/// Upright cuboid: static prop or vehicle body.
struct BoxShape {
  Vec2 center = Vec2::Zero();  // ground-plane center
  double yaw = 0.0;
  Vec2 half_extents = Vec2(2.0, 1.0);  // (major, lateral)
  double height = 1.5;                 // base sits on the ground
};

/// Scripted path: polyline and/or circular arcs traversed at constant speed
/// per segment.
struct PathSegment {
  enum class Kind { kLine, kArc } kind = Kind::kLine;
  Vec2 to = Vec2::Zero();        // line endpoint
  Vec2 arc_center = Vec2::Zero();
  double arc_radius = 0.0;
  double arc_begin = 0.0;  // radians
  double arc_end = 0.0;    // radians, sweep = end - begin (signed)
  double speed = 5.0;      // m/s along this segment

  double length(const Vec2& from) const;
};

struct ScriptedObject {
  int object_id = 0;
  std::string object_class = "car";
  Vec2 start = Vec2::Zero();
  std::vector<PathSegment> path;
  double spawn_time = 0.0;
  bool despawn_at_end = true;
  Vec2 box_half_extents = Vec2(2.0, 1.0);
  double height = 1.5;
};

/// Pose of a scripted object at time t (empty when not spawned/despawned).
struct ObjectPose {
  Vec2 position = Vec2::Zero();
  double yaw = 0.0;
  Vec2 velocity = Vec2::Zero();
};
std::optional<ObjectPose> object_pose_at(const ScriptedObject& obj, double t);

struct SceneConfig {
  std::vector<SensorModel> sensors;
  std::vector<BoxShape> static_props;
  std::vector<ScriptedObject> objects;
  double frame_period = 0.1;
  double duration = 10.0;
  std::uint64_t seed = 1;
  OccupancyGrid drivable;  // planner experiments; empty when unused
};

/// Per-point provenance labels emitted alongside a sampled frame.
/// kGroundLabel for the ground plane, kStaticLabelBase - k for static prop
/// k, and the object id for scripted objects.
constexpr int kGroundLabel = -1;
constexpr int kStaticLabelBase = -2;

/// Ray-casts one sensor at time t (organized output, exact nearest-hit
/// occlusion, Gaussian range noise). Deterministic: the noise draw depends
/// only on (seed, sensor, frame index, beam, azimuth).
PointCloud sample_frame(const SceneConfig& scene, std::size_t sensor_index, int frame_index,
                        std::vector<int>* labels = nullptr);

struct GroundTruthObject {
  int object_id = 0;
  Vec3 centroid = Vec3::Zero();
  double yaw = 0.0;
  Vec2 velocity = Vec2::Zero();
  OrientedBoundingBox box;
  std::vector<int> visible_points_per_sensor;
};

struct GroundTruthFrame {
  int frame_index = 0;
  double timestamp = 0.0;
  std::vector<GroundTruthObject> objects;
};

struct FrameSet {
  std::vector<PointCloud> clouds;             // one per sensor
  std::vector<std::vector<int>> labels;       // parallel to clouds
  GroundTruthFrame truth;
};

/// Samples every sensor at one frame and assembles ground truth with
/// per-sensor visibility counts.
FrameSet simulate_frame_set(const SceneConfig& scene, int frame_index);

/// Analytic truth (no sampling): object poses and boxes at a frame.
GroundTruthFrame ground_truth_at(const SceneConfig& scene, int frame_index);

/// scene.json (de)serialization.
std::string scene_to_json(const SceneConfig& scene);
SceneConfig scene_from_json(const std::string& json_text);
SceneConfig scene_from_json_file(const std::string& path);

// ---------------------------------------------------------------------------
// Intersection experiments
// ---------------------------------------------------------------------------

enum class Arm { kNorth, kEast, kSouth, kWest };

struct IntersectionVehicle {
  int vehicle_id = 0;
  Arm arm = Arm::kNorth;
  double arrival_offset = 0.0;  // seconds of travel before reaching the stop line
  double speed = 2.0;           // m/s
  Vec2 box_half_extents = Vec2(1.0, 0.5);
};

/// 4-way crossing: two orthogonal roads on an otherwise blocked grid, with
/// right-hand lanes. Vehicles enter on their arm's approach lane and exit
/// straight across. Arrival offsets are realized as staggered start
/// distances so a single planning epoch covers the whole schedule.
struct IntersectionScenario {
  OccupancyGrid grid;
  double lane_offset_cells = 4;     // lane center distance from road axis
  double road_half_width_cells = 8; // drivable half-width of each road
  std::vector<IntersectionVehicle> vehicles;
  PlannerConfig planner;

  GridCell spawn_cell(const IntersectionVehicle& v) const;
  GridCell goal_cell(const IntersectionVehicle& v) const;
  /// Distance (meters) from spawn to the stop line for this vehicle.
  double approach_distance(const IntersectionVehicle& v) const;
};

IntersectionScenario make_intersection_scenario(const std::vector<IntersectionVehicle>& vehicles,
                                                const PlannerConfig& planner = {});

struct WaitTimeResult {
  std::vector<double> per_vehicle_wait;  // seconds stopped before clearing the scene
  double mean_wait = 0.0;
  bool all_reached = false;
};

/// Fixed two-phase traffic light (green N-S then green E-W, equal splits).
/// Vehicles queue with one-cell headway and discharge FIFO; wait time is
/// time spent stopped.
WaitTimeResult static_light_baseline(const IntersectionScenario& scenario, double cycle_seconds);

/// Centralized sequential planning on the identical arrival schedule; wait
/// time is time spent holding a cell before reaching the goal.
WaitTimeResult planned_wait_times(const IntersectionScenario& scenario);

struct CoopOutcome {
  bool deadlocked = false;
  int frames_run = 0;
  std::vector<bool> reached_goal;
};

/// Decentralized baseline: shared perception, per-vehicle planning. Each
/// frame every vehicle independently plans against constant-velocity
/// extrapolations of all others, then executes one frame of its own plan.
/// Deadlock is declared after `stall_frames` consecutive frames in which no
/// unfinished vehicle changes cell.
CoopOutcome ideal_coop_baseline(const IntersectionScenario& scenario, int max_frames = 600,
                                int stall_frames = 50);

/// Centralized planning on the same scenario, executed to completion.
CoopOutcome centralized_crossing(const IntersectionScenario& scenario, int max_frames = 600);

// ---------------------------------------------------------------------------
// Packet-loss robustness experiment
// ---------------------------------------------------------------------------

struct PacketLossConfig {
  double loss_rate = 0.0;
  std::uint64_t seed = 7;
  double ego_speed = 8.0;        // m/s commanded
  double violator_speed = 6.0;   // m/s once it starts moving
  double violator_start = 4.2;   // seconds; before this it is parked
  double a_max = 5.0;            // m/s^2 ego braking/acceleration
  double control_dt = 0.01;      // seconds
  PlannerConfig planner;
};

struct PacketLossResult {
  double min_distance = 0.0;  // closest ego-to-violator center distance
  bool collided = false;
  bool ego_reached_goal = false;
  int epochs_delivered = 0;
  int epochs_total = 0;
};

/// Occluded-crossing scenario: the ego vehicle approaches a crossing while a
/// violator darts across its path. Fresh trajectories are planned every
/// frame; each delivery after the first is dropped i.i.d. with the given
/// loss rate (common random numbers across rates: one uniform draw per epoch
/// decides delivery for every rate). The ego follows the latest received
/// trajectory through the braking controller.
PacketLossResult packet_loss_experiment(const PacketLossConfig& cfg);

}  // namespace crossview
