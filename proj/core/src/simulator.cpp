#include "crossview/simulator.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

namespace crossview {

// ---------------------------------------------------------------------------
// Scripted paths
// ---------------------------------------------------------------------------

double PathSegment::length(const Vec2& from) const {
  if (kind == Kind::kLine) return (to - from).norm();
  return std::abs(arc_end - arc_begin) * arc_radius;
}

namespace {

Vec2 arc_point(const PathSegment& seg, double angle) {
  return seg.arc_center + seg.arc_radius * Vec2(std::cos(angle), std::sin(angle));
}

struct SegmentSample {
  Vec2 position;
  Vec2 tangent;
};

SegmentSample sample_segment(const PathSegment& seg, const Vec2& from, double s) {
  if (seg.kind == PathSegment::Kind::kLine) {
    const Vec2 d = seg.to - from;
    const double len = d.norm();
    const Vec2 t = len > 1e-12 ? Vec2(d / len) : Vec2::UnitX();
    return {from + t * s, t};
  }
  const double sweep = seg.arc_end - seg.arc_begin;
  const double dir = sweep >= 0.0 ? 1.0 : -1.0;
  const double angle = seg.arc_begin + dir * s / seg.arc_radius;
  const Vec2 radial(std::cos(angle), std::sin(angle));
  return {seg.arc_center + seg.arc_radius * radial,
          dir * Vec2(-radial.y(), radial.x())};
}

Vec2 segment_end(const PathSegment& seg, const Vec2& from) {
  if (seg.kind == PathSegment::Kind::kLine) return seg.to;
  (void)from;
  return arc_point(seg, seg.arc_end);
}

}  // namespace

std::optional<ObjectPose> object_pose_at(const ScriptedObject& obj, double t) {
  if (t < obj.spawn_time) return std::nullopt;
  double elapsed = t - obj.spawn_time;
  Vec2 from = obj.start;
  for (const PathSegment& seg : obj.path) {
    const double len = seg.length(from);
    const double seg_time = seg.speed > 1e-12 ? len / seg.speed : 0.0;
    if (elapsed <= seg_time || seg_time <= 0.0) {
      const SegmentSample s = sample_segment(seg, from, elapsed * seg.speed);
      ObjectPose pose;
      pose.position = s.position;
      pose.yaw = std::atan2(s.tangent.y(), s.tangent.x());
      pose.velocity = s.tangent * seg.speed;
      return pose;
    }
    elapsed -= seg_time;
    from = segment_end(seg, from);
  }
  if (obj.despawn_at_end && !obj.path.empty()) return std::nullopt;
  ObjectPose pose;
  pose.position = from;
  Vec2 tangent = Vec2::UnitX();
  if (!obj.path.empty()) {
    tangent = sample_segment(obj.path.back(),
                             obj.path.size() >= 2 ? segment_end(obj.path[obj.path.size() - 2],
                                                                obj.start)
                                                  : obj.start,
                             obj.path.back().length(obj.start))
                  .tangent;
  }
  pose.yaw = std::atan2(tangent.y(), tangent.x());
  pose.velocity = Vec2::Zero();
  return pose;
}

// ---------------------------------------------------------------------------
// Ray casting
// ---------------------------------------------------------------------------

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Deterministic standard normal keyed by the ray identity.
double ray_noise(std::uint64_t seed, std::uint64_t sensor, std::uint64_t frame,
                 std::uint64_t beam, std::uint64_t azimuth) {
  std::uint64_t key = seed;
  key = splitmix64(key ^ (sensor * 0x100000001b3ULL));
  key = splitmix64(key ^ (frame * 0x1000193ULL));
  key = splitmix64(key ^ (beam << 32) ^ azimuth);
  const std::uint64_t a = splitmix64(key);
  const std::uint64_t b = splitmix64(a);
  const double u1 = (static_cast<double>(a >> 11) + 0.5) / 9007199254740992.0;  // (0,1)
  const double u2 = (static_cast<double>(b >> 11) + 0.5) / 9007199254740992.0;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

/// Ray / upright-box intersection via the slab method in the box frame.
/// Returns the entry distance when the ray starts outside and hits.
std::optional<double> ray_box(const Vec3& origin, const Vec3& dir, const BoxShape& box,
                              const Vec2& center_override, double yaw_override) {
  const double c = std::cos(-yaw_override), s = std::sin(-yaw_override);
  const Vec3 rel(origin.x() - center_override.x(), origin.y() - center_override.y(),
                 origin.z() - 0.5 * box.height);
  const Vec3 o(c * rel.x() - s * rel.y(), s * rel.x() + c * rel.y(), rel.z());
  const Vec3 d(c * dir.x() - s * dir.y(), s * dir.x() + c * dir.y(), dir.z());
  const double ext[3] = {box.half_extents.x(), box.half_extents.y(), 0.5 * box.height};

  double tmin = 0.0, tmax = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-12) {
      if (std::abs(o[a]) > ext[a]) return std::nullopt;
      continue;
    }
    double t0 = (-ext[a] - o[a]) / d[a];
    double t1 = (ext[a] - o[a]) / d[a];
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
    if (tmin > tmax) return std::nullopt;
  }
  if (tmin <= 1e-9) return std::nullopt;  // origin inside or behind
  return tmin;
}

}  // namespace

PointCloud sample_frame(const SceneConfig& scene, std::size_t sensor_index, int frame_index,
                        std::vector<int>* labels) {
  if (sensor_index >= scene.sensors.size()) {
    throw SimulatorError("sample_frame: sensor index out of range");
  }
  const SensorModel& sensor = scene.sensors[sensor_index];
  const double t = frame_index * scene.frame_period;
  if (t < 0.0 || t > scene.duration + 1e-9) {
    throw SimulatorError("sample_frame: time outside scene duration");
  }

  // Object poses at this instant.
  struct ActiveObject {
    const ScriptedObject* obj;
    ObjectPose pose;
  };
  std::vector<ActiveObject> active;
  for (const ScriptedObject& obj : scene.objects) {
    if (auto pose = object_pose_at(obj, t)) active.push_back({&obj, *pose});
  }

  PointCloud cloud;
  cloud.timestamp = t;
  cloud.sensor_id = static_cast<int>(sensor_index);
  Organization org;
  org.beam_count = sensor.beams;
  org.azimuth_count = sensor.azimuth_count();
  org.ranges.assign(org.lattice_size(), 0.0);
  org.has_return.assign(org.lattice_size(), 0);

  const Vec3 origin = sensor.pose.translation;
  const double fov = deg_to_rad(sensor.fov_deg);

  for (int beam = 0; beam < sensor.beams; ++beam) {
    const double elevation =
        sensor.beams > 1 ? -0.5 * fov + fov * beam / (sensor.beams - 1) : 0.0;
    for (int az = 0; az < org.azimuth_count; ++az) {
      const double azimuth = deg_to_rad(az * sensor.azimuth_step_deg);
      const Vec3 d_sensor(std::cos(elevation) * std::cos(azimuth),
                          std::cos(elevation) * std::sin(azimuth), std::sin(elevation));
      const Vec3 d = sensor.pose.rotation * d_sensor;

      double best = std::numeric_limits<double>::infinity();
      int label = kGroundLabel;

      if (d.z() < -1e-12) {  // ground plane z = 0
        const double tg = -origin.z() / d.z();
        if (tg > 1e-9 && tg < best) {
          best = tg;
          label = kGroundLabel;
        }
      }
      for (std::size_t k = 0; k < scene.static_props.size(); ++k) {
        const BoxShape& prop = scene.static_props[k];
        if (auto th = ray_box(origin, d, prop, prop.center, prop.yaw)) {
          if (*th < best) {
            best = *th;
            label = kStaticLabelBase - static_cast<int>(k);
          }
        }
      }
      for (const ActiveObject& ao : active) {
        BoxShape shape;
        shape.half_extents = ao.obj->box_half_extents;
        shape.height = ao.obj->height;
        if (auto th = ray_box(origin, d, shape, ao.pose.position, ao.pose.yaw)) {
          if (*th < best) {
            best = *th;
            label = ao.obj->object_id;
          }
        }
      }

      if (!std::isfinite(best) || best > sensor.max_range) continue;

      double range = best;
      if (sensor.noise_sigma > 0.0) {
        range += sensor.noise_sigma *
                 ray_noise(scene.seed, sensor_index, static_cast<std::uint64_t>(frame_index),
                           static_cast<std::uint64_t>(beam), static_cast<std::uint64_t>(az));
        range = std::max(range, 1e-6);
      }

      const std::size_t cell = org.cell(beam, az);
      org.ranges[cell] = range;
      org.has_return[cell] = 1;
      org.beam_index.push_back(beam);
      org.azimuth_index.push_back(az);
      cloud.points.push_back(d_sensor * range);
      if (labels) labels->push_back(label);
    }
  }
  cloud.organization = std::move(org);
  return cloud;
}

GroundTruthFrame ground_truth_at(const SceneConfig& scene, int frame_index) {
  GroundTruthFrame frame;
  frame.frame_index = frame_index;
  frame.timestamp = frame_index * scene.frame_period;
  for (const ScriptedObject& obj : scene.objects) {
    const auto pose = object_pose_at(obj, frame.timestamp);
    if (!pose) continue;
    GroundTruthObject g;
    g.object_id = obj.object_id;
    g.centroid = Vec3(pose->position.x(), pose->position.y(), 0.5 * obj.height);
    g.yaw = pose->yaw;
    g.velocity = pose->velocity;
    g.box.centroid = g.centroid;
    g.box.axes[0] = Vec3::UnitZ();
    g.box.axes[1] = Vec3(std::cos(pose->yaw), std::sin(pose->yaw), 0.0);
    g.box.axes[2] = g.box.axes[0].cross(g.box.axes[1]);
    g.box.extents = Vec3(0.5 * obj.height, obj.box_half_extents.x(), obj.box_half_extents.y());
    g.visible_points_per_sensor.assign(scene.sensors.size(), 0);
    frame.objects.push_back(std::move(g));
  }
  return frame;
}

FrameSet simulate_frame_set(const SceneConfig& scene, int frame_index) {
  FrameSet set;
  set.truth = ground_truth_at(scene, frame_index);
  set.clouds.resize(scene.sensors.size());
  set.labels.resize(scene.sensors.size());
  for (std::size_t s = 0; s < scene.sensors.size(); ++s) {
    set.clouds[s] = sample_frame(scene, s, frame_index, &set.labels[s]);
    for (int label : set.labels[s]) {
      if (label < 0) continue;
      for (GroundTruthObject& g : set.truth.objects) {
        if (g.object_id == label) {
          g.visible_points_per_sensor[s] += 1;
          break;
        }
      }
    }
  }
  return set;
}

// ---------------------------------------------------------------------------
// scene.json
// ---------------------------------------------------------------------------

namespace {

nlohmann::json pose_to_json(const RigidTransform& pose) {
  // Row-major rotation is authoritative (lossless round trip); the Euler
  // angles are informational for hand-written files.
  const Mat3& r = pose.rotation;
  std::vector<double> rot;
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) rot.push_back(r(i, k));
  }
  const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  const double roll = std::atan2(r(2, 1), r(2, 2));
  const double yaw = std::atan2(r(1, 0), r(0, 0));
  return {{"x", pose.translation.x()},      {"y", pose.translation.y()},
          {"z", pose.translation.z()},      {"rotation_row_major", rot},
          {"roll_deg", rad_to_deg(roll)},   {"pitch_deg", rad_to_deg(pitch)},
          {"yaw_deg", rad_to_deg(yaw)}};
}

RigidTransform pose_from_json(const nlohmann::json& j) {
  RigidTransform pose;
  if (j.contains("rotation_row_major")) {
    const auto& rot = j["rotation_row_major"];
    for (int i = 0; i < 3; ++i) {
      for (int k = 0; k < 3; ++k) pose.rotation(i, k) = rot.at(i * 3 + k).get<double>();
    }
  } else {
    const double roll = deg_to_rad(j.value("roll_deg", 0.0));
    const double pitch = deg_to_rad(j.value("pitch_deg", 0.0));
    const double yaw = deg_to_rad(j.value("yaw_deg", 0.0));
    pose.rotation = (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) *
                     Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
                     Eigen::AngleAxisd(roll, Vec3::UnitX()))
                        .toRotationMatrix();
  }
  pose.translation = Vec3(j.value("x", 0.0), j.value("y", 0.0), j.value("z", 0.0));
  return pose;
}

}  // namespace

std::string scene_to_json(const SceneConfig& scene) {
  nlohmann::json j;
  j["frame_period"] = scene.frame_period;
  j["duration"] = scene.duration;
  j["seed"] = scene.seed;
  for (const SensorModel& s : scene.sensors) {
    j["sensors"].push_back({{"pose", pose_to_json(s.pose)},
                            {"fov_deg", s.fov_deg},
                            {"beams", s.beams},
                            {"azimuth_step_deg", s.azimuth_step_deg},
                            {"max_range", s.max_range},
                            {"noise_sigma", s.noise_sigma}});
  }
  j["static_props"] = nlohmann::json::array();
  for (const BoxShape& b : scene.static_props) {
    j["static_props"].push_back({{"center", {b.center.x(), b.center.y()}},
                                 {"yaw", b.yaw},
                                 {"half_extents", {b.half_extents.x(), b.half_extents.y()}},
                                 {"height", b.height}});
  }
  j["objects"] = nlohmann::json::array();
  for (const ScriptedObject& o : scene.objects) {
    nlohmann::json jo;
    jo["object_id"] = o.object_id;
    jo["class"] = o.object_class;
    jo["start"] = {o.start.x(), o.start.y()};
    jo["spawn_time"] = o.spawn_time;
    jo["despawn_at_end"] = o.despawn_at_end;
    jo["box_half_extents"] = {o.box_half_extents.x(), o.box_half_extents.y()};
    jo["height"] = o.height;
    for (const PathSegment& seg : o.path) {
      if (seg.kind == PathSegment::Kind::kLine) {
        jo["path"].push_back(
            {{"line_to", {seg.to.x(), seg.to.y()}}, {"speed", seg.speed}});
      } else {
        jo["path"].push_back({{"arc_center", {seg.arc_center.x(), seg.arc_center.y()}},
                              {"arc_radius", seg.arc_radius},
                              {"arc_begin", seg.arc_begin},
                              {"arc_end", seg.arc_end},
                              {"speed", seg.speed}});
      }
    }
    if (o.path.empty()) jo["path"] = nlohmann::json::array();
    j["objects"].push_back(jo);
  }
  if (scene.drivable.width > 0) {
    nlohmann::json g;
    g["origin"] = {scene.drivable.origin.x(), scene.drivable.origin.y()};
    g["cell_size"] = scene.drivable.cell_size;
    g["width"] = scene.drivable.width;
    g["height"] = scene.drivable.height;
    std::string mask;
    mask.reserve(scene.drivable.drivable.size());
    for (auto v : scene.drivable.drivable) mask.push_back(v ? '1' : '0');
    g["mask"] = mask;
    j["drivable"] = g;
  }
  return j.dump(2);
}

SceneConfig scene_from_json(const std::string& json_text) {
  const nlohmann::json j = nlohmann::json::parse(json_text);
  SceneConfig scene;
  scene.frame_period = j.value("frame_period", 0.1);
  scene.duration = j.value("duration", 10.0);
  scene.seed = j.value("seed", std::uint64_t{1});
  if (j.contains("sensors")) {
    for (const auto& js : j["sensors"]) {
      SensorModel s;
      if (js.contains("pose")) s.pose = pose_from_json(js["pose"]);
      s.fov_deg = js.value("fov_deg", 30.0);
      s.beams = js.value("beams", 32);
      s.azimuth_step_deg = js.value("azimuth_step_deg", 1.0);
      s.max_range = js.value("max_range", 120.0);
      s.noise_sigma = js.value("noise_sigma", 0.0);
      scene.sensors.push_back(s);
    }
  }
  if (j.contains("static_props")) {
    for (const auto& jb : j["static_props"]) {
      BoxShape b;
      b.center = Vec2(jb["center"][0].get<double>(), jb["center"][1].get<double>());
      b.yaw = jb.contains("yaw") ? jb["yaw"].get<double>() : deg_to_rad(jb.value("yaw_deg", 0.0));
      b.half_extents =
          Vec2(jb["half_extents"][0].get<double>(), jb["half_extents"][1].get<double>());
      b.height = jb.value("height", 1.5);
      scene.static_props.push_back(b);
    }
  }
  if (j.contains("objects")) {
    for (const auto& jo : j["objects"]) {
      ScriptedObject o;
      o.object_id = jo.value("object_id", 0);
      o.object_class = jo.value("class", "car");
      o.start = Vec2(jo["start"][0].get<double>(), jo["start"][1].get<double>());
      o.spawn_time = jo.value("spawn_time", 0.0);
      o.despawn_at_end = jo.value("despawn_at_end", true);
      o.box_half_extents = Vec2(jo["box_half_extents"][0].get<double>(),
                                jo["box_half_extents"][1].get<double>());
      o.height = jo.value("height", 1.5);
      if (jo.contains("path")) {
        for (const auto& jseg : jo["path"]) {
          PathSegment seg;
          if (jseg.contains("line_to")) {
            seg.kind = PathSegment::Kind::kLine;
            seg.to = Vec2(jseg["line_to"][0].get<double>(), jseg["line_to"][1].get<double>());
          } else {
            seg.kind = PathSegment::Kind::kArc;
            seg.arc_center = Vec2(jseg["arc_center"][0].get<double>(),
                                  jseg["arc_center"][1].get<double>());
            seg.arc_radius = jseg.value("arc_radius", 1.0);
            seg.arc_begin = jseg.contains("arc_begin")
                                ? jseg["arc_begin"].get<double>()
                                : deg_to_rad(jseg.value("arc_begin_deg", 0.0));
            seg.arc_end = jseg.contains("arc_end")
                              ? jseg["arc_end"].get<double>()
                              : deg_to_rad(jseg.value("arc_end_deg", 0.0));
          }
          seg.speed = jseg.value("speed", 5.0);
          o.path.push_back(seg);
        }
      }
      scene.objects.push_back(std::move(o));
    }
  }
  if (j.contains("drivable")) {
    const auto& g = j["drivable"];
    OccupancyGrid grid;
    grid.origin = Vec2(g["origin"][0].get<double>(), g["origin"][1].get<double>());
    grid.cell_size = g.value("cell_size", 1.0);
    grid.width = g.value("width", 0);
    grid.height = g.value("height", 0);
    const std::string mask = g.value("mask", "");
    grid.drivable.resize(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i) grid.drivable[i] = mask[i] == '1' ? 1 : 0;
    scene.drivable = std::move(grid);
  }
  return scene;
}

SceneConfig scene_from_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw SimulatorError("scene_from_json_file: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return scene_from_json(text);
}

// ---------------------------------------------------------------------------
// Intersection scenarios
// ---------------------------------------------------------------------------

namespace {

struct ArmFrame {
  Vec2 dir;      // travel direction
  Vec2 lateral;  // right-hand offset direction
};

ArmFrame arm_frame(Arm arm) {
  switch (arm) {
    case Arm::kNorth: return {{0.0, -1.0}, {-1.0, 0.0}};
    case Arm::kSouth: return {{0.0, 1.0}, {1.0, 0.0}};
    case Arm::kWest: return {{1.0, 0.0}, {0.0, -1.0}};
    case Arm::kEast: return {{-1.0, 0.0}, {0.0, 1.0}};
  }
  return {{1.0, 0.0}, {0.0, -1.0}};
}

}  // namespace

GridCell IntersectionScenario::spawn_cell(const IntersectionVehicle& v) const {
  const ArmFrame f = arm_frame(v.arm);
  const double cx = (grid.width - 1) / 2.0, cy = (grid.height - 1) / 2.0;
  const double lane = lane_offset_cells;
  const double approach = approach_distance(v) / grid.cell_size;
  const Vec2 center(cx, cy);
  const Vec2 stop_line = center - f.dir * (road_half_width_cells + 1.0);
  const Vec2 cell = stop_line - f.dir * approach + f.lateral * lane;
  return {static_cast<int>(std::lround(cell.x())), static_cast<int>(std::lround(cell.y()))};
}

GridCell IntersectionScenario::goal_cell(const IntersectionVehicle& v) const {
  const ArmFrame f = arm_frame(v.arm);
  const double cx = (grid.width - 1) / 2.0, cy = (grid.height - 1) / 2.0;
  const Vec2 center(cx, cy);

  // Vehicles exiting on the same arm queue behind each other: earlier
  // arrivals park farther along the exit.
  int rank = 0;
  std::vector<const IntersectionVehicle*> same_arm;
  for (const auto& o : vehicles) {
    if (o.arm == v.arm) same_arm.push_back(&o);
  }
  std::sort(same_arm.begin(), same_arm.end(), [](const auto* a, const auto* b) {
    if (a->arrival_offset != b->arrival_offset) return a->arrival_offset < b->arrival_offset;
    return a->vehicle_id < b->vehicle_id;
  });
  for (std::size_t i = 0; i < same_arm.size(); ++i) {
    if (same_arm[i]->vehicle_id == v.vehicle_id) rank = static_cast<int>(i);
  }

  const double exit_base = road_half_width_cells + 2.0 +
                           static_cast<double>(same_arm.size() - rank) * 8.0;
  const Vec2 cell = center + f.dir * exit_base + f.lateral * lane_offset_cells;
  return {static_cast<int>(std::lround(cell.x())), static_cast<int>(std::lround(cell.y()))};
}

double IntersectionScenario::approach_distance(const IntersectionVehicle& v) const {
  return 4.0 * grid.cell_size + v.speed * v.arrival_offset;
}

IntersectionScenario make_intersection_scenario(const std::vector<IntersectionVehicle>& vehicles,
                                                const PlannerConfig& planner) {
  IntersectionScenario sc;
  sc.vehicles = vehicles;
  sc.planner = planner;

  double max_approach = 0.0;
  std::map<Arm, int> per_arm;
  for (const auto& v : vehicles) {
    max_approach = std::max(max_approach, 4.0 + v.speed * v.arrival_offset);
    per_arm[v.arm] += 1;
  }
  int max_queue = 1;
  for (const auto& [arm, count] : per_arm) max_queue = std::max(max_queue, count);

  const int arm_length = static_cast<int>(std::ceil(max_approach)) +
                         std::max(8 * max_queue + 6, 12);
  const int half = static_cast<int>(sc.road_half_width_cells) + arm_length;
  const int size = 2 * half + 1;

  OccupancyGrid grid;
  grid.width = size;
  grid.height = size;
  grid.cell_size = 1.0;
  grid.drivable.assign(static_cast<std::size_t>(size) * size, 0);
  const int c = half;  // center index
  const int w = static_cast<int>(sc.road_half_width_cells);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      if (std::abs(x - c) <= w || std::abs(y - c) <= w) {
        grid.drivable[static_cast<std::size_t>(y) * size + x] = 1;
      }
    }
  }
  sc.grid = std::move(grid);

  // Horizon: longest trip plus generous slack for queueing.
  double max_trip = 0.0;
  for (const auto& v : vehicles) {
    const GridCell s = sc.spawn_cell(v);
    const GridCell g = sc.goal_cell(v);
    const double dist = std::abs(s.x - g.x) + std::abs(s.y - g.y);
    max_trip = std::max(max_trip, dist / std::max(v.speed, 0.5));
  }
  sc.planner.horizon = std::max(sc.planner.horizon, 2.0 * max_trip + 20.0);
  return sc;
}

namespace {

OrientedBoundingBox vehicle_box(const IntersectionVehicle& v, const Vec2& position,
                                const Vec2& heading) {
  OrientedBoundingBox box;
  box.centroid = Vec3(position.x(), position.y(), 0.75);
  box.axes[0] = Vec3::UnitZ();
  box.axes[1] = Vec3(heading.x(), heading.y(), 0.0).normalized();
  box.axes[2] = box.axes[0].cross(box.axes[1]);
  box.extents = Vec3(0.75, v.box_half_extents.x(), v.box_half_extents.y());
  return box;
}

std::vector<PlanRequest> intersection_requests(const IntersectionScenario& sc) {
  std::vector<const IntersectionVehicle*> order;
  for (const auto& v : sc.vehicles) order.push_back(&v);
  // Planning order: ascending arrival, ties by vehicle id.
  std::sort(order.begin(), order.end(), [](const auto* a, const auto* b) {
    if (a->arrival_offset != b->arrival_offset) return a->arrival_offset < b->arrival_offset;
    return a->vehicle_id < b->vehicle_id;
  });

  std::vector<PlanRequest> requests;
  for (const auto* v : order) {
    PlanRequest req;
    req.vehicle_id = v->vehicle_id;
    req.start = sc.spawn_cell(*v);
    req.goal = sc.goal_cell(*v);
    req.nominal_speed = v->speed;
    const ArmFrame f = arm_frame(v->arm);
    req.box = vehicle_box(*v, sc.grid.cell_center(req.start), f.dir);
    requests.push_back(req);
  }
  return requests;
}

}  // namespace

WaitTimeResult planned_wait_times(const IntersectionScenario& scenario) {
  const std::vector<PlanRequest> requests = intersection_requests(scenario);
  const std::vector<PlanOutcome> plans =
      plan_all(requests, scenario.grid, {}, scenario.planner, 0.0);

  WaitTimeResult result;
  result.all_reached = true;
  double total = 0.0;
  result.per_vehicle_wait.resize(plans.size(), 0.0);
  for (std::size_t i = 0; i < plans.size(); ++i) {
    const PlanOutcome& p = plans[i];
    if (p.status != PlanStatus::kPlanned ||
        !(p.trajectory.waypoints.back().cell == requests[i].goal)) {
      result.all_reached = false;
    }
    double wait = 0.0;
    const auto& wps = p.trajectory.waypoints;
    for (std::size_t k = 0; k + 1 < wps.size(); ++k) {
      if (wps[k].cell == wps[k + 1].cell) wait += wps[k + 1].time - wps[k].time;
    }
    result.per_vehicle_wait[i] = wait;
    total += wait;
  }
  result.mean_wait = plans.empty() ? 0.0 : total / static_cast<double>(plans.size());
  return result;
}

WaitTimeResult static_light_baseline(const IntersectionScenario& scenario, double cycle_seconds) {
  struct SimVehicle {
    const IntersectionVehicle* cfg;
    std::vector<GridCell> path;  // spawn .. goal inclusive
    std::size_t at = 0;          // index into path
    int cooldown = 0;            // ticks until the current move completes
    int move_ticks = 1;
    double waited = 0.0;
    bool done = false;
  };

  const OccupancyGrid& grid = scenario.grid;
  const double tick = scenario.planner.tick;
  const int c = (grid.width - 1) / 2;
  const int w = static_cast<int>(scenario.road_half_width_cells);

  std::vector<SimVehicle> sims;
  for (const auto& v : scenario.vehicles) {
    SimVehicle sv;
    sv.cfg = &v;
    const GridCell spawn = scenario.spawn_cell(v);
    const GridCell goal = scenario.goal_cell(v);
    const int steps = std::abs(goal.x - spawn.x) + std::abs(goal.y - spawn.y);
    const int sx = goal.x == spawn.x ? 0 : (goal.x > spawn.x ? 1 : -1);
    const int sy = goal.y == spawn.y ? 0 : (goal.y > spawn.y ? 1 : -1);
    GridCell cur = spawn;
    sv.path.push_back(cur);
    for (int k = 0; k < steps; ++k) {
      cur = {cur.x + sx, cur.y + sy};
      sv.path.push_back(cur);
    }
    sv.move_ticks = std::max(
        1, static_cast<int>(std::ceil(grid.cell_size / (v.speed * tick))));
    sims.push_back(std::move(sv));
  }

  auto inside_box = [&](const GridCell& cell) {
    return std::abs(cell.x - c) <= w && std::abs(cell.y - c) <= w;
  };
  auto axis_green = [&](Arm arm, double t) {
    const double phase = std::fmod(t, cycle_seconds);
    const bool ns_green = phase < 0.5 * cycle_seconds;
    const bool is_ns = arm == Arm::kNorth || arm == Arm::kSouth;
    return is_ns == ns_green;
  };

  const double t_max = 10.0 * scenario.planner.horizon + 300.0;
  double t = 0.0;
  while (t < t_max) {
    bool all_done = true;
    for (const auto& sv : sims) all_done = all_done && sv.done;
    if (all_done) break;

    // Occupancy snapshot (one cell per vehicle).
    std::map<std::pair<int, int>, int> occupied;
    for (std::size_t i = 0; i < sims.size(); ++i) {
      const GridCell cell = sims[i].path[sims[i].at];
      occupied[{cell.x, cell.y}] = static_cast<int>(i);
    }

    // FIFO discharge: vehicles closer to their goal move first.
    std::vector<std::size_t> order(sims.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const auto remain_a = sims[a].path.size() - sims[a].at;
      const auto remain_b = sims[b].path.size() - sims[b].at;
      if (remain_a != remain_b) return remain_a < remain_b;
      return sims[a].cfg->vehicle_id < sims[b].cfg->vehicle_id;
    });

    for (std::size_t idx : order) {
      SimVehicle& sv = sims[idx];
      if (sv.done) continue;
      if (sv.cooldown > 0) {
        sv.cooldown -= 1;
        continue;
      }
      if (sv.at + 1 >= sv.path.size()) {
        sv.done = true;
        continue;
      }
      const GridCell next = sv.path[sv.at + 1];
      const GridCell cur = sv.path[sv.at];
      bool blocked = occupied.count({next.x, next.y}) &&
                     occupied[{next.x, next.y}] != static_cast<int>(idx);
      if (!blocked && !inside_box(cur) && inside_box(next) &&
          !axis_green(sv.cfg->arm, t)) {
        blocked = true;  // red light at the stop line
      }
      if (blocked) {
        sv.waited += tick;
        continue;
      }
      occupied.erase({cur.x, cur.y});
      sv.at += 1;
      occupied[{next.x, next.y}] = static_cast<int>(idx);
      sv.cooldown = sv.move_ticks - 1;
      if (sv.at + 1 == sv.path.size()) sv.done = true;
    }
    t += tick;
  }

  WaitTimeResult result;
  result.all_reached = true;
  double total = 0.0;
  for (const auto& sv : sims) {
    result.per_vehicle_wait.push_back(sv.waited);
    total += sv.waited;
    result.all_reached = result.all_reached && sv.done;
  }
  result.mean_wait = sims.empty() ? 0.0 : total / static_cast<double>(sims.size());
  return result;
}

namespace {

struct CoopVehicle {
  const IntersectionVehicle* cfg;
  GridCell goal;
  Vec2 position;
  Vec2 prev_position;
  Vec2 lane_dir;
  SpaceTimeTrajectory plan;
  bool has_plan = false;
  bool reached = false;
};

/// Trajectory time whose position is closest to `pos` (earliest on ties).
/// Fresh plans start at the current cell's *center*; projecting the actual
/// position onto them keeps execution continuous across replans.
double project_onto_trajectory(const SpaceTimeTrajectory& traj, const Vec2& pos) {
  double best_d = std::numeric_limits<double>::infinity();
  double best_t = traj.waypoints.empty() ? 0.0 : traj.waypoints.front().time;
  for (std::size_t i = 1; i < traj.waypoints.size(); ++i) {
    const auto& a = traj.waypoints[i - 1];
    const auto& b = traj.waypoints[i];
    const Vec2 seg = b.position - a.position;
    const double len2 = seg.squaredNorm();
    double s = 0.0;
    if (len2 > 1e-12) s = std::clamp((pos - a.position).dot(seg) / len2, 0.0, 1.0);
    const Vec2 closest = a.position + seg * s;
    const double d = (closest - pos).norm();
    if (d < best_d - 1e-12) {
      best_d = d;
      best_t = a.time + s * (b.time - a.time);
    }
  }
  return best_t;
}

}  // namespace

CoopOutcome ideal_coop_baseline(const IntersectionScenario& scenario, int max_frames,
                                int stall_frames) {
  const OccupancyGrid& grid = scenario.grid;
  const PlannerConfig& cfg = scenario.planner;
  const double period = 0.1;

  std::vector<CoopVehicle> vehicles;
  for (const auto& v : scenario.vehicles) {
    CoopVehicle cv;
    cv.cfg = &v;
    cv.goal = scenario.goal_cell(v);
    cv.position = grid.cell_center(scenario.spawn_cell(v));
    cv.prev_position = cv.position;
    cv.lane_dir = arm_frame(v.arm).dir;
    vehicles.push_back(cv);
  }

  CoopOutcome outcome;
  outcome.reached_goal.assign(vehicles.size(), false);
  int stall = 0;

  for (int frame = 0; frame < max_frames; ++frame) {
    const double now = frame * period;

    // Plan for every unfinished vehicle from the same perception snapshot.
    std::vector<SpaceTimeTrajectory> fresh(vehicles.size());
    std::vector<bool> fresh_ok(vehicles.size(), false);
    for (std::size_t i = 0; i < vehicles.size(); ++i) {
      CoopVehicle& me = vehicles[i];
      if (me.reached) continue;
      std::vector<DynamicObstacle> obstacles;
      for (std::size_t j = 0; j < vehicles.size(); ++j) {
        if (j == i) continue;
        const CoopVehicle& other = vehicles[j];
        MovingBox mb;
        const Vec2 velocity = (other.position - other.prev_position) / period;
        mb.position = other.position;
        mb.velocity = velocity;
        mb.box = vehicle_box(*other.cfg, other.position,
                             velocity.norm() > 0.1 ? Vec2(velocity.normalized())
                                                   : other.lane_dir);
        obstacles.push_back(rasterize_extrapolation(mb, grid, cfg, now));
      }
      const SafeIntervalTable table = build_safe_intervals(grid, obstacles, cfg);
      PlanRequest req;
      req.vehicle_id = me.cfg->vehicle_id;
      req.start = grid.cell_at(me.position);
      req.goal = me.goal;
      req.nominal_speed = me.cfg->speed;
      req.box = vehicle_box(*me.cfg, me.position, me.lane_dir);
      if (auto traj = sipp_plan(req, table, grid, cfg, now)) {
        fresh[i] = std::move(*traj);
        fresh_ok[i] = true;
      }
    }

    // Execute one frame.
    bool any_cell_change = false;
    for (std::size_t i = 0; i < vehicles.size(); ++i) {
      CoopVehicle& me = vehicles[i];
      if (me.reached) continue;
      if (fresh_ok[i]) {
        me.plan = fresh[i];
        me.has_plan = true;
      }
      const GridCell before = grid.cell_at(me.position);
      me.prev_position = me.position;
      if (me.has_plan) {
        const double progress = project_onto_trajectory(me.plan, me.position);
        me.position = me.plan.position_at(progress + period);
      }
      const GridCell after = grid.cell_at(me.position);
      if (!(before == after)) any_cell_change = true;
      if (after == me.goal) {
        me.reached = true;
        outcome.reached_goal[i] = true;
      }
    }

    outcome.frames_run = frame + 1;
    bool all_reached = true;
    for (const auto& v : vehicles) all_reached = all_reached && v.reached;
    if (all_reached) return outcome;

    stall = any_cell_change ? 0 : stall + 1;
    if (stall >= stall_frames) {
      outcome.deadlocked = true;
      return outcome;
    }
  }
  return outcome;
}

CoopOutcome centralized_crossing(const IntersectionScenario& scenario, int max_frames) {
  const std::vector<PlanRequest> requests = intersection_requests(scenario);
  const std::vector<PlanOutcome> plans =
      plan_all(requests, scenario.grid, {}, scenario.planner, 0.0);

  CoopOutcome outcome;
  outcome.reached_goal.assign(plans.size(), false);
  double latest = 0.0;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    const auto& p = plans[i];
    outcome.reached_goal[i] = p.status == PlanStatus::kPlanned &&
                              p.trajectory.waypoints.back().cell == requests[i].goal;
    latest = std::max(latest, p.trajectory.waypoints.back().time);
  }
  outcome.frames_run = std::min(max_frames, static_cast<int>(std::ceil(latest / 0.1)));
  bool all = true;
  for (bool r : outcome.reached_goal) all = all && r;
  outcome.deadlocked = !all;
  return outcome;
}

// ---------------------------------------------------------------------------
// Packet loss
// ---------------------------------------------------------------------------

PacketLossResult packet_loss_experiment(const PacketLossConfig& cfg) {
  // Crossing: the ego drives east along y = 20.5 toward its goal while a
  // violator parked north of the junction darts south across its lane at
  // violator_start. Every epoch replans the ego against the violator's
  // constant-velocity extrapolation; deliveries after the first are dropped
  // i.i.d. with the loss rate, with one uniform draw per epoch shared by
  // every rate (common random numbers).
  PlannerConfig planner = cfg.planner;

  const int width = 52, height = 41;
  OccupancyGrid grid = OccupancyGrid::open_field(width, height, 1.0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const bool ego_road = std::abs(y - 20) <= 4;
      const bool cross_road = std::abs(x - 40) <= 4;
      grid.drivable[static_cast<std::size_t>(y) * width + x] = (ego_road || cross_road) ? 1 : 0;
    }
  }

  const Vec2 ego_start = grid.cell_center({8, 20});
  const GridCell ego_goal{46, 20};
  const Vec2 violator_start(40.5, 20.5 + 14.0);

  OrientedBoundingBox ego_box;
  ego_box.centroid = Vec3(ego_start.x(), ego_start.y(), 0.75);
  ego_box.axes = {Vec3::UnitZ(), Vec3::UnitX(), Vec3::UnitY()};
  ego_box.extents = Vec3(0.75, 1.0, 0.5);

  OrientedBoundingBox violator_box = ego_box;
  violator_box.axes = {Vec3::UnitZ(), Vec3::UnitY(), -Vec3::UnitX()};

  std::uint64_t key = cfg.seed;
  auto next_uniform = [&key]() {
    key = splitmix64(key);
    return (static_cast<double>(key >> 11) + 0.5) / 9007199254740992.0;
  };

  auto violator_state = [&](double tt) {
    Vec2 pos = violator_start;
    Vec2 vel = Vec2::Zero();
    if (tt > cfg.violator_start) {
      pos.y() -= cfg.violator_speed * (tt - cfg.violator_start);
      vel = Vec2(0.0, -cfg.violator_speed);
    }
    return std::make_pair(pos, vel);
  };

  PacketLossResult result;
  result.min_distance = std::numeric_limits<double>::infinity();

  Vec2 ego_pos = ego_start;
  double ego_speed = cfg.ego_speed;  // rolling start
  SpaceTimeTrajectory current;
  bool have_plan = false;
  bool reached = false;

  const double t_end = 16.0;
  const double dt = cfg.control_dt;
  int epoch = -1;

  for (double t = 0.0; t < t_end && !reached; t += dt) {
    const int this_epoch = static_cast<int>(std::floor(t / 0.1 + 1e-9));
    if (this_epoch > epoch) {
      epoch = this_epoch;
      ++result.epochs_total;
      const auto [vpos, vvel] = violator_state(t);
      MovingBox mb;
      mb.position = vpos;
      mb.velocity = vvel;
      mb.box = violator_box;
      mb.box.centroid = Vec3(vpos.x(), vpos.y(), 0.75);
      const std::vector<DynamicObstacle> obstacles = {
          rasterize_extrapolation(mb, grid, planner, t)};
      const SafeIntervalTable table = build_safe_intervals(grid, obstacles, planner);
      PlanRequest req;
      req.vehicle_id = 0;
      req.start = grid.cell_at(ego_pos);
      req.goal = ego_goal;
      req.nominal_speed = cfg.ego_speed;
      req.box = ego_box;
      req.box.centroid = Vec3(ego_pos.x(), ego_pos.y(), 0.75);

      SpaceTimeTrajectory fresh;
      if (auto traj = sipp_plan(req, table, grid, planner, t)) {
        fresh = std::move(*traj);
      } else {
        // No path: the planner commands an immediate hold.
        fresh.vehicle_id = 0;
        fresh.horizon = t + planner.horizon;
        const GridCell c = grid.cell_at(ego_pos);
        fresh.waypoints = {{t, c, grid.cell_center(c)},
                           {t + planner.horizon, c, grid.cell_center(c)}};
      }
      const double u = next_uniform();
      if (epoch == 0 || u >= cfg.loss_rate) {
        current = fresh;
        have_plan = true;
        ++result.epochs_delivered;
      }
    }

    if (have_plan) {
      const ControlAction action = controller_step(current, ego_pos, ego_speed, t, cfg.a_max, dt);
      if (action.type == ControlAction::Type::kProceed) {
        const double target_speed = std::min(action.commanded_speed, cfg.ego_speed);
        if (ego_speed < target_speed) {
          ego_speed = std::min(target_speed, ego_speed + cfg.a_max * dt);
        } else {
          ego_speed = std::max(target_speed, ego_speed - cfg.a_max * dt);
        }
      } else {
        ego_speed = std::max(0.0, ego_speed - cfg.a_max * dt);
      }
      ego_pos.x() += ego_speed * dt;  // eastbound lane
    }

    const auto [vpos, vvel] = violator_state(t);
    const double dist = (vpos - ego_pos).norm();
    result.min_distance = std::min(result.min_distance, dist);
    // Collision: box overlap (both boxes stay axis-aligned in this scene).
    if (std::abs(vpos.x() - ego_pos.x()) < ego_box.extents[1] + violator_box.extents[2] &&
        std::abs(vpos.y() - ego_pos.y()) < ego_box.extents[2] + violator_box.extents[1]) {
      result.collided = true;
    }
    if (grid.cell_at(ego_pos) == ego_goal) reached = true;
  }

  result.ego_reached_goal = reached;
  return result;
}

}  // namespace crossview
