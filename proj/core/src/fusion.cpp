#include "crossview/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace crossview {

const SensorBackground& BackgroundModel::for_sensor(int id) const {
  auto it = sensors.find(id);
  if (it == sensors.end()) {
    throw FusionError("background model has no entry for sensor " + std::to_string(id));
  }
  return it->second;
}

PointCloud build_background(const std::vector<std::vector<PointCloud>>& batches,
                            const BackgroundConfig& cfg) {
  if (batches.empty()) throw FusionError("build_background: no batches");
  int sensor_id = 0;
  bool sensor_set = false;
  for (const auto& batch : batches) {
    if (batch.size() < 2) throw FusionError("build_background: each batch needs >= 2 frames");
    for (const PointCloud& f : batch) {
      if (!sensor_set) {
        sensor_id = f.sensor_id;
        sensor_set = true;
      } else if (f.sensor_id != sensor_id) {
        throw FusionError("build_background: mismatched sensor ids in batches");
      }
    }
  }

  PointCloud background;
  background.sensor_id = sensor_id;

  std::vector<Vec3> accepted;
  for (const auto& batch : batches) {
    std::vector<KdTree> others;
    others.reserve(batch.size() - 1);
    for (std::size_t i = 1; i < batch.size(); ++i) others.emplace_back(batch[i]);

    for (const Vec3& p : batch[0].points) {
      bool in_all = true;
      for (const KdTree& t : others) {
        if (!t.has_neighbor_within(p, cfg.match_radius)) {
          in_all = false;
          break;
        }
      }
      if (in_all) accepted.push_back(p);
    }
  }

  // Deduplicate the union with a voxel grid at half the match radius; greedy
  // in input order so output is deterministic. 21 bits per axis keep the
  // packed key collision-free out to ~50 km at a 5 cm cell.
  const double cell = 0.5 * cfg.match_radius;
  std::unordered_set<std::uint64_t> occupied;
  occupied.reserve(accepted.size());
  for (const Vec3& p : accepted) {
    const auto qx = static_cast<std::uint64_t>(
        static_cast<std::int64_t>(std::floor(p.x() / cell)) & 0x1FFFFF);
    const auto qy = static_cast<std::uint64_t>(
        static_cast<std::int64_t>(std::floor(p.y() / cell)) & 0x1FFFFF);
    const auto qz = static_cast<std::uint64_t>(
        static_cast<std::int64_t>(std::floor(p.z() / cell)) & 0x1FFFFF);
    const std::uint64_t key = qx | (qy << 21) | (qz << 42);
    if (occupied.insert(key).second) background.points.push_back(p);
  }
  return background;
}

BackgroundModel build_background_model(
    const std::map<int, std::vector<std::vector<PointCloud>>>& batches_per_sensor,
    const BackgroundConfig& cfg) {
  BackgroundModel model;
  model.config = cfg;
  for (const auto& [sensor_id, batches] : batches_per_sensor) {
    SensorBackground bg;
    bg.sensor_id = sensor_id;
    bg.cloud = build_background(batches);
    bg.cloud.sensor_id = sensor_id;
    bg.index = std::make_shared<KdTree>(bg.cloud);
    if (!batches.empty() && !batches[0].empty() && batches[0][0].organization) {
      bg.lattice = batches[0][0].organization;
    }
    model.sensors.emplace(sensor_id, std::move(bg));
  }
  return model;
}

PointCloud subtract_background(const PointCloud& frame, const SensorBackground& bg,
                               double match_radius, SubtractionStats* stats) {
  PointCloud residual;
  residual.timestamp = frame.timestamp;
  residual.sensor_id = frame.sensor_id;
  if (stats) stats->points_in += frame.points.size();

  if (bg.cloud.empty()) {
    residual.points = frame.points;
    if (stats) stats->points_out += residual.points.size();
    return residual;
  }
  KdTree local;
  const KdTree* tree = bg.index.get();
  if (!tree) {
    local = KdTree(bg.cloud);
    tree = &local;
  }
  for (const Vec3& p : frame.points) {
    SearchStats search;
    const bool matched = tree->has_neighbor_within(p, match_radius, &search);
    if (stats) stats->comparisons += search.distance_evaluations;
    if (!matched) residual.points.push_back(p);
  }
  if (stats) stats->points_out += residual.points.size();
  return residual;
}

PointCloud subtract_background_organized(const PointCloud& frame, const SensorBackground& bg,
                                         double range_tolerance, SubtractionStats* stats) {
  if (!frame.organization) {
    throw FusionError("subtract_background_organized: frame is not organized");
  }
  if (!bg.lattice) {
    throw FusionError("subtract_background_organized: background has no beam lattice");
  }
  const Organization& org = *frame.organization;
  const Organization& lat = *bg.lattice;
  if (org.beam_count != lat.beam_count || org.azimuth_count != lat.azimuth_count) {
    throw FusionError("subtract_background_organized: beam lattice mismatch");
  }

  PointCloud residual;
  residual.timestamp = frame.timestamp;
  residual.sensor_id = frame.sensor_id;
  if (stats) stats->points_in += frame.points.size();

  for (std::size_t i = 0; i < frame.points.size(); ++i) {
    const std::size_t cell = org.cell(org.beam_index[i], org.azimuth_index[i]);
    if (stats) ++stats->comparisons;
    const bool foreground =
        !lat.has_return[cell] || std::abs(org.ranges[cell] - lat.ranges[cell]) > range_tolerance;
    if (foreground) residual.points.push_back(frame.points[i]);
  }
  if (stats) stats->points_out += residual.points.size();
  return residual;
}

FusedFrame stitch(const std::map<int, PointCloud>& residuals, const AlignmentResult& transforms,
                  StitchStats* stats) {
  FusedFrame fused;
  bool stamped = false;
  for (const auto& [sensor_id, cloud] : residuals) {  // std::map: ascending sensor id
    if (sensor_id < 0 || static_cast<std::size_t>(sensor_id) >= transforms.transforms.size()) {
      throw FusionError("stitch: no transform for sensor " + std::to_string(sensor_id));
    }
    if (!stamped) {
      fused.timestamp = cloud.timestamp;
      stamped = true;
    }
    const RigidTransform& t = transforms.transforms[static_cast<std::size_t>(sensor_id)];
    for (const Vec3& p : cloud.points) fused.points.points.push_back(t.apply(p));
    fused.source_counts[sensor_id] = cloud.points.size();
    if (stats) stats->points_transformed += cloud.points.size();
  }
  fused.points.timestamp = fused.timestamp;
  return fused;
}

}  // namespace crossview
