#include "crossview/cyberphys.hpp"

#include "crossview/assignment.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace crossview {

std::optional<Vec2> interpolate(const Trajectory& traj, double t) {
  if (traj.empty() || t < traj.front().t || t > traj.back().t) return std::nullopt;
  auto it = std::lower_bound(traj.begin(), traj.end(), t,
                             [](const TimedSample& s, double v) { return s.t < v; });
  if (it == traj.begin()) return it->position;
  const TimedSample& hi = *it;
  const TimedSample& lo = *(it - 1);
  if (hi.t == lo.t) return lo.position;
  const double a = (t - lo.t) / (hi.t - lo.t);
  return lo.position * (1.0 - a) + hi.position * a;
}

namespace {

/// Pairs of (scene, geo) positions at common timestamps, interpolated onto
/// the sparser trajectory's support.
std::vector<std::pair<Vec2, Vec2>> paired_samples(const Trajectory& scene,
                                                  const Trajectory& geo) {
  const Trajectory& base = scene.size() <= geo.size() ? scene : geo;
  const bool base_is_scene = scene.size() <= geo.size();
  const Trajectory& other = base_is_scene ? geo : scene;

  std::vector<std::pair<Vec2, Vec2>> pairs;
  for (const TimedSample& s : base) {
    const auto q = interpolate(other, s.t);
    if (!q) continue;
    if (base_is_scene) {
      pairs.push_back({s.position, *q});
    } else {
      pairs.push_back({*q, s.position});
    }
  }
  return pairs;
}

}  // namespace

GeoTransform calibrate_geo_transform(const Trajectory& scene, const Trajectory& geo) {
  const auto pairs = paired_samples(scene, geo);
  if (pairs.size() < 2) {
    throw CyberPhysError("calibrate_geo_transform: need >= 2 time-overlapping samples");
  }

  Vec2 mean_scene = Vec2::Zero(), mean_geo = Vec2::Zero();
  for (const auto& [s, g] : pairs) {
    mean_scene += s;
    mean_geo += g;
  }
  mean_scene /= static_cast<double>(pairs.size());
  mean_geo /= static_cast<double>(pairs.size());

  // 2D Umeyama without scale: rotation from the cross-covariance angle.
  double sxx = 0.0, sxy = 0.0, syx = 0.0, syy = 0.0;
  double spread = 0.0;
  for (const auto& [s, g] : pairs) {
    const Vec2 a = g - mean_geo;    // source
    const Vec2 b = s - mean_scene;  // target
    sxx += a.x() * b.x();
    sxy += a.x() * b.y();
    syx += a.y() * b.x();
    syy += a.y() * b.y();
    spread += a.squaredNorm();
  }
  if (spread < 1e-9) {
    throw CyberPhysError("calibrate_geo_transform: stationary calibration trajectory");
  }

  GeoTransform t;
  t.rotation = std::atan2(sxy - syx, sxx + syy);
  const double c = std::cos(t.rotation), s = std::sin(t.rotation);
  t.translation = mean_scene - Vec2(c * mean_geo.x() - s * mean_geo.y(),
                                    s * mean_geo.x() + c * mean_geo.y());

  double sq = 0.0;
  for (const auto& [sc, ge] : pairs) sq += (t.apply(ge) - sc).squaredNorm();
  t.residual_rmse = std::sqrt(sq / static_cast<double>(pairs.size()));
  return t;
}

EndpointAssociation associate_endpoints(const std::map<int, Trajectory>& track_trajectories,
                                        const std::vector<EndpointTrajectory>& endpoints,
                                        const GeoTransform& geo, const AssociationConfig& cfg) {
  std::vector<int> track_ids;
  for (const auto& [id, traj] : track_trajectories) track_ids.push_back(id);

  // Endpoint trajectories mapped into the scene frame once.
  std::vector<Trajectory> scene_endpoints(endpoints.size());
  for (std::size_t e = 0; e < endpoints.size(); ++e) {
    for (const TimedSample& s : endpoints[e].samples) {
      scene_endpoints[e].push_back({s.t, geo.apply(s.position)});
    }
  }

  const std::size_t rows = track_ids.size(), cols = endpoints.size();
  std::vector<double> cost(rows * cols, kInfeasible);
  const double gate2 = cfg.gate * cfg.gate;
  for (std::size_t r = 0; r < rows; ++r) {
    const Trajectory& track = track_trajectories.at(track_ids[r]);
    for (std::size_t c = 0; c < cols; ++c) {
      const Trajectory& base =
          track.size() <= scene_endpoints[c].size() ? track : scene_endpoints[c];
      const Trajectory& other =
          track.size() <= scene_endpoints[c].size() ? scene_endpoints[c] : track;
      double sq = 0.0;
      std::size_t count = 0;
      for (const TimedSample& s : base) {
        const auto q = interpolate(other, s.t);
        if (!q) continue;
        sq += (*q - s.position).squaredNorm();
        ++count;
      }
      if (count < cfg.min_overlap_samples) continue;
      const double mean_sq = sq / static_cast<double>(count);
      if (mean_sq <= gate2) cost[r * cols + c] = mean_sq;
    }
  }

  const Assignment sol = solve_assignment(cost, rows, cols, gate2);
  EndpointAssociation out;
  for (const auto& [r, c] : sol.matches) {
    out.track_to_endpoint[track_ids[r]] = endpoints[c].endpoint_id;
  }
  for (std::size_t r : sol.unmatched_rows) out.unmatched_tracks.push_back(track_ids[r]);
  for (std::size_t c : sol.unmatched_cols) out.unmatched_endpoints.push_back(endpoints[c].endpoint_id);
  return out;
}

std::vector<EndpointTrajectory> read_endpoint_csv(std::istream& is) {
  std::map<std::string, Trajectory> by_id;
  std::vector<std::string> order;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string id, ts, xs, ys;
    if (!std::getline(ls, id, ',') || !std::getline(ls, ts, ',') || !std::getline(ls, xs, ',') ||
        !std::getline(ls, ys)) {
      throw CyberPhysError("read_endpoint_csv: malformed row: " + line);
    }
    if (id == "endpoint_id") continue;  // header
    if (!by_id.count(id)) order.push_back(id);
    by_id[id].push_back({std::stod(ts), Vec2(std::stod(xs), std::stod(ys))});
  }
  std::vector<EndpointTrajectory> out;
  for (const std::string& id : order) {
    const Trajectory& traj = by_id[id];
    for (std::size_t i = 1; i < traj.size(); ++i) {
      if (traj[i].t <= traj[i - 1].t) {
        throw CyberPhysError("read_endpoint_csv: timestamps must increase for " + id);
      }
    }
    out.push_back({id, traj});
  }
  return out;
}

std::vector<EndpointTrajectory> read_endpoint_csv_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw CyberPhysError("read_endpoint_csv_file: cannot open " + path);
  return read_endpoint_csv(is);
}

std::string association_to_json(const EndpointAssociation& a) {
  nlohmann::json j;
  nlohmann::json matches = nlohmann::json::object();
  for (const auto& [track, endpoint] : a.track_to_endpoint) {
    matches[std::to_string(track)] = endpoint;
  }
  j["associations"] = matches;
  j["unmatched_tracks"] = a.unmatched_tracks;
  j["unmatched_endpoints"] = a.unmatched_endpoints;
  return j.dump(2);
}

}  // namespace crossview
