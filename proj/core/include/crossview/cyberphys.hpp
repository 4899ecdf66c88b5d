#pragma once

#include "crossview/geometry.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace crossview {

struct CyberPhysError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// 2D rigid map from geo-local coordinates into the scene frame.
struct GeoTransform {
  double rotation = 0.0;  // radians
  Vec2 translation = Vec2::Zero();
  double residual_rmse = 0.0;

  Vec2 apply(const Vec2& p) const {
    const double c = std::cos(rotation), s = std::sin(rotation);
    return Vec2(c * p.x() - s * p.y(), c * p.y() + s * p.x()) + translation;
  }
};

struct TimedSample {
  double t = 0.0;
  Vec2 position = Vec2::Zero();
};

using Trajectory = std::vector<TimedSample>;  // timestamps strictly increasing

struct EndpointTrajectory {
  std::string endpoint_id;
  Trajectory samples;
};

/// Linear interpolation at time t; empty outside the sample span.
std::optional<Vec2> interpolate(const Trajectory& traj, double t);

/// Closed-form 2D rigid least squares (no scale) mapping geo samples onto
/// scene samples, after interpolating the denser trajectory onto the sparser
/// one's overlapping timestamps. Throws for fewer than 2 overlapping samples
/// or a degenerate (stationary) calibration trajectory.
GeoTransform calibrate_geo_transform(const Trajectory& scene, const Trajectory& geo);

struct EndpointAssociation {
  std::map<int, std::string> track_to_endpoint;
  std::vector<int> unmatched_tracks;
  std::vector<std::string> unmatched_endpoints;
};

struct AssociationConfig {
  std::size_t min_overlap_samples = 10;
  double gate = 3.0;  // meters, on the root of the mean squared distance
};

/// Matches scene tracks to endpoints by mean squared distance between the
/// scene trajectory and the geo-transformed endpoint trajectory over their
/// common time support (interpolating onto the sparser timestamp set).
/// Optimal one-to-one gated assignment.
EndpointAssociation associate_endpoints(const std::map<int, Trajectory>& track_trajectories,
                                        const std::vector<EndpointTrajectory>& endpoints,
                                        const GeoTransform& geo,
                                        const AssociationConfig& cfg = {});

/// CSV rows: endpoint_id,t,x,y (header optional). Samples are grouped by
/// endpoint and must be time-sorted per endpoint.
std::vector<EndpointTrajectory> read_endpoint_csv(std::istream& is);
std::vector<EndpointTrajectory> read_endpoint_csv_file(const std::string& path);

std::string association_to_json(const EndpointAssociation& a);

}  // namespace crossview
