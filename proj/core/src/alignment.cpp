#include "crossview/alignment.hpp"

#include "crossview/kdtree.hpp"
#include "crossview/parallel.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <random>

namespace crossview {

namespace {

Plane fit_plane_least_squares(const std::vector<Vec3>& points,
                              const std::vector<std::size_t>& indices) {
  Vec3 mean = Vec3::Zero();
  for (std::size_t i : indices) mean += points[i];
  mean /= static_cast<double>(indices.size());
  Mat3 cov = Mat3::Zero();
  for (std::size_t i : indices) {
    Vec3 d = points[i] - mean;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  Plane plane;
  plane.normal = eig.eigenvectors().col(0).normalized();  // smallest eigenvalue
  plane.offset = -plane.normal.dot(mean);
  plane.inlier_count = indices.size();
  return plane;
}

}  // namespace

Plane segment_ground_plane(const PointCloud& c, const RansacPlaneConfig& cfg) {
  const auto& pts = c.points;
  if (pts.size() < 3) throw AlignmentError("segment_ground_plane: need at least 3 points");

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);

  std::size_t best_count = 0;
  Vec3 best_normal = Vec3::Zero();
  double best_offset = 0.0;
  for (int it = 0; it < cfg.iterations; ++it) {
    std::size_t a = pick(rng), b = pick(rng), d = pick(rng);
    if (a == b || a == d || b == d) continue;
    Vec3 n = (pts[b] - pts[a]).cross(pts[d] - pts[a]);
    double norm = n.norm();
    if (norm < 1e-12) continue;  // collinear sample
    n /= norm;
    double offset = -n.dot(pts[a]);
    std::size_t count = 0;
    for (const Vec3& p : pts) {
      if (std::abs(n.dot(p) + offset) <= cfg.inlier_threshold) ++count;
    }
    if (count > best_count) {
      best_count = count;
      best_normal = n;
      best_offset = offset;
    }
  }
  if (best_count < 3) {
    throw AlignmentError("segment_ground_plane: degenerate cloud, no plane found");
  }

  std::vector<std::size_t> inliers;
  inliers.reserve(best_count);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (std::abs(best_normal.dot(pts[i]) + best_offset) <= cfg.inlier_threshold) {
      inliers.push_back(i);
    }
  }
  Plane plane = fit_plane_least_squares(pts, inliers);
  // Orient so the sensor origin sits on the positive side.
  if (plane.offset < 0.0) {
    plane.normal = -plane.normal;
    plane.offset = -plane.offset;
  }
  return plane;
}

GroundAlignment align_to_ground_plane(const PointCloud& c, const Plane& ground) {
  const Vec3 n = ground.normal.normalized();
  const Vec3 z = Vec3::UnitZ();
  if (std::abs(n.dot(z)) < std::cos(deg_to_rad(80.0))) {
    throw AlignmentError("align_to_ground_plane: plane normal within 10 deg of horizontal");
  }

  Mat3 rot;
  const Vec3 axis = n.cross(z);
  const double s = axis.norm();
  const double cos_angle = n.dot(z);
  if (s < 1e-12) {
    rot = cos_angle > 0.0 ? Mat3::Identity()
                          : Eigen::AngleAxisd(M_PI, Vec3::UnitX()).toRotationMatrix();
  } else {
    rot = Eigen::AngleAxisd(std::atan2(s, cos_angle), axis / s).toRotationMatrix();
  }

  GroundAlignment out;
  out.transform.rotation = rot;
  out.transform.translation = Vec3(0.0, 0.0, ground.offset);
  out.cloud = apply_transform(out.transform, c);
  out.height = ground.offset;
  out.roll = std::atan2(-rot(1, 2), rot(1, 1));
  out.pitch = std::atan2(-rot(2, 0), rot(2, 2));
  return out;
}

YawEstimate estimate_yaw_pair(const PointCloud& c1, const PointCloud& c2, double ground_distance,
                              const YawSearchConfig& cfg) {
  if (c1.empty() || c2.empty()) throw EmptyCloudError("estimate_yaw_pair: empty cloud");
  const PointCloud s1 = subsample(c1, cfg.max_points);
  const PointCloud s2 = subsample(c2, cfg.max_points);

  std::vector<double> grid;
  for (double a = 0.0; a < 2.0 * M_PI - 0.5 * cfg.step; a += cfg.step) grid.push_back(a);
  const std::size_t n = grid.size();
  const Vec3 pivot2(ground_distance, 0.0, 0.0);

  // objective[i1 * n + i2] = cloud distance with c1 yawed by grid[i1] about
  // the origin and c2 yawed by grid[i2] about its base.
  std::vector<double> objective(n * n, 0.0);
  parallel_for(n, [&](std::size_t i2) {
    const RigidTransform r2 = RigidTransform::yaw_about(grid[i2], pivot2);
    KdTree tree(apply_transform(r2, s2));
    for (std::size_t i1 = 0; i1 < n; ++i1) {
      const RigidTransform r1 = RigidTransform::from_yaw(grid[i1]);
      double sum = 0.0;
      for (const Vec3& p : s1.points) sum += tree.nearest(r1.apply(p)).distance;
      objective[i1 * n + i2] = sum / static_cast<double>(s1.points.size());
    }
  });

  // Lexicographic scan; a candidate must beat the incumbent by more than a
  // relative epsilon, so floating-point near-ties resolve to the smallest
  // (yaw1, yaw2) pair.
  YawEstimate best;
  best.distance = std::numeric_limits<double>::infinity();
  for (std::size_t i1 = 0; i1 < n; ++i1) {
    for (std::size_t i2 = 0; i2 < n; ++i2) {
      const double d = objective[i1 * n + i2];
      if (!std::isfinite(best.distance) || d < best.distance - 1e-9 * (1.0 + best.distance)) {
        best.distance = d;
        best.yaw1 = grid[i1];
        best.yaw2 = grid[i2];
      }
    }
  }
  return best;
}

InitialGuess initial_guess(const AlignmentInput& input, const RansacPlaneConfig& plane_cfg,
                           const YawSearchConfig& yaw_cfg) {
  const std::size_t n = input.clouds.size();
  if (n < 2) throw AlignmentError("initial_guess: need at least 2 clouds");
  if (input.ground_distances.size() != n - 1) {
    throw AlignmentError("initial_guess: ground_distances must have clouds-1 entries");
  }
  for (double d : input.ground_distances) {
    if (!(d > 0.0)) throw AlignmentError("initial_guess: ground distances must be positive");
  }

  InitialGuess out;
  out.guesses.resize(n);
  out.heights.resize(n, 0.0);
  out.rolls.resize(n, 0.0);
  out.pitches.resize(n, 0.0);
  out.yaws.resize(n, 0.0);

  GroundAlignment ref;
  try {
    ref = align_to_ground_plane(input.clouds[0], segment_ground_plane(input.clouds[0], plane_cfg));
  } catch (const AlignmentError& e) {
    throw AlignmentError("sensor 0: " + std::string(e.what()));
  }
  out.guesses[0] = RigidTransform::identity();
  out.heights[0] = ref.height;
  out.rolls[0] = ref.roll;
  out.pitches[0] = ref.pitch;
  out.reference_levelling = ref.transform;
  const RigidTransform ref_unlevel = ref.transform.inverse();

  for (std::size_t i = 1; i < n; ++i) {
    const double d = input.ground_distances[i - 1];
    GroundAlignment ga;
    try {
      ga = align_to_ground_plane(input.clouds[i],
                                 segment_ground_plane(input.clouds[i], plane_cfg));
    } catch (const AlignmentError& e) {
      throw AlignmentError("sensor " + std::to_string(i) + ": " + std::string(e.what()));
    }
    const RigidTransform displace = RigidTransform::from_translation(Vec3(d, 0.0, 0.0));
    const PointCloud displaced = apply_transform(displace, ga.cloud);
    const YawEstimate yaw = estimate_yaw_pair(ref.cloud, displaced, d, yaw_cfg);

    // Map levelled sensor-i coordinates into the reference's levelled frame:
    // x_ref = Rz(-yaw1) * (Rz(yaw2) * x_i + (d, 0, 0)).
    RigidTransform lvl;
    lvl.rotation = RigidTransform::from_yaw(yaw.yaw2 - yaw.yaw1).rotation;
    lvl.translation = RigidTransform::from_yaw(-yaw.yaw1).rotation * Vec3(d, 0.0, 0.0);

    out.guesses[i] = ref_unlevel.compose(lvl).compose(ga.transform);
    out.heights[i] = ga.height;
    out.rolls[i] = ga.roll;
    out.pitches[i] = ga.pitch;
    out.yaws[i] = wrap_angle(yaw.yaw2 - yaw.yaw1);
  }
  return out;
}

RigidTransform estimate_rigid_transform(const std::vector<Vec3>& source,
                                        const std::vector<Vec3>& target) {
  if (source.size() != target.size() || source.size() < 3) {
    throw AlignmentError("estimate_rigid_transform: need >= 3 paired points");
  }
  Vec3 ms = Vec3::Zero(), mt = Vec3::Zero();
  for (std::size_t i = 0; i < source.size(); ++i) {
    ms += source[i];
    mt += target[i];
  }
  ms /= static_cast<double>(source.size());
  mt /= static_cast<double>(target.size());

  Mat3 cross = Mat3::Zero();
  for (std::size_t i = 0; i < source.size(); ++i) {
    cross += (source[i] - ms) * (target[i] - mt).transpose();
  }
  Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU(), v = svd.matrixV();
  Mat3 flip = Mat3::Identity();
  if ((v * u.transpose()).determinant() < 0.0) flip(2, 2) = -1.0;

  RigidTransform t;
  t.rotation = v * flip * u.transpose();
  t.translation = mt - t.rotation * ms;
  return t;
}

IcpResult icp_refine(const PointCloud& source, const PointCloud& target,
                     const RigidTransform& guess, const IcpConfig& cfg) {
  if (source.empty() || target.empty()) throw EmptyCloudError("icp_refine: empty cloud");

  const PointCloud src =
      cfg.max_source_points > 0 ? subsample(source, cfg.max_source_points) : source;
  KdTree tree(target);

  IcpResult result;
  result.transform = guess;
  double prev_mse = std::numeric_limits<double>::infinity();

  std::vector<Vec3> moved(src.points.size());
  std::vector<Vec3> matched_src, matched_tgt;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    for (std::size_t i = 0; i < src.points.size(); ++i) {
      moved[i] = result.transform.apply(src.points[i]);
    }
    matched_src.clear();
    matched_tgt.clear();
    double mse_before = 0.0;
    for (const Vec3& p : moved) {
      const KdTree::Neighbor nn = tree.nearest(p);
      if (nn.distance <= cfg.max_correspondence_distance) {
        matched_src.push_back(p);
        matched_tgt.push_back(tree.point(nn.index));
        mse_before += nn.distance * nn.distance;
      }
    }
    if (matched_src.size() < 3) {
      throw AlignmentError("icp_refine: iteration " + std::to_string(it) + " found only " +
                           std::to_string(matched_src.size()) +
                           " correspondences within max distance");
    }
    mse_before /= static_cast<double>(matched_src.size());

    const RigidTransform delta = estimate_rigid_transform(matched_src, matched_tgt);
    double mse_after = 0.0;
    for (std::size_t i = 0; i < matched_src.size(); ++i) {
      mse_after += (delta.apply(matched_src[i]) - matched_tgt[i]).squaredNorm();
    }
    mse_after /= static_cast<double>(matched_src.size());

    result.transform = delta.compose(result.transform);
    result.trace.push_back({mse_before, mse_after, matched_src.size()});
    result.iterations = it + 1;
    result.rmse = std::sqrt(mse_after);

    const double step_norm = std::sqrt((delta.rotation - Mat3::Identity()).squaredNorm() +
                                       delta.translation.squaredNorm());
    const double mse_delta =
        std::isfinite(prev_mse) ? std::abs(prev_mse - mse_after) : std::abs(mse_before - mse_after);
    if (step_norm < cfg.transform_epsilon || mse_delta < cfg.mse_epsilon) {
      result.converged = true;
      break;
    }
    prev_mse = mse_after;
  }
  return result;
}

AlignmentResult align_all(const AlignmentInput& input, const IcpConfig& cfg,
                          const RansacPlaneConfig& plane_cfg, const YawSearchConfig& yaw_cfg) {
  const InitialGuess guess = initial_guess(input, plane_cfg, yaw_cfg);
  const std::size_t n = input.clouds.size();

  AlignmentResult result;
  result.transforms.assign(n, RigidTransform::identity());
  result.residual_rmse.assign(n, 0.0);
  result.converged.assign(n, false);
  result.failures.assign(n, "");
  result.converged[0] = true;
  result.reference_levelling = guess.reference_levelling;

  // Coarse-to-fine correspondence caps. The loose stage absorbs the yaw-grid
  // quantization of the base direction (up to d * sin(step/2) of translation
  // error at baseline d); tightening the cap then sheds the biased pairings
  // that arise between two different samplings of the same surfaces.
  IcpConfig coarse = cfg;
  coarse.max_correspondence_distance = std::max(cfg.max_correspondence_distance, 3.0);
  coarse.max_iterations = std::max(cfg.max_iterations / 2, 10);
  IcpConfig mid = coarse;
  mid.max_correspondence_distance = std::max(cfg.max_correspondence_distance, 1.0);

  for (std::size_t i = 1; i < n; ++i) {
    try {
      RigidTransform current = guess.guesses[i];
      current = icp_refine(input.clouds[i], input.clouds[0], current, coarse).transform;
      if (mid.max_correspondence_distance < coarse.max_correspondence_distance) {
        current = icp_refine(input.clouds[i], input.clouds[0], current, mid).transform;
      }
      const IcpResult icp = icp_refine(input.clouds[i], input.clouds[0], current, cfg);
      result.transforms[i] = icp.transform;
      result.residual_rmse[i] = icp.rmse;
      result.converged[i] = icp.converged;
    } catch (const AlignmentError& e) {
      result.transforms[i] = guess.guesses[i];
      result.residual_rmse[i] = std::numeric_limits<double>::quiet_NaN();
      result.failures[i] = e.what();
    }
  }
  return result;
}

std::string alignment_to_json(const AlignmentResult& result, const IcpConfig& cfg) {
  nlohmann::json j;
  j["config"] = {{"max_iterations", cfg.max_iterations},
                 {"max_correspondence_distance", cfg.max_correspondence_distance},
                 {"transform_epsilon", cfg.transform_epsilon},
                 {"mse_epsilon", cfg.mse_epsilon},
                 {"max_source_points", cfg.max_source_points}};
  nlohmann::json sensors = nlohmann::json::array();
  for (std::size_t i = 0; i < result.transforms.size(); ++i) {
    const RigidTransform& t = result.transforms[i];
    std::vector<double> rot;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) rot.push_back(t.rotation(r, c));
    }
    sensors.push_back({{"sensor", i},
                       {"rotation_row_major", rot},
                       {"translation", {t.translation.x(), t.translation.y(), t.translation.z()}},
                       {"residual_rmse", result.residual_rmse[i]},
                       {"converged", static_cast<bool>(result.converged[i])},
                       {"failure", result.failures[i]}});
  }
  j["transforms"] = sensors;
  {
    const RigidTransform& t = result.reference_levelling;
    std::vector<double> rot;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) rot.push_back(t.rotation(r, c));
    }
    j["reference_levelling"] = {
        {"rotation_row_major", rot},
        {"translation", {t.translation.x(), t.translation.y(), t.translation.z()}}};
  }
  return j.dump(2);
}

namespace {

RigidTransform transform_from_json(const nlohmann::json& j) {
  RigidTransform t;
  const auto& rot = j.at("rotation_row_major");
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) t.rotation(r, c) = rot.at(r * 3 + c).get<double>();
  }
  const auto& tr = j.at("translation");
  t.translation = Vec3(tr.at(0).get<double>(), tr.at(1).get<double>(), tr.at(2).get<double>());
  return t;
}

}  // namespace

AlignmentResult alignment_from_json(const std::string& json_text) {
  const nlohmann::json j = nlohmann::json::parse(json_text);
  AlignmentResult result;
  for (const auto& s : j.at("transforms")) {
    result.transforms.push_back(transform_from_json(s));
    result.residual_rmse.push_back(s.at("residual_rmse").is_null()
                                       ? std::numeric_limits<double>::quiet_NaN()
                                       : s.at("residual_rmse").get<double>());
    result.converged.push_back(s.at("converged").get<bool>());
    result.failures.push_back(s.value("failure", ""));
  }
  if (j.contains("reference_levelling")) {
    result.reference_levelling = transform_from_json(j.at("reference_levelling"));
  }
  return result;
}

}  // namespace crossview
