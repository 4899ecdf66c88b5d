#include "crossview/tracking.hpp"

#include "crossview/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace crossview {

void kalman_predict(KalmanState& ks, double dt, double accel_sigma) {
  Eigen::Matrix4d f = Eigen::Matrix4d::Identity();
  f(0, 2) = dt;
  f(1, 3) = dt;

  const double q2 = accel_sigma * accel_sigma;
  const double dt2 = dt * dt, dt3 = dt2 * dt, dt4 = dt3 * dt;
  Eigen::Matrix4d q = Eigen::Matrix4d::Zero();
  q(0, 0) = q(1, 1) = 0.25 * dt4 * q2;
  q(0, 2) = q(2, 0) = q(1, 3) = q(3, 1) = 0.5 * dt3 * q2;
  q(2, 2) = q(3, 3) = dt2 * q2;

  ks.state = f * ks.state;
  ks.covariance = f * ks.covariance * f.transpose() + q;
}

void kalman_update(KalmanState& ks, const Vec2& measured_xy, double measurement_sigma) {
  Eigen::Matrix<double, 2, 4> h = Eigen::Matrix<double, 2, 4>::Zero();
  h(0, 0) = 1.0;
  h(1, 1) = 1.0;
  const Mat2 r = Mat2::Identity() * (measurement_sigma * measurement_sigma);

  const Vec2 innovation = measured_xy - h * ks.state;
  const Mat2 s = h * ks.covariance * h.transpose() + r;
  const Eigen::Matrix<double, 4, 2> k = ks.covariance * h.transpose() * s.inverse();

  ks.state += k * innovation;
  const Eigen::Matrix4d ikh = Eigen::Matrix4d::Identity() - k * h;
  ks.covariance = ikh * ks.covariance * ikh.transpose() + k * r * k.transpose();
  ks.covariance = 0.5 * (ks.covariance + ks.covariance.transpose());
}

Assignment associate(const std::vector<Vec2>& predicted, const std::vector<Vec2>& detections,
                     double gate) {
  const std::size_t rows = predicted.size(), cols = detections.size();
  std::vector<double> cost(rows * cols, kInfeasible);
  const double gate2 = gate * gate;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double d2 = (predicted[r] - detections[c]).squaredNorm();
      if (d2 <= gate2) cost[r * cols + c] = d2;
    }
  }
  return solve_assignment(cost, rows, cols, gate2);
}

namespace {

Vec2 box_centroid_2d(const OrientedBoundingBox& box) { return box.centroid.head<2>(); }

/// Picks the box horizontal axis direction most aligned with `motion`.
Vec2 snap_to_box_axis(const OrientedBoundingBox& box, const Vec2& motion) {
  const Vec2 candidates[4] = {box.axes[1].head<2>(), -box.axes[1].head<2>(),
                              box.axes[2].head<2>(), -box.axes[2].head<2>()};
  double best = -std::numeric_limits<double>::infinity();
  Vec2 pick = candidates[0];
  for (const Vec2& c : candidates) {
    const double score = c.dot(motion);
    if (score > best) {
      best = score;
      pick = c;
    }
  }
  return pick.normalized();
}

}  // namespace

std::optional<double> estimate_speed(const Track& track, int w, double frame_period) {
  const auto& hist = track.box_history;
  if (hist.size() <= static_cast<std::size_t>(w)) return std::nullopt;
  const Vec3 now = hist.back().box.centroid;
  const Vec3 then = hist[hist.size() - 1 - static_cast<std::size_t>(w)].box.centroid;
  return (now - then).norm() / (static_cast<double>(w) * frame_period);
}

std::optional<Vec2> estimate_heading_strawman(const Track& track) {
  const auto& hist = track.box_history;
  if (hist.size() < 2) return std::nullopt;
  const Vec2 delta =
      box_centroid_2d(hist.back().box) - box_centroid_2d(hist[hist.size() - 2].box);
  if (delta.norm() < 1e-3) return std::nullopt;
  return snap_to_box_axis(hist.back().box, delta);
}

std::optional<HeadingEstimate> estimate_heading_icp(const Track& track, const IcpConfig& cfg) {
  const auto& hist = track.box_history;
  if (hist.size() < 2) return std::nullopt;
  const PointCloud& prev = hist[hist.size() - 2].cluster.points;
  const PointCloud& cur = hist.back().cluster.points;
  if (prev.empty() || cur.empty()) return std::nullopt;

  try {
    const IcpResult icp = icp_refine(prev, cur, RigidTransform::identity(), cfg);
    const Vec3 prev_centroid = centroid(prev);
    PointCloud moved = apply_transform(icp.transform, prev);
    const Vec3 delta3 = centroid(moved) - prev_centroid;
    const Vec2 delta = delta3.head<2>();
    if (delta.norm() < 1e-3) return std::nullopt;
    return HeadingEstimate{snap_to_box_axis(hist.back().box, delta), false};
  } catch (const AlignmentError&) {
    const auto fallback = estimate_heading_strawman(track);
    if (!fallback) return std::nullopt;
    return HeadingEstimate{*fallback, true};
  }
}

std::optional<MotionVector> estimate_motion_vector(const Track& track, int w,
                                                   double frame_period) {
  const auto& headings = track.heading_history;
  if (headings.size() < static_cast<std::size_t>(w) || w <= 0) return std::nullopt;
  const auto speed = estimate_speed(track, w, frame_period);
  if (!speed) return std::nullopt;

  Vec2 mean = Vec2::Zero();
  for (std::size_t i = headings.size() - static_cast<std::size_t>(w); i < headings.size(); ++i) {
    mean += headings[i];
  }
  mean /= static_cast<double>(w);

  MotionVector mv;
  mv.speed = *speed;
  mv.low_confidence = mean.norm() < 0.5;
  mv.direction = mean.norm() > 1e-9 ? Vec2(mean.normalized()) : Vec2::UnitX();
  return mv;
}

std::vector<Vec2> Tracker::predict(double dt) {
  std::vector<Vec2> out;
  out.reserve(tracks_.size());
  for (Track& t : tracks_) {
    kalman_predict(t.kalman, dt, cfg_.process_accel_sigma);
    out.push_back(t.predicted_position());
  }
  return out;
}

void Tracker::update(const std::vector<std::pair<OrientedBoundingBox, Cluster>>& detections,
                     double timestamp, TrackerTimings* timings) {
  const auto t_begin = std::chrono::steady_clock::now();
  const double dt = last_timestamp_ ? timestamp - *last_timestamp_ : cfg_.frame_period;
  last_timestamp_ = timestamp;

  const std::vector<Vec2> predicted = predict(dt);
  std::vector<Vec2> observed;
  observed.reserve(detections.size());
  for (const auto& [box, cluster] : detections) observed.push_back(box_centroid_2d(box));

  const Assignment assignment = associate(predicted, observed, cfg_.gate);

  const std::size_t history_cap =
      static_cast<std::size_t>(std::max(cfg_.window + 1, 16));

  for (const auto& [row, col] : assignment.matches) {
    Track& track = tracks_[row];
    const auto& [box, cluster] = detections[col];

    kalman_update(track.kalman, observed[col], cfg_.measurement_sigma);
    track.box_history.push_back({timestamp, box, cluster});
    if (track.box_history.size() > history_cap) track.box_history.pop_front();
    track.hits += 1;
    track.misses = 0;
    if (track.status == TrackStatus::kTentative && track.hits >= cfg_.confirm_hits) {
      track.status = TrackStatus::kConfirmed;
    }
  }

  // Heading ICP is a pure function of the two most recent clusters; run the
  // matched tracks on workers and merge in track order.
  const auto t_heading_begin = std::chrono::steady_clock::now();
  std::vector<std::size_t> heading_rows;
  for (const auto& [row, col] : assignment.matches) {
    (void)col;
    if (tracks_[row].box_history.size() >= 2) heading_rows.push_back(row);
  }
  std::vector<std::optional<HeadingEstimate>> estimates(heading_rows.size());
  parallel_for(heading_rows.size(), [&](std::size_t k) {
    estimates[k] = estimate_heading_icp(tracks_[heading_rows[k]], cfg_.heading_icp);
  });
  for (std::size_t k = 0; k < heading_rows.size(); ++k) {
    Track& track = tracks_[heading_rows[k]];
    track.last_heading = estimates[k];
    if (estimates[k]) {
      track.heading_history.push_back(estimates[k]->direction);
      if (track.heading_history.size() > history_cap) track.heading_history.pop_front();
    }
  }

  const auto t_heading_end = std::chrono::steady_clock::now();

  for (std::size_t row : assignment.unmatched_rows) {
    Track& track = tracks_[row];
    track.misses += 1;
    track.last_heading.reset();
    if (track.misses > cfg_.max_misses) track.status = TrackStatus::kDead;
  }

  for (std::size_t col : assignment.unmatched_cols) {
    const auto& [box, cluster] = detections[col];
    Track track;
    track.track_id = next_track_id_++;
    track.hits = 1;  // the spawning detection counts
    track.kalman.state << box.centroid.x(), box.centroid.y(), 0.0, 0.0;
    track.kalman.covariance = Eigen::Matrix4d::Zero();
    track.kalman.covariance(0, 0) = track.kalman.covariance(1, 1) = cfg_.initial_position_var;
    track.kalman.covariance(2, 2) = track.kalman.covariance(3, 3) = cfg_.initial_velocity_var;
    track.box_history.push_back({timestamp, box, cluster});
    tracks_.push_back(std::move(track));
  }

  std::erase_if(tracks_, [](const Track& t) { return t.status == TrackStatus::kDead; });

  if (timings) {
    const auto t_end = std::chrono::steady_clock::now();
    const double heading =
        std::chrono::duration<double>(t_heading_end - t_heading_begin).count();
    timings->heading_seconds += heading;
    timings->tracking_seconds +=
        std::chrono::duration<double>(t_end - t_begin).count() - heading;
  }
}

std::vector<const Track*> Tracker::confirmed() const {
  std::vector<const Track*> out;
  for (const Track& t : tracks_) {
    if (t.status == TrackStatus::kConfirmed) out.push_back(&t);
  }
  return out;
}

}  // namespace crossview
