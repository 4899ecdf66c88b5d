#include "crossview/assignment.hpp"
#include "crossview/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

namespace crossview {

Metrics compute_metrics(const std::vector<FrameResult>& results,
                        const std::vector<GroundTruthFrame>& truth, double gate) {
  if (truth.empty()) throw PipelineError("compute_metrics: empty ground truth");

  std::map<int, const GroundTruthFrame*> truth_by_frame;
  for (const auto& t : truth) truth_by_frame[t.frame_index] = &t;

  Metrics m;
  std::map<int, int> last_matched_track;  // ground-truth object -> track id
  double position_error_sum = 0.0;
  double heading_error_sum = 0.0;
  std::size_t heading_samples = 0;
  double speed_error_sum = 0.0;
  double speed_rel_sum = 0.0;
  std::size_t speed_samples = 0, speed_rel_samples = 0;

  for (const FrameResult& frame : results) {
    auto it = truth_by_frame.find(frame.frame);
    if (it == truth_by_frame.end()) continue;
    const GroundTruthFrame& gt = *it->second;
    m.ground_truth_total += gt.objects.size();

    const std::size_t rows = gt.objects.size(), cols = frame.tracks.size();
    std::vector<double> cost(rows * cols, kInfeasible);
    const double gate2 = gate * gate;
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        const Vec2 d = gt.objects[r].centroid.head<2>() - frame.tracks[c].centroid.head<2>();
        if (d.squaredNorm() <= gate2) cost[r * cols + c] = d.squaredNorm();
      }
    }
    const Assignment sol = solve_assignment(cost, rows, cols, gate2);

    m.false_negatives += sol.unmatched_rows.size();
    m.false_positives += sol.unmatched_cols.size();

    for (const auto& [r, c] : sol.matches) {
      const GroundTruthObject& obj = gt.objects[r];
      const TrackRecord& track = frame.tracks[c];
      const double dist = (obj.centroid.head<2>() - track.centroid.head<2>()).norm();
      position_error_sum += dist;
      ++m.matched_samples;

      auto last = last_matched_track.find(obj.object_id);
      if (last != last_matched_track.end() && last->second != track.id) ++m.id_switches;
      last_matched_track[obj.object_id] = track.id;

      const double truth_speed = obj.velocity.norm();
      if (track.heading && truth_speed > 0.5) {
        const double truth_angle = std::atan2(obj.velocity.y(), obj.velocity.x());
        const double est_angle = std::atan2(track.heading->y(), track.heading->x());
        heading_error_sum += std::abs(rad_to_deg(wrap_angle(est_angle - truth_angle)));
        ++heading_samples;
      }
      if (track.speed) {
        speed_error_sum += std::abs(*track.speed - truth_speed);
        ++speed_samples;
        if (truth_speed > 0.5) {
          speed_rel_sum += std::abs(*track.speed - truth_speed) / truth_speed;
          ++speed_rel_samples;
        }
      }
    }
  }

  if (m.ground_truth_total > 0) {
    m.mota = 1.0 - static_cast<double>(m.false_negatives + m.false_positives + m.id_switches) /
                       static_cast<double>(m.ground_truth_total);
  }
  m.motp = m.matched_samples ? position_error_sum / static_cast<double>(m.matched_samples) : 0.0;
  m.positioning_error = m.motp;
  m.heading_error_deg =
      heading_samples ? heading_error_sum / static_cast<double>(heading_samples) : 0.0;
  m.speed_error = speed_samples ? speed_error_sum / static_cast<double>(speed_samples) : 0.0;
  m.speed_error_rel_pct =
      speed_rel_samples ? 100.0 * speed_rel_sum / static_cast<double>(speed_rel_samples) : 0.0;
  return m;
}

// ---------------------------------------------------------------------------
// JSONL
// ---------------------------------------------------------------------------

void write_results_jsonl(std::ostream& os, const std::vector<FrameResult>& results) {
  for (const FrameResult& frame : results) {
    nlohmann::json j;
    j["frame"] = frame.frame;
    j["timestamp"] = frame.timestamp;
    j["tracks"] = nlohmann::json::array();
    for (const TrackRecord& t : frame.tracks) {
      nlohmann::json jt;
      jt["id"] = t.id;
      jt["centroid"] = {t.centroid.x(), t.centroid.y(), t.centroid.z()};
      nlohmann::json axes = nlohmann::json::array();
      for (const Vec3& a : t.box.axes) axes.push_back({a.x(), a.y(), a.z()});
      jt["box"] = {{"axes", axes},
                   {"extents", {t.box.extents.x(), t.box.extents.y(), t.box.extents.z()}}};
      if (t.heading) jt["heading"] = {t.heading->x(), t.heading->y()};
      if (t.speed) jt["speed"] = *t.speed;
      if (t.motion) {
        jt["motion_vector"] = {{"direction", {t.motion->direction.x(), t.motion->direction.y()}},
                               {"speed", t.motion->speed}};
      }
      j["tracks"].push_back(jt);
    }
    os << j.dump() << '\n';
  }
}

std::vector<FrameResult> read_results_jsonl(std::istream& is) {
  std::vector<FrameResult> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    FrameResult frame;
    frame.frame = j.at("frame").get<int>();
    frame.timestamp = j.at("timestamp").get<double>();
    for (const auto& jt : j.at("tracks")) {
      TrackRecord t;
      t.id = jt.at("id").get<int>();
      t.centroid = Vec3(jt.at("centroid")[0].get<double>(), jt.at("centroid")[1].get<double>(),
                        jt.at("centroid")[2].get<double>());
      const auto& axes = jt.at("box").at("axes");
      for (int a = 0; a < 3; ++a) {
        t.box.axes[static_cast<std::size_t>(a)] =
            Vec3(axes[a][0].get<double>(), axes[a][1].get<double>(), axes[a][2].get<double>());
      }
      const auto& ext = jt.at("box").at("extents");
      t.box.extents = Vec3(ext[0].get<double>(), ext[1].get<double>(), ext[2].get<double>());
      t.box.centroid = t.centroid;
      if (jt.contains("heading")) {
        t.heading = Vec2(jt["heading"][0].get<double>(), jt["heading"][1].get<double>());
      }
      if (jt.contains("speed")) t.speed = jt["speed"].get<double>();
      if (jt.contains("motion_vector")) {
        MotionVector mv;
        mv.direction = Vec2(jt["motion_vector"]["direction"][0].get<double>(),
                            jt["motion_vector"]["direction"][1].get<double>());
        mv.speed = jt["motion_vector"]["speed"].get<double>();
        t.motion = mv;
      }
      frame.tracks.push_back(std::move(t));
    }
    out.push_back(std::move(frame));
  }
  return out;
}

void write_truth_jsonl(std::ostream& os, const std::vector<GroundTruthFrame>& truth) {
  for (const GroundTruthFrame& frame : truth) {
    nlohmann::json j;
    j["frame"] = frame.frame_index;
    j["timestamp"] = frame.timestamp;
    j["objects"] = nlohmann::json::array();
    for (const GroundTruthObject& o : frame.objects) {
      nlohmann::json jo;
      jo["id"] = o.object_id;
      jo["centroid"] = {o.centroid.x(), o.centroid.y(), o.centroid.z()};
      jo["yaw"] = o.yaw;
      jo["velocity"] = {o.velocity.x(), o.velocity.y()};
      jo["extents"] = {o.box.extents.x(), o.box.extents.y(), o.box.extents.z()};
      jo["visible_points_per_sensor"] = o.visible_points_per_sensor;
      j["objects"].push_back(jo);
    }
    os << j.dump() << '\n';
  }
}

std::vector<GroundTruthFrame> read_truth_jsonl(std::istream& is) {
  std::vector<GroundTruthFrame> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    GroundTruthFrame frame;
    frame.frame_index = j.at("frame").get<int>();
    frame.timestamp = j.at("timestamp").get<double>();
    for (const auto& jo : j.at("objects")) {
      GroundTruthObject o;
      o.object_id = jo.at("id").get<int>();
      o.centroid = Vec3(jo.at("centroid")[0].get<double>(), jo.at("centroid")[1].get<double>(),
                        jo.at("centroid")[2].get<double>());
      o.yaw = jo.at("yaw").get<double>();
      o.velocity = Vec2(jo.at("velocity")[0].get<double>(), jo.at("velocity")[1].get<double>());
      o.box.centroid = o.centroid;
      o.box.axes[0] = Vec3::UnitZ();
      o.box.axes[1] = Vec3(std::cos(o.yaw), std::sin(o.yaw), 0.0);
      o.box.axes[2] = o.box.axes[0].cross(o.box.axes[1]);
      o.box.extents = Vec3(jo.at("extents")[0].get<double>(), jo.at("extents")[1].get<double>(),
                           jo.at("extents")[2].get<double>());
      if (jo.contains("visible_points_per_sensor")) {
        o.visible_points_per_sensor = jo["visible_points_per_sensor"].get<std::vector<int>>();
      }
      frame.objects.push_back(std::move(o));
    }
    out.push_back(std::move(frame));
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace {

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ls(line);
  while (std::getline(ls, field, ',')) fields.push_back(field);
  return fields;
}

}  // namespace

std::string metrics_to_csv(const Metrics& m) {
  std::ostringstream os;
  os << "positioning_error,heading_error_deg,speed_error,speed_error_rel_pct,mota,motp,"
        "ground_truth_total,false_negatives,false_positives,id_switches,matched_samples\n";
  os << format_double(m.positioning_error) << ',' << format_double(m.heading_error_deg) << ','
     << format_double(m.speed_error) << ',' << format_double(m.speed_error_rel_pct) << ','
     << format_double(m.mota) << ',' << format_double(m.motp) << ',' << m.ground_truth_total
     << ',' << m.false_negatives << ',' << m.false_positives << ',' << m.id_switches << ','
     << m.matched_samples << '\n';
  return os.str();
}

Metrics metrics_from_csv(const std::string& csv) {
  std::istringstream is(csv);
  std::string header, row;
  if (!std::getline(is, header) || !std::getline(is, row)) {
    throw PipelineError("metrics_from_csv: need header and one data row");
  }
  const auto f = split_csv_line(row);
  if (f.size() != 11) throw PipelineError("metrics_from_csv: expected 11 columns");
  Metrics m;
  m.positioning_error = std::stod(f[0]);
  m.heading_error_deg = std::stod(f[1]);
  m.speed_error = std::stod(f[2]);
  m.speed_error_rel_pct = std::stod(f[3]);
  m.mota = std::stod(f[4]);
  m.motp = std::stod(f[5]);
  m.ground_truth_total = std::stoul(f[6]);
  m.false_negatives = std::stoul(f[7]);
  m.false_positives = std::stoul(f[8]);
  m.id_switches = std::stoul(f[9]);
  m.matched_samples = std::stoul(f[10]);
  return m;
}

std::string timings_to_csv(const std::vector<StageTimings>& rows) {
  std::ostringstream os;
  os << "frame,background_subtraction,stitching,clustering,bounding_box,tracking,heading,"
        "motion,planning,participants,stitched_points,subtraction_comparisons\n";
  for (const StageTimings& t : rows) {
    os << t.frame << ',' << format_double(t.background_subtraction) << ','
       << format_double(t.stitching) << ',' << format_double(t.clustering) << ','
       << format_double(t.bounding_box) << ',' << format_double(t.tracking) << ','
       << format_double(t.heading) << ',' << format_double(t.motion) << ','
       << format_double(t.planning) << ',' << t.participants << ',' << t.stitched_points << ','
       << t.subtraction_comparisons << '\n';
  }
  return os.str();
}

std::vector<StageTimings> timings_from_csv(const std::string& csv) {
  std::istringstream is(csv);
  std::string line;
  std::vector<StageTimings> rows;
  bool header = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    const auto f = split_csv_line(line);
    if (f.size() != 12) throw PipelineError("timings_from_csv: expected 12 columns");
    StageTimings t;
    t.frame = std::stoi(f[0]);
    t.background_subtraction = std::stod(f[1]);
    t.stitching = std::stod(f[2]);
    t.clustering = std::stod(f[3]);
    t.bounding_box = std::stod(f[4]);
    t.tracking = std::stod(f[5]);
    t.heading = std::stod(f[6]);
    t.motion = std::stod(f[7]);
    t.planning = std::stod(f[8]);
    t.participants = std::stoul(f[9]);
    t.stitched_points = std::stoul(f[10]);
    t.subtraction_comparisons = std::stoul(f[11]);
    rows.push_back(t);
  }
  return rows;
}

}  // namespace crossview
