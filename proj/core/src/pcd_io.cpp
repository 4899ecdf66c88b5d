#include "crossview/pcd_io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace crossview {

namespace {

void write_header(std::ostream& os, const std::string& fields, std::size_t width,
                  std::size_t height, std::size_t count) {
  const int n_fields = fields == "x y z" ? 3 : 5;
  os << "# crossview point cloud\n";
  os << "VERSION 0.7\n";
  os << "FIELDS " << fields << '\n';
  os << "SIZE";
  for (int i = 0; i < n_fields; ++i) os << " 8";
  os << '\n';
  os << "TYPE";
  for (int i = 0; i < n_fields; ++i) os << " F";
  os << '\n';
  os << "COUNT";
  for (int i = 0; i < n_fields; ++i) os << " 1";
  os << '\n';
  os << "WIDTH " << width << '\n';
  os << "HEIGHT " << height << '\n';
  os << "POINTS " << count << '\n';
  os << "DATA ascii\n";
}

}  // namespace

void write_pcd(std::ostream& os, const PointCloud& cloud) {
  os << std::setprecision(12);
  if (!cloud.organization) {
    write_header(os, "x y z", cloud.points.size(), 1, cloud.points.size());
    for (const Vec3& p : cloud.points) {
      os << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
    }
    return;
  }

  const Organization& org = *cloud.organization;
  if (org.ranges.size() != org.lattice_size() || org.has_return.size() != org.lattice_size()) {
    throw PcdIoError("write_pcd: organization lattice arrays are inconsistent");
  }
  // Scatter returned points back onto the lattice for row-major emission.
  std::vector<int> point_at(org.lattice_size(), -1);
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    point_at[org.cell(org.beam_index[i], org.azimuth_index[i])] = static_cast<int>(i);
  }
  write_header(os, "x y z ring range", static_cast<std::size_t>(org.azimuth_count),
               static_cast<std::size_t>(org.beam_count), org.lattice_size());
  for (int beam = 0; beam < org.beam_count; ++beam) {
    for (int az = 0; az < org.azimuth_count; ++az) {
      const std::size_t cell = org.cell(beam, az);
      if (org.has_return[cell]) {
        const int idx = point_at[cell];
        if (idx < 0) throw PcdIoError("write_pcd: lattice marks a return with no point");
        const Vec3& p = cloud.points[static_cast<std::size_t>(idx)];
        os << p.x() << ' ' << p.y() << ' ' << p.z() << ' ' << beam << ' ' << org.ranges[cell]
           << '\n';
      } else {
        os << "nan nan nan " << beam << " 0\n";
      }
    }
  }
}

void write_pcd_file(const std::string& path, const PointCloud& cloud) {
  std::ofstream os(path);
  if (!os) throw PcdIoError("write_pcd_file: cannot open " + path);
  write_pcd(os, cloud);
}

PointCloud read_pcd(std::istream& is) {
  std::string line;
  std::size_t width = 0, height = 0, points_declared = 0;
  bool has_ring_range = false;
  bool saw_data = false;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "FIELDS") {
      std::string f, rest;
      std::vector<std::string> fields;
      while (ls >> f) fields.push_back(f);
      if (fields.size() >= 3 && fields[0] == "x" && fields[1] == "y" && fields[2] == "z") {
        has_ring_range = fields.size() == 5 && fields[3] == "ring" && fields[4] == "range";
        if (fields.size() != 3 && !has_ring_range) {
          throw PcdIoError("read_pcd: unsupported FIELDS layout");
        }
      } else {
        throw PcdIoError("read_pcd: FIELDS must start with x y z");
      }
    } else if (key == "WIDTH") {
      ls >> width;
    } else if (key == "HEIGHT") {
      ls >> height;
    } else if (key == "POINTS") {
      ls >> points_declared;
    } else if (key == "DATA") {
      std::string mode;
      ls >> mode;
      if (mode != "ascii") throw PcdIoError("read_pcd: only ascii DATA supported");
      saw_data = true;
      break;
    }
  }
  if (!saw_data) throw PcdIoError("read_pcd: missing DATA header");

  PointCloud cloud;
  if (has_ring_range) {
    Organization org;
    org.beam_count = static_cast<int>(height);
    org.azimuth_count = static_cast<int>(width);
    org.ranges.assign(org.lattice_size(), 0.0);
    org.has_return.assign(org.lattice_size(), 0);
    std::size_t row = 0;
    while (row < points_declared && std::getline(is, line)) {
      if (line.empty()) continue;
      std::istringstream ls(line);
      std::string xs, ys, zs;
      int ring = 0;
      double range = 0.0;
      ls >> xs >> ys >> zs >> ring >> range;
      const int az = static_cast<int>(row % width);
      const std::size_t cell = org.cell(ring, az);
      if (xs != "nan") {
        Vec3 p(std::stod(xs), std::stod(ys), std::stod(zs));
        org.beam_index.push_back(ring);
        org.azimuth_index.push_back(az);
        org.ranges[cell] = range;
        org.has_return[cell] = 1;
        cloud.points.push_back(p);
      }
      ++row;
    }
    if (row != points_declared) throw PcdIoError("read_pcd: truncated data section");
    cloud.organization = std::move(org);
  } else {
    cloud.points.reserve(points_declared);
    std::size_t row = 0;
    while (row < points_declared && std::getline(is, line)) {
      if (line.empty()) continue;
      std::istringstream ls(line);
      double x, y, z;
      if (!(ls >> x >> y >> z)) throw PcdIoError("read_pcd: malformed point line");
      cloud.points.emplace_back(x, y, z);
      ++row;
    }
    if (row != points_declared) throw PcdIoError("read_pcd: truncated data section");
  }
  return cloud;
}

PointCloud read_pcd_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw PcdIoError("read_pcd_file: cannot open " + path);
  return read_pcd(is);
}

}  // namespace crossview
