#pragma once

#include "crossview/geometry.hpp"

#include <iosfwd>
#include <string>

namespace crossview {

struct PcdIoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// ASCII PCD writer. Unorganized clouds use FIELDS x y z. Organized clouds
/// are written as the full beam lattice (HEIGHT = beam count, WIDTH = azimuth
/// count) with FIELDS x y z ring range; no-return cells carry nan coordinates
/// and range 0 so the lattice survives a round trip.
void write_pcd(std::ostream& os, const PointCloud& cloud);
void write_pcd_file(const std::string& path, const PointCloud& cloud);

PointCloud read_pcd(std::istream& is);
PointCloud read_pcd_file(const std::string& path);

}  // namespace crossview
