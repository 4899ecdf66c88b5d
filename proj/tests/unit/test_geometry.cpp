#include "crossview/geometry.hpp"
#include "crossview/kdtree.hpp"
#include "crossview/pcd_io.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace crossview;

namespace {

PointCloud random_cloud(std::mt19937& rng, std::size_t n, double extent = 10.0) {
  std::uniform_real_distribution<double> dist(-extent, extent);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.points.emplace_back(dist(rng), dist(rng), dist(rng));
  return c;
}

RigidTransform random_transform(std::mt19937& rng) {
  std::uniform_real_distribution<double> angle(-M_PI, M_PI);
  std::uniform_real_distribution<double> shift(-5.0, 5.0);
  RigidTransform t;
  t.rotation = (Eigen::AngleAxisd(angle(rng), Vec3::UnitZ()) *
                Eigen::AngleAxisd(angle(rng) * 0.3, Vec3::UnitY()) *
                Eigen::AngleAxisd(angle(rng) * 0.3, Vec3::UnitX()))
                   .toRotationMatrix();
  t.translation = Vec3(shift(rng), shift(rng), shift(rng));
  return t;
}

// Brute-force asymmetric cloud distance, the oracle for the k-d tree path.
double cloud_distance_bruteforce(const PointCloud& a, const PointCloud& b) {
  double sum = 0.0;
  for (const Vec3& p : a.points) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3& q : b.points) best = std::min(best, (p - q).norm());
    sum += best;
  }
  return sum / static_cast<double>(a.points.size());
}

}  // namespace

TEST_CASE("apply_transform basics") {
  PointCloud c;
  c.points = {{0, 0, 0}};
  CHECK(apply_transform(RigidTransform::identity(), c).points[0].isApprox(Vec3(0, 0, 0), 1e-15));

  const PointCloud shifted =
      apply_transform(RigidTransform::from_translation({1, 0, 0}), c);
  CHECK(shifted.points[0].isApprox(Vec3(1, 0, 0), 1e-15));

  PointCloud x;
  x.points = {{1, 0, 0}};
  const PointCloud yawed = apply_transform(RigidTransform::from_yaw(M_PI / 2), x);
  CHECK((yawed.points[0] - Vec3(0, 1, 0)).norm() < 1e-9);
}

TEST_CASE("apply_transform keeps cardinality and organization") {
  std::mt19937 rng(7);
  PointCloud c = random_cloud(rng, 64);
  Organization org;
  org.beam_count = 8;
  org.azimuth_count = 8;
  org.ranges.assign(64, 1.0);
  org.has_return.assign(64, 1);
  for (int i = 0; i < 64; ++i) {
    org.beam_index.push_back(i / 8);
    org.azimuth_index.push_back(i % 8);
  }
  c.organization = org;
  const PointCloud out = apply_transform(random_transform(rng), c);
  CHECK(out.points.size() == c.points.size());
  REQUIRE(out.organization.has_value());
  CHECK(out.organization->beam_count == 8);
  CHECK(out.organization->beam_index == c.organization->beam_index);
}

TEST_CASE("transform composition matches sequential application") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    const RigidTransform t1 = random_transform(rng);
    const RigidTransform t2 = random_transform(rng);
    const PointCloud c = random_cloud(rng, 20);
    const PointCloud once = apply_transform(t1.compose(t2), c);
    const PointCloud twice = apply_transform(t1, apply_transform(t2, c));
    for (std::size_t i = 0; i < c.points.size(); ++i) {
      CHECK((once.points[i] - twice.points[i]).norm() < 1e-9);
    }
  }
}

TEST_CASE("rigid transform inverse and validity") {
  std::mt19937 rng(13);
  for (int trial = 0; trial < 25; ++trial) {
    const RigidTransform t = random_transform(rng);
    CHECK(t.is_rigid(1e-9));
    const RigidTransform id = t.compose(t.inverse());
    CHECK((id.rotation - Mat3::Identity()).norm() < 1e-9);
    CHECK(id.translation.norm() < 1e-9);
  }
}

TEST_CASE("centroid") {
  PointCloud c;
  c.points = {{0, 0, 0}, {2, 0, 0}};
  CHECK(centroid(c).isApprox(Vec3(1, 0, 0), 1e-15));

  PointCloud single;
  single.points = {{3, -1, 2}};
  CHECK(centroid(single).isApprox(Vec3(3, -1, 2), 1e-15));

  PointCloud empty;
  CHECK_THROWS_AS(centroid(empty), EmptyCloudError);

  std::mt19937 rng(17);
  const PointCloud r = random_cloud(rng, 100);
  Vec3 sum = Vec3::Zero();
  for (const Vec3& p : r.points) sum += p;
  CHECK((centroid(r) - sum / 100.0).norm() < 1e-12);
}

TEST_CASE("cloud_distance") {
  PointCloud a;
  a.points = {{0, 0, 0}};
  PointCloud b;
  b.points = {{3, 4, 0}};
  CHECK(cloud_distance(a, b) == doctest::Approx(5.0));
  CHECK(cloud_distance(a, a) == doctest::Approx(0.0));

  PointCloud empty;
  CHECK_THROWS_AS(cloud_distance(a, empty), EmptyCloudError);

  std::mt19937 rng(19);
  for (int trial = 0; trial < 10; ++trial) {
    const PointCloud x = random_cloud(rng, 50);
    const PointCloud y = random_cloud(rng, 50);
    CHECK(cloud_distance(x, y) == doctest::Approx(cloud_distance_bruteforce(x, y)).epsilon(1e-12));
  }
}

TEST_CASE("cloud_distance invariant under common rigid transform") {
  std::mt19937 rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const PointCloud x = random_cloud(rng, 40);
    const PointCloud y = random_cloud(rng, 40);
    const RigidTransform t = random_transform(rng);
    const double base = cloud_distance(x, y);
    const double moved = cloud_distance(apply_transform(t, x), apply_transform(t, y));
    CHECK(moved == doctest::Approx(base).epsilon(1e-9));
  }
}

TEST_CASE("kdtree nearest neighbor is exact") {
  std::mt19937 rng(29);
  const PointCloud cloud = random_cloud(rng, 1000);
  const KdTree tree(cloud);

  // Query at an indexed point returns it with distance 0.
  const auto hit = tree.nearest(cloud.points[123]);
  CHECK(hit.distance == doctest::Approx(0.0));
  CHECK((tree.point(hit.index) - cloud.points[123]).norm() == doctest::Approx(0.0));

  PointCloud two;
  two.points = {{1, 0, 0}, {0, 2, 0}};
  const KdTree small(two);
  const auto nn = small.nearest({0, 0, 0});
  CHECK(nn.distance == doctest::Approx(1.0));
  CHECK(tree.size() == 1000);

  std::uniform_real_distribution<double> dist(-12.0, 12.0);
  for (int q = 0; q < 100; ++q) {
    const Vec3 query(dist(rng), dist(rng), dist(rng));
    const auto got = tree.nearest(query);
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_idx = 0;
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
      const double d = (cloud.points[i] - query).norm();
      if (d < best) {
        best = d;
        best_idx = i;
      }
    }
    CHECK(got.distance == doctest::Approx(best).epsilon(1e-12));
    CHECK((tree.point(got.index) - cloud.points[best_idx]).norm() < 1e-12);
  }

  KdTree empty;
  CHECK_THROWS_AS(empty.nearest({0, 0, 0}), EmptyCloudError);
}

TEST_CASE("kdtree radius search matches brute force") {
  std::mt19937 rng(31);
  const PointCloud cloud = random_cloud(rng, 500, 5.0);
  const KdTree tree(cloud);
  std::uniform_real_distribution<double> dist(-6.0, 6.0);
  for (int q = 0; q < 50; ++q) {
    const Vec3 query(dist(rng), dist(rng), dist(rng));
    const double radius = 1.5;
    auto got = tree.radius_search(query, radius);
    std::sort(got.begin(), got.end());
    std::vector<std::size_t> expected;
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
      if ((cloud.points[i] - query).norm() <= radius) expected.push_back(i);
    }
    CHECK(got == expected);
    CHECK(tree.has_neighbor_within(query, radius) == !expected.empty());
  }
}

TEST_CASE("pcd round trip, unorganized") {
  std::mt19937 rng(37);
  const PointCloud cloud = random_cloud(rng, 200, 50.0);
  std::stringstream ss;
  write_pcd(ss, cloud);
  const PointCloud back = read_pcd(ss);
  REQUIRE(back.points.size() == cloud.points.size());
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    CHECK((back.points[i] - cloud.points[i]).norm() < 1e-6);
  }
  CHECK_FALSE(back.organization.has_value());
}

TEST_CASE("pcd round trip preserves beam lattice and no-returns") {
  PointCloud cloud;
  Organization org;
  org.beam_count = 2;
  org.azimuth_count = 3;
  org.ranges.assign(6, 0.0);
  org.has_return.assign(6, 0);
  // Returns at (0,0), (0,2), (1,1); the rest are no-returns.
  auto add = [&](int beam, int az, const Vec3& p, double range) {
    org.beam_index.push_back(beam);
    org.azimuth_index.push_back(az);
    org.ranges[org.cell(beam, az)] = range;
    org.has_return[org.cell(beam, az)] = 1;
    cloud.points.push_back(p);
  };
  add(0, 0, {1.5, 0, 0}, 1.5);
  add(0, 2, {0, 2.25, 0}, 2.25);
  add(1, 1, {0, 0, 3.5}, 3.5);
  cloud.organization = org;

  std::stringstream ss;
  write_pcd(ss, cloud);
  const PointCloud back = read_pcd(ss);
  REQUIRE(back.organization.has_value());
  CHECK(back.organization->beam_count == 2);
  CHECK(back.organization->azimuth_count == 3);
  CHECK(back.points.size() == 3);
  CHECK(back.organization->has_return == org.has_return);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(back.organization->ranges[i] == doctest::Approx(org.ranges[i]).epsilon(1e-9));
  }
}

TEST_CASE("subsample keeps at most the bound with uniform stride") {
  std::mt19937 rng(41);
  const PointCloud cloud = random_cloud(rng, 1000);
  const PointCloud s = subsample(cloud, 100);
  CHECK(s.points.size() == 100);
  CHECK(s.points[0] == cloud.points[0]);
  const PointCloud small = subsample(cloud, 2000);
  CHECK(small.points.size() == 1000);
}
