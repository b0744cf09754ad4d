#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "starpose/errors.hpp"
#include "starpose/skeleton.hpp"

using namespace starpose;

TEST_CASE("default 17-joint topology is valid") {
  const SkeletonTopology topo = default_topology_17();
  CHECK(topo.num_joints == 17);
  CHECK(topo.bones.size() == 16);
  CHECK(topo.symmetry_pairs.size() == 6);
  CHECK(validate_topology(topo).empty());
  for (double w : topo.joint_weights) CHECK(w == 1.0);
}

TEST_CASE("every non-root joint is the child of exactly one bone") {
  const SkeletonTopology topo = default_topology_17();
  std::vector<int> child_count(topo.num_joints, 0);
  for (const auto& [parent, child] : topo.bones) {
    CHECK(parent == topo.parents[child]);
    ++child_count[child];
  }
  for (int j = 0; j < topo.num_joints; ++j) {
    CHECK(child_count[j] == (j == topo.root_index ? 0 : 1));
  }
}

TEST_CASE("validate_topology reports cycles and bad weights") {
  SkeletonTopology topo = default_topology_17();
  SUBCASE("2-cycle in parents") {
    topo.parents[1] = 2;
    topo.parents[2] = 1;
    const auto violations = validate_topology(topo);
    bool found = false;
    for (const auto& v : violations) {
      if (v.find("cycle") != std::string::npos || v.find("connected") != std::string::npos) {
        found = true;
      }
    }
    CHECK(found);
  }
  SUBCASE("zero weight") {
    topo.joint_weights[3] = 0.0;
    const auto violations = validate_topology(topo);
    bool found = false;
    for (const auto& v : violations) {
      if (v.find("non-positive weight") != std::string::npos &&
          v.find("joint 3") != std::string::npos) {
        found = true;
      }
    }
    CHECK(found);
  }
  SUBCASE("duplicate bone in symmetry pairs") {
    topo.symmetry_pairs.push_back(topo.symmetry_pairs.front());
    const auto violations = validate_topology(topo);
    CHECK(!violations.empty());
  }
}

TEST_CASE("bone lengths: 3-4-5 triangle and coincident joints") {
  SkeletonTopology topo = make_topology(2, 0, {-1, 0}, {}, {1.0, 1.0});
  Pose3d pose(2);
  pose.joint(1)[0] = 3.0;
  pose.joint(1)[1] = 4.0;
  CHECK(bone_lengths(pose, topo)[0] == doctest::Approx(5.0).epsilon(1e-15));

  Pose3d zeros(2);
  CHECK(bone_lengths(zeros, topo)[0] == 0.0);
}

TEST_CASE("bone lengths match a per-bone hand-expanded oracle") {
  const SkeletonTopology topo = default_topology_17();
  Rng rng(7);
  const Pose3d pose = oracles::random_pose(17, rng, 500.0);
  const auto lengths = bone_lengths(pose, topo);
  for (std::size_t q = 0; q < topo.bones.size(); ++q) {
    const double* a = pose.joint(topo.bones[q].first);
    const double* b = pose.joint(topo.bones[q].second);
    const double expect = std::sqrt((a[0] - b[0]) * (a[0] - b[0]) +
                                    (a[1] - b[1]) * (a[1] - b[1]) +
                                    (a[2] - b[2]) * (a[2] - b[2]));
    CHECK(lengths[q] == doctest::Approx(expect).epsilon(1e-14));
  }
}

TEST_CASE("bone lengths invariant under translation and rotation") {
  const SkeletonTopology topo = default_topology_17();
  Rng rng(11);
  const Pose3d pose = oracles::random_pose(17, rng, 400.0);
  const auto base = bone_lengths(pose, topo);

  Pose3d shifted = pose;
  for (int j = 0; j < 17; ++j) {
    shifted.joint(j)[0] += 123.0;
    shifted.joint(j)[1] -= 45.0;
    shifted.joint(j)[2] += 6.0;
  }
  const auto after_shift = bone_lengths(shifted, topo);

  const double c = std::cos(0.7), s = std::sin(0.7);
  Pose3d rotated = pose;
  for (int j = 0; j < 17; ++j) {
    const double x = pose.joint(j)[0], y = pose.joint(j)[1];
    rotated.joint(j)[0] = c * x - s * y;
    rotated.joint(j)[1] = s * x + c * y;
  }
  const auto after_rot = bone_lengths(rotated, topo);

  for (std::size_t q = 0; q < base.size(); ++q) {
    CHECK(after_shift[q] == doctest::Approx(base[q]).epsilon(1e-12));
    CHECK(after_rot[q] == doctest::Approx(base[q]).epsilon(1e-12));
  }
}

TEST_CASE("bone_lengths rejects joint-count mismatch") {
  const SkeletonTopology topo = default_topology_17();
  Pose3d pose(5);
  CHECK_THROWS_AS(bone_lengths(pose, topo), ShapeMismatch);
}
