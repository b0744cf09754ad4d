#include <doctest.h>

#include "oracles.hpp"
#include "starpose/camera.hpp"
#include "starpose/errors.hpp"

using namespace starpose;

TEST_CASE("projection basics") {
  CameraIntrinsics intr{1000.0, 1000.0, 0.0, 0.0};
  Pose3d pose(2);
  pose.joint(0)[2] = 1000.0;  // on the optical axis
  pose.joint(1)[0] = 100.0;
  pose.joint(1)[2] = 1000.0;
  const Pose2d proj = project(pose, intr);
  CHECK(proj.joint(0)[0] == 0.0);
  CHECK(proj.joint(0)[1] == 0.0);
  CHECK(proj.joint(1)[0] == doctest::Approx(100.0));
}

TEST_CASE("projection matches the per-joint scalar formulas") {
  CameraIntrinsics intr{1145.04, 1145.04, 512.0, 512.0};
  Rng rng(3);
  Pose3d pose = oracles::random_pose(17, rng, 400.0);
  for (int j = 0; j < 17; ++j) pose.joint(j)[2] += 3000.0;
  const Pose2d proj = project(pose, intr);
  for (int j = 0; j < 17; ++j) {
    const double* p = pose.joint(j);
    CHECK(proj.joint(j)[0] == doctest::Approx(intr.fx * p[0] / p[2] + intr.cx).epsilon(1e-14));
    CHECK(proj.joint(j)[1] == doctest::Approx(intr.fy * p[1] / p[2] + intr.cy).epsilon(1e-14));
  }
}

TEST_CASE("non-positive depth is an error, not a clamp") {
  CameraIntrinsics intr{1000.0, 1000.0, 0.0, 0.0};
  Pose3d pose(2);
  pose.joint(0)[2] = 1000.0;
  pose.joint(1)[2] = 0.5;  // below the 1mm floor
  try {
    project(pose, intr);
    FAIL("expected NonPositiveDepth");
  } catch (const NonPositiveDepth& e) {
    CHECK(e.joint_index == 1);
  }
}

TEST_CASE("jacobian on the optical axis") {
  CameraIntrinsics intr{1000.0, 1000.0, 0.0, 0.0};
  Pose3d pose(1);
  pose.joint(0)[2] = 1000.0;
  const auto jac = project_jacobian(pose, intr);
  CHECK(jac[0] == doctest::Approx(1.0));  // du/dx
  CHECK(jac[2] == 0.0);                   // du/dz
  CHECK(jac[4] == doctest::Approx(1.0));  // dv/dy
}

TEST_CASE("jacobian scales linearly with fx") {
  CameraIntrinsics intr{700.0, 900.0, 10.0, 20.0};
  CameraIntrinsics doubled{1400.0, 900.0, 10.0, 20.0};
  Pose3d pose(1);
  pose.joint(0)[0] = 120.0;
  pose.joint(0)[1] = -40.0;
  pose.joint(0)[2] = 2500.0;
  const auto j1 = project_jacobian(pose, intr);
  const auto j2 = project_jacobian(pose, doubled);
  for (int c = 0; c < 3; ++c) {
    CHECK(j2[c] == doctest::Approx(2.0 * j1[c]).epsilon(1e-14));
    CHECK(j2[3 + c] == doctest::Approx(j1[3 + c]).epsilon(1e-14));
  }
}

TEST_CASE("jacobian matches central finite differences of project") {
  CameraIntrinsics intr{1145.04, 1145.04, 512.0, 512.0};
  Rng rng(17);
  for (int rep = 0; rep < 5; ++rep) {
    Pose3d pose = oracles::random_pose(17, rng, 500.0);
    for (int j = 0; j < 17; ++j) pose.joint(j)[2] += rng.uniform(2000.0, 5000.0);
    const auto jac = project_jacobian(pose, intr);
    for (int j = 0; j < 17; ++j) {
      for (int axis = 0; axis < 2; ++axis) {
        auto eval = [&](const std::vector<double>& xyz) {
          Pose3d p = pose;
          p.xyz = xyz;
          return project(p, intr).joint(j)[axis];
        };
        const auto fd = oracles::finite_diff(eval, pose.xyz, 1e-3);
        for (int c = 0; c < 3; ++c) {
          const double analytic = jac[static_cast<std::size_t>(j) * 6 + axis * 3 + c];
          const double numeric = fd[3 * j + c];
          CHECK(std::abs(analytic - numeric) <=
                1e-6 * std::max({1.0, std::abs(analytic), std::abs(numeric)}));
        }
      }
    }
  }
}

TEST_CASE("axis-centred joint projects to the principal point at any depth") {
  CameraIntrinsics intr{800.0, 850.0, 320.0, 240.0};
  for (double depth : {10.0, 500.0, 12000.0}) {
    Pose3d pose(1);
    pose.joint(0)[2] = depth;
    const Pose2d proj = project(pose, intr);
    CHECK(proj.joint(0)[0] == doctest::Approx(320.0));
    CHECK(proj.joint(0)[1] == doctest::Approx(240.0));
  }
}
