#pragma once

#include <array>
#include <string>
#include <vector>

namespace starpose {

// Root-relative 3D joint coordinates in millimetres, flattened joint-major.
struct Pose3d {
  std::vector<double> xyz;  // 3*J: x0,y0,z0, x1,y1,z1, ...

  Pose3d() = default;
  explicit Pose3d(int joints) : xyz(3 * static_cast<std::size_t>(joints), 0.0) {}
  explicit Pose3d(std::vector<double> flat) : xyz(std::move(flat)) {}

  int joint_count() const { return static_cast<int>(xyz.size() / 3); }
  double* joint(int j) { return &xyz[3 * static_cast<std::size_t>(j)]; }
  const double* joint(int j) const { return &xyz[3 * static_cast<std::size_t>(j)]; }
};

// Image-plane keypoints in pixels, flattened joint-major.
struct Pose2d {
  std::vector<double> uv;  // 2*J

  Pose2d() = default;
  explicit Pose2d(int joints) : uv(2 * static_cast<std::size_t>(joints), 0.0) {}

  int joint_count() const { return static_cast<int>(uv.size() / 2); }
  double* joint(int j) { return &uv[2 * static_cast<std::size_t>(j)]; }
  const double* joint(int j) const { return &uv[2 * static_cast<std::size_t>(j)]; }
};

struct CameraIntrinsics {
  double fx = 0.0, fy = 0.0;  // focal lengths, px
  double cx = 0.0, cy = 0.0;  // principal point, px
};

struct PoseSeq3d {
  double fps = 0.0;
  std::vector<std::string> joint_names;
  std::vector<std::array<double, 3>> root_trajectory;  // camera-space mm per frame
  std::vector<Pose3d> frames;                          // root-relative

  int frame_count() const { return static_cast<int>(frames.size()); }
};

struct PoseSeq2d {
  double fps = 0.0;
  std::vector<std::string> joint_names;
  std::vector<Pose2d> frames;
  bool has_intrinsics = false;
  CameraIntrinsics intrinsics{};                       // the generating camera, if known
  std::vector<std::array<double, 3>> root_trajectory;  // optional; empty if unknown

  int frame_count() const { return static_cast<int>(frames.size()); }
};

}  // namespace starpose
