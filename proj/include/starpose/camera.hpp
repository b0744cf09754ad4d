#pragma once

#include <vector>

#include "starpose/pose.hpp"

namespace starpose {

// Joints at or below this depth (mm) are an error, never clamped; clamping
// would corrupt gradients silently.
inline constexpr double kDepthEpsilonMm = 1.0;

// Pinhole projection of a camera-space pose (mm) to pixel coordinates.
// Throws NonPositiveDepth if any joint depth z <= kDepthEpsilonMm.
Pose2d project(const Pose3d& pose_cam, const CameraIntrinsics& intr);

// Per-joint 2x3 sensitivity d(u,v)/d(x,y,z), row-major 6 doubles per joint.
std::vector<double> project_jacobian(const Pose3d& pose_cam, const CameraIntrinsics& intr);

}  // namespace starpose
