#include "starpose/camera.hpp"

#include "starpose/errors.hpp"

namespace starpose {

Pose2d project(const Pose3d& pose_cam, const CameraIntrinsics& intr) {
  const int J = pose_cam.joint_count();
  Pose2d out(J);
  for (int j = 0; j < J; ++j) {
    const double* p = pose_cam.joint(j);
    if (!(p[2] > kDepthEpsilonMm)) throw NonPositiveDepth(j);
    out.joint(j)[0] = intr.fx * p[0] / p[2] + intr.cx;
    out.joint(j)[1] = intr.fy * p[1] / p[2] + intr.cy;
  }
  return out;
}

std::vector<double> project_jacobian(const Pose3d& pose_cam, const CameraIntrinsics& intr) {
  const int J = pose_cam.joint_count();
  std::vector<double> jac(static_cast<std::size_t>(J) * 6);
  for (int j = 0; j < J; ++j) {
    const double* p = pose_cam.joint(j);
    if (!(p[2] > kDepthEpsilonMm)) throw NonPositiveDepth(j);
    const double inv_z = 1.0 / p[2];
    double* row = &jac[static_cast<std::size_t>(j) * 6];
    row[0] = intr.fx * inv_z;             // du/dx
    row[1] = 0.0;                         // du/dy
    row[2] = -intr.fx * p[0] * inv_z * inv_z;  // du/dz
    row[3] = 0.0;                         // dv/dx
    row[4] = intr.fy * inv_z;             // dv/dy
    row[5] = -intr.fy * p[1] * inv_z * inv_z;  // dv/dz
  }
  return jac;
}

}  // namespace starpose
