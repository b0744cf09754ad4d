#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "starpose/camera.hpp"
#include "starpose/pose.hpp"
#include "starpose/skeleton.hpp"

namespace starpose {

// Weights of the four physical terms plus the guidance step size.
struct EnergyWeights {
  double lambda_p = 1.0;   // 2D reprojection consistency
  double lambda_s = 1.0;   // left/right bone symmetry
  double lambda_b = 0.01;  // bone-length variation over the sliding window
  double lambda_d = 0.01;  // weighted squared joint motion between frames
  double rho = 0.0;        // guidance step size
};

// Everything the energy needs besides the pose under evaluation. A context
// is an immutable snapshot; hypotheses can be scored in parallel as long as
// each evaluation uses its own copy or none of them mutates it.
struct GuidanceContext {
  Pose2d observed_2d;
  CameraIntrinsics intrinsics{};
  SkeletonTopology topology;
  std::vector<Pose3d> window;        // up to `window_capacity` past poses, oldest first
  std::optional<Pose3d> prev_pose;   // pose at t-1; absent on the first frame
  std::array<double, 3> root_position{0.0, 0.0, 0.0};  // camera-space mm
  bool reprojection_enabled = true;  // false when no root trajectory is known
  int window_capacity = 27;
};

struct EnergyBreakdown {
  double reprojection = 0.0;
  double symmetry = 0.0;
  double bone_variance = 0.0;
  double differential = 0.0;
  double total = 0.0;
};

// Non-differentiable events where a zero subgradient was substituted.
struct SubgradientLog {
  std::vector<std::string> events;
};

// Sum over joints of the pixel distance between the reprojected pose and
// the observed keypoints. The pose is root-relative; it is shifted to
// ctx.root_position before projection. Throws NonPositiveDepth.
double loss_reprojection(const Pose3d& h, const GuidanceContext& ctx);

// Sum over symmetry pairs of |left bone length - right bone length|.
double loss_symmetry(const Pose3d& h, const SkeletonTopology& topo);

// Sum over bones of the mean absolute deviation of the bone length across
// the window with `current` appended.
double loss_bone_variance(const std::vector<Pose3d>& window, const Pose3d& current,
                          const SkeletonTopology& topo);

// Sum over joints of weight * squared displacement against the previous
// pose. Zero when no previous pose exists.
double loss_differential(const Pose3d& h, const Pose3d* prev, const std::vector<double>& weights);

EnergyBreakdown energy_terms(const Pose3d& h, const GuidanceContext& ctx,
                             const EnergyWeights& w);
double energy(const Pose3d& h, const GuidanceContext& ctx, const EnergyWeights& w);

// Analytic gradient of energy() with respect to h. Window history is held
// constant except for h's own appearance in the bone-variance term. At
// non-differentiable points the zero subgradient is used and logged.
Pose3d energy_grad(const Pose3d& h, const GuidanceContext& ctx, const EnergyWeights& w,
                   SubgradientLog* log = nullptr);

// One guidance update: h_next - rho * grad, elementwise.
Pose3d guidance_step(const Pose3d& h_next, const Pose3d& grad, double rho);

}  // namespace starpose
