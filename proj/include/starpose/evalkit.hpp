#pragma once

#include <array>
#include <map>
#include <string>

#include "starpose/pose.hpp"

namespace starpose {

struct SimilarityTransform {
  double scale = 1.0;
  std::array<double, 9> rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};  // row-major, det +1
  std::array<double, 3> translation{0, 0, 0};
};

// Optimal similarity transform mapping A onto B (minimises the summed
// squared residual of s*R*a + t against b). Set with_scale=false for a
// rigid-only alignment. Throws DegenerateConfiguration when the joints are
// coincident or collinear.
SimilarityTransform procrustes_align(const Pose3d& a, const Pose3d& b, bool with_scale = true);

Pose3d apply_transform(const SimilarityTransform& tf, const Pose3d& pose);

// Mean per-joint position error in millimetres over all frames.
double mpjpe(const PoseSeq3d& pred, const PoseSeq3d& gt);

// MPJPE after a per-frame Procrustes alignment of the prediction onto the
// ground truth.
double p_mpjpe(const PoseSeq3d& pred, const PoseSeq3d& gt, bool with_scale = true);

// MPJPE of first temporal differences scaled by fps (mm/s). Needs >= 2 frames.
double mpjve(const PoseSeq3d& pred, const PoseSeq3d& gt, double fps);

// MPJPE of second temporal differences scaled by fps^2 (mm/s^2). Needs >= 3.
double acc_err(const PoseSeq3d& pred, const PoseSeq3d& gt, double fps);

// Fraction of joints within 150mm, and the mean of that fraction over the
// 5..150mm (step 5) threshold grid.
std::pair<double, double> pck_auc(const PoseSeq3d& pred, const PoseSeq3d& gt);

struct MetricsReport {
  double mpjpe = 0.0;
  double p_mpjpe = 0.0;
  double mpjve = 0.0;    // 0 when undefined (single frame)
  double acc_err = 0.0;  // 0 when undefined
  double pck_150 = 0.0;
  double auc = 0.0;
  std::map<std::string, double> per_sequence_mpjpe;
};

MetricsReport evaluate(const PoseSeq3d& pred, const PoseSeq3d& gt, const std::string& label = "");

std::string report_to_json(const MetricsReport& report);
std::string report_table(const MetricsReport& report);

}  // namespace starpose
