#include "starpose/evalkit.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Dense>
#include <json.hpp>

#include "starpose/errors.hpp"

namespace starpose {

namespace {

void check_pair(const PoseSeq3d& pred, const PoseSeq3d& gt) {
  if (pred.frame_count() != gt.frame_count()) {
    throw ShapeMismatch("metrics: frame counts differ");
  }
  if (pred.frame_count() == 0) throw ShapeMismatch("metrics: empty sequences");
  if (pred.frames.front().joint_count() != gt.frames.front().joint_count()) {
    throw ShapeMismatch("metrics: joint counts differ");
  }
}

double mean_joint_distance(const Pose3d& a, const Pose3d& b) {
  const int J = a.joint_count();
  double acc = 0.0;
  for (int j = 0; j < J; ++j) {
    const double* pa = a.joint(j);
    const double* pb = b.joint(j);
    const double dx = pa[0] - pb[0], dy = pa[1] - pb[1], dz = pa[2] - pb[2];
    acc += std::sqrt(dx * dx + dy * dy + dz * dz);
  }
  return acc / J;
}

// First differences scaled by fps, as a sequence one frame shorter.
std::vector<Pose3d> temporal_diff(const std::vector<Pose3d>& frames, double fps) {
  std::vector<Pose3d> out;
  out.reserve(frames.size() - 1);
  for (std::size_t t = 0; t + 1 < frames.size(); ++t) {
    Pose3d d(frames[t].joint_count());
    for (std::size_t i = 0; i < d.xyz.size(); ++i) {
      d.xyz[i] = (frames[t + 1].xyz[i] - frames[t].xyz[i]) * fps;
    }
    out.push_back(std::move(d));
  }
  return out;
}

double mean_over_frames(const std::vector<Pose3d>& a, const std::vector<Pose3d>& b) {
  double acc = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) acc += mean_joint_distance(a[t], b[t]);
  return acc / static_cast<double>(a.size());
}

}  // namespace

SimilarityTransform procrustes_align(const Pose3d& a, const Pose3d& b, bool with_scale) {
  const int J = a.joint_count();
  if (J != b.joint_count()) throw ShapeMismatch("procrustes: joint counts differ");
  if (J < 3) throw DegenerateConfiguration("procrustes: needs at least 3 joints");

  Eigen::Vector3d mean_a = Eigen::Vector3d::Zero(), mean_b = Eigen::Vector3d::Zero();
  for (int j = 0; j < J; ++j) {
    mean_a += Eigen::Map<const Eigen::Vector3d>(a.joint(j));
    mean_b += Eigen::Map<const Eigen::Vector3d>(b.joint(j));
  }
  mean_a /= J;
  mean_b /= J;

  Eigen::Matrix3d cross = Eigen::Matrix3d::Zero();
  double var_a = 0.0;
  for (int j = 0; j < J; ++j) {
    const Eigen::Vector3d ca = Eigen::Map<const Eigen::Vector3d>(a.joint(j)) - mean_a;
    const Eigen::Vector3d cb = Eigen::Map<const Eigen::Vector3d>(b.joint(j)) - mean_b;
    cross += ca * cb.transpose();
    var_a += ca.squaredNorm();
  }
  if (!(var_a > 0.0)) throw DegenerateConfiguration("procrustes: coincident joints");

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sing = svd.singularValues();
  if (!(sing(1) > 1e-12 * sing(0))) {
    throw DegenerateConfiguration("procrustes: collinear configuration");
  }

  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  const Eigen::Matrix3d rotation = svd.matrixV() * d * svd.matrixU().transpose();
  const double scale =
      with_scale ? (sing(0) + sing(1) + d(2, 2) * sing(2)) / var_a : 1.0;
  const Eigen::Vector3d translation = mean_b - scale * rotation * mean_a;

  SimilarityTransform tf;
  tf.scale = scale;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) tf.rotation[3 * r + c] = rotation(r, c);
    tf.translation[r] = translation(r);
  }
  return tf;
}

Pose3d apply_transform(const SimilarityTransform& tf, const Pose3d& pose) {
  Pose3d out(pose.joint_count());
  for (int j = 0; j < pose.joint_count(); ++j) {
    const double* p = pose.joint(j);
    double* q = out.joint(j);
    for (int r = 0; r < 3; ++r) {
      q[r] = tf.scale * (tf.rotation[3 * r] * p[0] + tf.rotation[3 * r + 1] * p[1] +
                         tf.rotation[3 * r + 2] * p[2]) +
             tf.translation[r];
    }
  }
  return out;
}

double mpjpe(const PoseSeq3d& pred, const PoseSeq3d& gt) {
  check_pair(pred, gt);
  return mean_over_frames(pred.frames, gt.frames);
}

double p_mpjpe(const PoseSeq3d& pred, const PoseSeq3d& gt, bool with_scale) {
  check_pair(pred, gt);
  double acc = 0.0;
  for (int t = 0; t < pred.frame_count(); ++t) {
    const SimilarityTransform tf = procrustes_align(pred.frames[t], gt.frames[t], with_scale);
    acc += mean_joint_distance(apply_transform(tf, pred.frames[t]), gt.frames[t]);
  }
  return acc / pred.frame_count();
}

double mpjve(const PoseSeq3d& pred, const PoseSeq3d& gt, double fps) {
  check_pair(pred, gt);
  if (pred.frame_count() < 2) {
    throw NumericalError("velocity error undefined for sequences shorter than 2 frames");
  }
  return mean_over_frames(temporal_diff(pred.frames, fps), temporal_diff(gt.frames, fps));
}

double acc_err(const PoseSeq3d& pred, const PoseSeq3d& gt, double fps) {
  check_pair(pred, gt);
  if (pred.frame_count() < 3) {
    throw NumericalError("acceleration error undefined for sequences shorter than 3 frames");
  }
  return mean_over_frames(temporal_diff(temporal_diff(pred.frames, fps), fps),
                          temporal_diff(temporal_diff(gt.frames, fps), fps));
}

std::pair<double, double> pck_auc(const PoseSeq3d& pred, const PoseSeq3d& gt) {
  check_pair(pred, gt);
  const int J = pred.frames.front().joint_count();
  std::vector<double> errors;
  errors.reserve(static_cast<std::size_t>(pred.frame_count()) * J);
  for (int t = 0; t < pred.frame_count(); ++t) {
    for (int j = 0; j < J; ++j) {
      const double* pa = pred.frames[t].joint(j);
      const double* pb = gt.frames[t].joint(j);
      const double dx = pa[0] - pb[0], dy = pa[1] - pb[1], dz = pa[2] - pb[2];
      errors.push_back(std::sqrt(dx * dx + dy * dy + dz * dz));
    }
  }
  double auc_acc = 0.0;
  double pck150 = 0.0;
  int thresholds = 0;
  for (int th = 5; th <= 150; th += 5) {
    int within = 0;
    for (double e : errors) {
      if (e <= th) ++within;
    }
    const double frac = static_cast<double>(within) / static_cast<double>(errors.size());
    auc_acc += frac;
    if (th == 150) pck150 = frac;
    ++thresholds;
  }
  return {pck150, auc_acc / thresholds};
}

MetricsReport evaluate(const PoseSeq3d& pred, const PoseSeq3d& gt, const std::string& label) {
  check_pair(pred, gt);
  MetricsReport report;
  report.mpjpe = mpjpe(pred, gt);
  report.p_mpjpe = p_mpjpe(pred, gt);
  if (pred.frame_count() >= 2) report.mpjve = mpjve(pred, gt, gt.fps);
  if (pred.frame_count() >= 3) report.acc_err = acc_err(pred, gt, gt.fps);
  const auto [pck, auc] = pck_auc(pred, gt);
  report.pck_150 = pck;
  report.auc = auc;
  report.per_sequence_mpjpe[label.empty() ? "sequence" : label] = report.mpjpe;
  return report;
}

std::string report_to_json(const MetricsReport& report) {
  nlohmann::json j;
  j["mpjpe_mm"] = report.mpjpe;
  j["p_mpjpe_mm"] = report.p_mpjpe;
  j["mpjve_mm_per_s"] = report.mpjve;
  j["acc_err_mm_per_s2"] = report.acc_err;
  j["pck_150"] = report.pck_150;
  j["auc"] = report.auc;
  j["per_sequence_mpjpe"] = report.per_sequence_mpjpe;
  return j.dump(1) + "\n";
}

std::string report_table(const MetricsReport& report) {
  std::ostringstream out;
  char line[128];
  out << "metric              value\n";
  out << "------------------  ----------\n";
  std::snprintf(line, sizeof(line), "%-18s  %10.4f\n", "MPJPE (mm)", report.mpjpe);
  out << line;
  std::snprintf(line, sizeof(line), "%-18s  %10.4f\n", "P-MPJPE (mm)", report.p_mpjpe);
  out << line;
  std::snprintf(line, sizeof(line), "%-18s  %10.4f\n", "MPJVE (mm/s)", report.mpjve);
  out << line;
  std::snprintf(line, sizeof(line), "%-18s  %10.4f\n", "ACC-ERR (mm/s^2)", report.acc_err);
  out << line;
  std::snprintf(line, sizeof(line), "%-18s  %10.4f\n", "PCK@150mm", report.pck_150);
  out << line;
  std::snprintf(line, sizeof(line), "%-18s  %10.4f\n", "AUC", report.auc);
  out << line;
  return out.str();
}

}  // namespace starpose
