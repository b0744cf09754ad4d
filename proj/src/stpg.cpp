#include "starpose/stpg.hpp"

#include <cmath>

#include "starpose/errors.hpp"

namespace starpose {

namespace {

void log_event(SubgradientLog* log, const std::string& what) {
  if (log) log->events.push_back(what);
}

// Subgradient sign with a relative deadband: length differences at the
// rounding-noise level of the kinematic computation count as the kink
// itself, so the zero subgradient applies there.
double sign_within(double v, double scale) {
  const double tol = 1e-9 * std::max(1.0, scale);
  return std::abs(v) <= tol ? 0.0 : (v > 0.0 ? 1.0 : -1.0);
}

Pose3d to_camera_space(const Pose3d& h, const std::array<double, 3>& root) {
  Pose3d abs = h;
  const int J = abs.joint_count();
  for (int j = 0; j < J; ++j) {
    double* p = abs.joint(j);
    p[0] += root[0];
    p[1] += root[1];
    p[2] += root[2];
  }
  return abs;
}

}  // namespace

double loss_reprojection(const Pose3d& h, const GuidanceContext& ctx) {
  const Pose3d abs = to_camera_space(h, ctx.root_position);
  const Pose2d proj = project(abs, ctx.intrinsics);
  const int J = h.joint_count();
  double loss = 0.0;
  for (int j = 0; j < J; ++j) {
    const double du = proj.joint(j)[0] - ctx.observed_2d.joint(j)[0];
    const double dv = proj.joint(j)[1] - ctx.observed_2d.joint(j)[1];
    loss += std::sqrt(du * du + dv * dv);
  }
  return loss;
}

double loss_symmetry(const Pose3d& h, const SkeletonTopology& topo) {
  const std::vector<double> lengths = bone_lengths(h, topo);
  double loss = 0.0;
  for (const auto& [left, right] : topo.symmetry_pairs) {
    loss += std::abs(lengths[left] - lengths[right]);
  }
  return loss;
}

double loss_bone_variance(const std::vector<Pose3d>& window, const Pose3d& current,
                          const SkeletonTopology& topo) {
  const std::size_t T = window.size() + 1;
  const std::size_t Q = topo.bones.size();
  std::vector<std::vector<double>> lengths;
  lengths.reserve(T);
  for (const auto& p : window) lengths.push_back(bone_lengths(p, topo));
  lengths.push_back(bone_lengths(current, topo));

  double loss = 0.0;
  for (std::size_t q = 0; q < Q; ++q) {
    double mean = 0.0;
    for (std::size_t l = 0; l < T; ++l) mean += lengths[l][q];
    mean /= static_cast<double>(T);
    double dev = 0.0;
    for (std::size_t l = 0; l < T; ++l) dev += std::abs(lengths[l][q] - mean);
    loss += dev / static_cast<double>(T);
  }
  return loss;
}

double loss_differential(const Pose3d& h, const Pose3d* prev, const std::vector<double>& weights) {
  if (prev == nullptr) return 0.0;
  if (prev->joint_count() != h.joint_count()) {
    throw ShapeMismatch("differential loss: joint counts differ");
  }
  const int J = h.joint_count();
  double loss = 0.0;
  for (int j = 0; j < J; ++j) {
    const double* a = h.joint(j);
    const double* b = prev->joint(j);
    const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    loss += weights[j] * (dx * dx + dy * dy + dz * dz);
  }
  return loss;
}

EnergyBreakdown energy_terms(const Pose3d& h, const GuidanceContext& ctx,
                             const EnergyWeights& w) {
  EnergyBreakdown out;
  if (w.lambda_p > 0.0 && ctx.reprojection_enabled) {
    out.reprojection = loss_reprojection(h, ctx);
  }
  if (w.lambda_s > 0.0) out.symmetry = loss_symmetry(h, ctx.topology);
  if (w.lambda_b > 0.0) out.bone_variance = loss_bone_variance(ctx.window, h, ctx.topology);
  if (w.lambda_d > 0.0) {
    out.differential = loss_differential(
        h, ctx.prev_pose ? &*ctx.prev_pose : nullptr, ctx.topology.joint_weights);
  }
  out.total = w.lambda_p * out.reprojection + w.lambda_s * out.symmetry +
              w.lambda_b * out.bone_variance + w.lambda_d * out.differential;
  return out;
}

double energy(const Pose3d& h, const GuidanceContext& ctx, const EnergyWeights& w) {
  return energy_terms(h, ctx, w).total;
}

Pose3d energy_grad(const Pose3d& h, const GuidanceContext& ctx, const EnergyWeights& w,
                   SubgradientLog* log) {
  const int J = h.joint_count();
  Pose3d grad(J);
  const SkeletonTopology& topo = ctx.topology;

  // Reprojection: jacobian-transpose times the normalized pixel residual.
  if (w.lambda_p > 0.0 && ctx.reprojection_enabled) {
    const Pose3d abs = to_camera_space(h, ctx.root_position);
    const Pose2d proj = project(abs, ctx.intrinsics);
    const std::vector<double> jac = project_jacobian(abs, ctx.intrinsics);
    for (int j = 0; j < J; ++j) {
      const double du = proj.joint(j)[0] - ctx.observed_2d.joint(j)[0];
      const double dv = proj.joint(j)[1] - ctx.observed_2d.joint(j)[1];
      const double norm = std::sqrt(du * du + dv * dv);
      if (norm == 0.0) {
        log_event(log, "reprojection residual exactly zero at joint " + std::to_string(j));
        continue;
      }
      const double gu = du / norm, gv = dv / norm;
      const double* row = &jac[static_cast<std::size_t>(j) * 6];
      double* g = grad.joint(j);
      g[0] += w.lambda_p * (row[0] * gu + row[3] * gv);
      g[1] += w.lambda_p * (row[1] * gu + row[4] * gv);
      g[2] += w.lambda_p * (row[2] * gu + row[5] * gv);
    }
  }

  // Symmetry: sign of the length difference routed through each bone's
  // unit direction.
  if (w.lambda_s > 0.0) {
    const std::vector<double> lengths = bone_lengths(h, topo);
    for (const auto& [left, right] : topo.symmetry_pairs) {
      const double s =
          sign_within(lengths[left] - lengths[right], std::max(lengths[left], lengths[right]));
      if (s == 0.0) {
        log_event(log, "symmetry pair with equal lengths");
        continue;
      }
      const std::pair<int, int> bones[2] = {topo.bones[left], topo.bones[right]};
      const double factors[2] = {s, -s};
      for (int side = 0; side < 2; ++side) {
        const int a = bones[side].first, b = bones[side].second;
        const double len = side == 0 ? lengths[left] : lengths[right];
        if (len == 0.0) {
          log_event(log, "zero-length bone in symmetry pair");
          continue;
        }
        const double* pa = h.joint(a);
        const double* pb = h.joint(b);
        const double scale = w.lambda_s * factors[side] / len;
        for (int c = 0; c < 3; ++c) {
          const double diff = pa[c] - pb[c];
          grad.joint(a)[c] += scale * diff;
          grad.joint(b)[c] -= scale * diff;
        }
      }
    }
  }

  // Bone-length variation: only the current pose's length is a function of
  // h, but it also moves the window mean.
  if (w.lambda_b > 0.0) {
    const std::size_t T = ctx.window.size() + 1;
    std::vector<std::vector<double>> lengths;
    lengths.reserve(T);
    for (const auto& p : ctx.window) lengths.push_back(bone_lengths(p, topo));
    lengths.push_back(bone_lengths(h, topo));
    for (std::size_t q = 0; q < topo.bones.size(); ++q) {
      double mean = 0.0;
      for (std::size_t l = 0; l < T; ++l) mean += lengths[l][q];
      mean /= static_cast<double>(T);
      double sign_sum = 0.0;
      for (std::size_t l = 0; l < T; ++l) sign_sum += sign_within(lengths[l][q] - mean, mean);
      const double s_cur = sign_within(lengths[T - 1][q] - mean, mean);
      if (s_cur == 0.0 && sign_sum == 0.0) {
        if (T > 1) log_event(log, "bone-variance deviation exactly zero for bone " + std::to_string(q));
        continue;
      }
      const double dV_dlen =
          (s_cur - sign_sum / static_cast<double>(T)) / static_cast<double>(T);
      const double len = lengths[T - 1][q];
      if (len == 0.0) {
        log_event(log, "zero-length bone in variance term");
        continue;
      }
      const int a = topo.bones[q].first, b = topo.bones[q].second;
      const double* pa = h.joint(a);
      const double* pb = h.joint(b);
      const double scale = w.lambda_b * dV_dlen / len;
      for (int c = 0; c < 3; ++c) {
        const double diff = pa[c] - pb[c];
        grad.joint(a)[c] += scale * diff;
        grad.joint(b)[c] -= scale * diff;
      }
    }
  }

  // Differential variation: smooth quadratic, no special cases.
  if (w.lambda_d > 0.0 && ctx.prev_pose) {
    const Pose3d& prev = *ctx.prev_pose;
    for (int j = 0; j < J; ++j) {
      const double* a = h.joint(j);
      const double* b = prev.joint(j);
      const double scale = 2.0 * w.lambda_d * topo.joint_weights[j];
      for (int c = 0; c < 3; ++c) grad.joint(j)[c] += scale * (a[c] - b[c]);
    }
  }

  return grad;
}

Pose3d guidance_step(const Pose3d& h_next, const Pose3d& grad, double rho) {
  if (h_next.xyz.size() != grad.xyz.size()) throw ShapeMismatch("guidance step: shape mismatch");
  Pose3d out = h_next;
  for (std::size_t i = 0; i < out.xyz.size(); ++i) out.xyz[i] -= rho * grad.xyz[i];
  return out;
}

}  // namespace starpose
