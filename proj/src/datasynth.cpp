#include "starpose/datasynth.hpp"

#include <cmath>
#include <filesystem>

#include "starpose/camera.hpp"
#include "starpose/errors.hpp"
#include "starpose/rng.hpp"
#include "starpose/skeleton.hpp"
#include "starpose/threading.hpp"

namespace starpose {

namespace {

constexpr double kTau = 6.283185307179586476925286766559;

struct Mat3 {
  double m[9];

  static Mat3 identity() { return {{1, 0, 0, 0, 1, 0, 0, 0, 1}}; }

  static Mat3 rot_x(double a) {
    const double c = std::cos(a), s = std::sin(a);
    return {{1, 0, 0, 0, c, -s, 0, s, c}};
  }

  static Mat3 rot_z(double a) {
    const double c = std::cos(a), s = std::sin(a);
    return {{c, -s, 0, s, c, 0, 0, 0, 1}};
  }

  Mat3 operator*(const Mat3& o) const {
    Mat3 r{};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        double acc = 0.0;
        for (int k = 0; k < 3; ++k) acc += m[3 * i + k] * o.m[3 * k + j];
        r.m[3 * i + j] = acc;
      }
    }
    return r;
  }

  std::array<double, 3> apply(const std::array<double, 3>& v) const {
    return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
            m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
            m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
  }
};

// Gait parameters drawn once per sequence.
struct GaitParams {
  double freq = 1.0;
  double phase = 0.0;
  double hip_amp = 0.5;
  double knee_amp = 0.3;
  double arm_amp = 0.5;
  double sway_amp = 0.07;
  double depth = 3500.0;
  double x0 = 0.0, y0 = 0.0;
  double vx = 0.0, vz = 0.0;
};

GaitParams draw_params(const SynthConfig& cfg, Rng& rng) {
  GaitParams p;
  p.freq = rng.uniform(cfg.gait_freq_hz[0], cfg.gait_freq_hz[1]);
  p.phase = rng.uniform(0.0, kTau);
  p.hip_amp = rng.uniform(cfg.hip_amplitude[0], cfg.hip_amplitude[1]);
  p.knee_amp = rng.uniform(cfg.knee_amplitude[0], cfg.knee_amplitude[1]);
  p.arm_amp = rng.uniform(cfg.arm_amplitude[0], cfg.arm_amplitude[1]);
  p.sway_amp = rng.uniform(cfg.sway_amplitude[0], cfg.sway_amplitude[1]);
  p.depth = rng.uniform(cfg.depth_mm[0], cfg.depth_mm[1]);
  p.x0 = rng.uniform(-250.0, 250.0);
  p.y0 = rng.uniform(-100.0, 100.0);
  p.vx = rng.uniform(-30.0, 30.0);
  p.vz = rng.uniform(-20.0, 20.0);
  return p;
}

// Camera axes: x right, y down (image convention), z depth. The body hangs
// along +y from the pelvis; the spine chain points along -y.
Pose3d pose_at(const GaitParams& gp, const std::vector<double>& bones, double time,
               const SkeletonTopology& topo) {
  const double phi = kTau * gp.freq * time + gp.phase;
  const double hip_r = gp.hip_amp * std::sin(phi);
  const double hip_l = gp.hip_amp * std::sin(phi + kTau / 2.0);
  const double knee_r = gp.knee_amp * 0.5 * (1.0 + std::sin(phi + 0.6));
  const double knee_l = gp.knee_amp * 0.5 * (1.0 + std::sin(phi + kTau / 2.0 + 0.6));
  const double arm_r = gp.arm_amp * std::sin(phi + kTau / 2.0);
  const double arm_l = gp.arm_amp * std::sin(phi);
  const double elbow_r = 0.5 * gp.arm_amp * 0.5 * (1.0 + std::sin(phi + 0.3));
  const double elbow_l = 0.5 * gp.arm_amp * 0.5 * (1.0 + std::sin(phi + kTau / 2.0 + 0.3));
  const double sway = gp.sway_amp * std::sin(phi);

  const int J = topo.num_joints;
  std::vector<std::array<double, 3>> offsets(J, {0, 0, 0});
  auto set = [&](int joint, double x, double y, double z) {
    offsets[joint] = {x, y, z};
  };
  // Bone q reaches child joint q+1, so bones[q] is the child's offset norm.
  set(1, -bones[0], 0, 0);  // right hip
  set(2, 0, bones[1], 0);   // right knee (thigh hangs down)
  set(3, 0, bones[2], 0);
  set(4, bones[3], 0, 0);   // left hip
  set(5, 0, bones[4], 0);
  set(6, 0, bones[5], 0);
  set(7, 0, -bones[6], 0);  // spine rises
  set(8, 0, -bones[7], 0);
  set(9, 0, -bones[8], 0);
  set(10, 0, -bones[9], 0);
  set(11, bones[10], 0, 0);  // left shoulder
  set(12, 0, bones[11], 0);
  set(13, 0, bones[12], 0);
  set(14, -bones[13], 0, 0);  // right shoulder
  set(15, 0, bones[14], 0);
  set(16, 0, bones[15], 0);

  std::vector<Mat3> local(J, Mat3::identity());
  local[0] = Mat3::rot_z(0.5 * sway);
  local[1] = Mat3::rot_x(hip_r);
  local[2] = Mat3::rot_x(knee_r);
  local[4] = Mat3::rot_x(hip_l);
  local[5] = Mat3::rot_x(knee_l);
  local[7] = Mat3::rot_z(sway) * Mat3::rot_x(0.3 * gp.sway_amp * std::sin(phi + 1.0));
  local[8] = Mat3::rot_z(-0.5 * sway);
  local[10] = Mat3::rot_x(0.1 * gp.sway_amp * std::sin(2.0 * phi));
  local[11] = Mat3::rot_x(arm_l);
  local[12] = Mat3::rot_x(elbow_l);
  local[14] = Mat3::rot_x(arm_r);
  local[15] = Mat3::rot_x(elbow_r);

  std::vector<Mat3> world(J, Mat3::identity());
  std::vector<std::array<double, 3>> pos(J, {0, 0, 0});
  world[topo.root_index] = local[topo.root_index];
  for (const auto& [parent, child] : topo.bones) {
    const auto off = world[parent].apply(offsets[child]);
    pos[child] = {pos[parent][0] + off[0], pos[parent][1] + off[1], pos[parent][2] + off[2]};
    world[child] = world[parent] * local[child];
  }

  Pose3d pose(J);
  for (int j = 0; j < J; ++j) {
    pose.joint(j)[0] = pos[j][0];
    pose.joint(j)[1] = pos[j][1];
    pose.joint(j)[2] = pos[j][2];
  }
  return pose;
}

}  // namespace

std::vector<double> default_bone_lengths_mm() {
  return {120, 400, 420, 120, 400, 420, 120, 130, 110, 120, 150, 280, 250, 150, 280, 250};
}

Dataset synth_dataset(const SynthConfig& cfg, std::uint64_t seed) {
  std::vector<double> bones =
      cfg.bone_lengths_mm.empty() ? default_bone_lengths_mm() : cfg.bone_lengths_mm;
  const SkeletonTopology topo = default_topology_17();
  if (bones.size() != topo.bones.size()) {
    throw DataError("synth: bone length table must have " + std::to_string(topo.bones.size()) +
                    " entries");
  }
  // Symmetric pairs must be exactly equal; enforce by copying left to right.
  for (const auto& [left, right] : topo.symmetry_pairs) bones[right] = bones[left];

  Dataset ds;
  ds.topology = topo;
  ds.camera = cfg.camera;
  ds.seq2d.assign(cfg.num_sequences, PoseSeq2d{});
  ds.seq3d.assign(cfg.num_sequences, PoseSeq3d{});

  parallel_chunks(static_cast<std::size_t>(cfg.num_sequences), 1,
                  [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t s = begin; s < end; ++s) {
      Rng rng(derive_seed(seed, s));
      const GaitParams gp = draw_params(cfg, rng);
      Rng noise_rng(derive_seed(seed, 0x2d000000ull + s));

      PoseSeq3d& s3 = ds.seq3d[s];
      PoseSeq2d& s2 = ds.seq2d[s];
      s3.fps = cfg.fps;
      s2.fps = cfg.fps;
      s3.joint_names = topo.joint_names;
      s2.joint_names = topo.joint_names;
      s2.has_intrinsics = true;
      s2.intrinsics = cfg.camera;

      for (int t = 0; t < cfg.frames; ++t) {
        const double time = static_cast<double>(t) / cfg.fps;
        Pose3d rel = pose_at(gp, bones, time, topo);
        const std::array<double, 3> root = {gp.x0 + gp.vx * time, gp.y0,
                                            gp.depth + gp.vz * time};
        Pose3d abs = rel;
        for (int j = 0; j < topo.num_joints; ++j) {
          abs.joint(j)[0] += root[0];
          abs.joint(j)[1] += root[1];
          abs.joint(j)[2] += root[2];
        }
        Pose2d obs = project(abs, cfg.camera);
        if (cfg.noise_px > 0.0) {
          for (int j = 0; j < topo.num_joints; ++j) {
            obs.joint(j)[0] += cfg.noise_px * noise_rng.normal();
            obs.joint(j)[1] += cfg.noise_px * noise_rng.normal();
          }
        }
        s3.frames.push_back(std::move(rel));
        s3.root_trajectory.push_back(root);
        s2.frames.push_back(std::move(obs));
        s2.root_trajectory.push_back(root);
      }
    }
  });

  const int train_n = std::max(
      1, std::min(cfg.num_sequences - 1,
                  static_cast<int>(std::lround(cfg.train_fraction * cfg.num_sequences))));
  for (int s = 0; s < cfg.num_sequences; ++s) {
    if (s < train_n) {
      ds.train_indices.push_back(s);
    } else {
      ds.test_indices.push_back(s);
    }
  }
  return ds;
}

std::string write_dataset(const Dataset& ds, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const fs::path base(out_dir);

  save_camera((base / "camera.json").string(), ds.camera);
  save_topology((base / "topology.json").string(), ds.topology);

  DatasetManifest manifest;
  manifest.camera_path = "camera.json";
  manifest.topology_path = "topology.json";
  for (std::size_t s = 0; s < ds.seq2d.size(); ++s) {
    char name[64];
    std::snprintf(name, sizeof(name), "seq%03zu", s);
    const std::string p2d = std::string(name) + ".poses2d.json";
    const std::string p3d = std::string(name) + ".poses3d.json";
    save_seq2d((base / p2d).string(), ds.seq2d[s]);
    save_seq3d((base / p3d).string(), ds.seq3d[s]);
    manifest.sequences.emplace_back(p2d, p3d);
  }
  manifest.train_indices = ds.train_indices;
  manifest.test_indices = ds.test_indices;
  const std::string manifest_path = (base / "manifest.json").string();
  save_manifest(manifest_path, manifest);
  return manifest_path;
}

}  // namespace starpose
