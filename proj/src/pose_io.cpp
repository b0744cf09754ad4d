#include "starpose/pose_io.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "starpose/errors.hpp"

namespace starpose {

namespace {

using nlohmann::json;

json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    // e.what() carries the byte offset of the failure.
    throw DataError(path + ": " + e.what());
  }
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write file: " + path);
  out << text;
  if (!out) throw DataError("write failed: " + path);
}

double finite_number(const json& v, const std::string& where) {
  if (!v.is_number()) throw DataError(where + ": expected a finite number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw DataError(where + ": non-finite value rejected");
  return d;
}

void require_finite(double v, const std::string& where) {
  if (!std::isfinite(v)) throw NumericalError(where + ": refusing to write non-finite value");
}

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) throw DataError(where + ": unknown key " + it.key());
  }
}

void check_header(const json& j, const std::string& format, const std::string& path) {
  if (!j.is_object()) throw DataError(path + ": expected a JSON object");
  if (!j.contains("format") || j["format"] != format) {
    throw DataError(path + ": expected format \"" + format + "\"");
  }
  if (!j.contains("version") || !j["version"].is_number_integer() || j["version"].get<int>() != 1) {
    throw DataError(path + ": unsupported version");
  }
}

json trajectory_to_json(const std::vector<std::array<double, 3>>& traj, const std::string& path) {
  json out = json::array();
  for (const auto& p : traj) {
    for (double v : p) require_finite(v, path);
    out.push_back({p[0], p[1], p[2]});
  }
  return out;
}

std::vector<std::array<double, 3>> trajectory_from_json(const json& j, const std::string& where) {
  if (!j.is_array()) throw DataError(where + ": root_trajectory must be an array");
  std::vector<std::array<double, 3>> traj;
  traj.reserve(j.size());
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 3) throw DataError(where + ": trajectory entry must be [x,y,z]");
    traj.push_back({finite_number(p[0], where), finite_number(p[1], where),
                    finite_number(p[2], where)});
  }
  return traj;
}

}  // namespace

void save_seq3d(const std::string& path, const PoseSeq3d& seq) {
  json root;
  root["format"] = "starpose-poseseq3d";
  root["version"] = 1;
  require_finite(seq.fps, path);
  root["fps"] = seq.fps;
  root["joints"] = seq.joint_names;
  root["root_trajectory"] = trajectory_to_json(seq.root_trajectory, path);
  json frames = json::array();
  for (const auto& pose : seq.frames) {
    json fr = json::array();
    for (int j = 0; j < pose.joint_count(); ++j) {
      const double* p = pose.joint(j);
      for (int d = 0; d < 3; ++d) require_finite(p[d], path);
      fr.push_back({p[0], p[1], p[2]});
    }
    frames.push_back(std::move(fr));
  }
  root["frames"] = std::move(frames);
  write_file(path, root.dump(1) + "\n");
}

PoseSeq3d load_seq3d(const std::string& path) {
  const json root = parse_file(path);
  check_header(root, "starpose-poseseq3d", path);
  check_keys(root, {"format", "version", "fps", "joints", "root_trajectory", "frames"}, path);
  PoseSeq3d seq;
  seq.fps = finite_number(root.at("fps"), path);
  seq.joint_names = root.at("joints").get<std::vector<std::string>>();
  seq.root_trajectory = trajectory_from_json(root.at("root_trajectory"), path);
  const json& frames = root.at("frames");
  if (!frames.is_array()) throw DataError(path + ": frames must be an array");
  for (const auto& fr : frames) {
    Pose3d pose(static_cast<int>(fr.size()));
    for (std::size_t j = 0; j < fr.size(); ++j) {
      const json& joint = fr[j];
      if (!joint.is_array() || joint.size() != 3) {
        throw DataError(path + ": joint entry must be [x,y,z]");
      }
      for (int d = 0; d < 3; ++d) {
        pose.joint(static_cast<int>(j))[d] = finite_number(joint[d], path);
      }
    }
    if (!seq.frames.empty() && pose.joint_count() != seq.frames.front().joint_count()) {
      throw DataError(path + ": inconsistent joint count across frames");
    }
    seq.frames.push_back(std::move(pose));
  }
  return seq;
}

void save_seq2d(const std::string& path, const PoseSeq2d& seq) {
  json root;
  root["format"] = "starpose-poseseq2d";
  root["version"] = 1;
  require_finite(seq.fps, path);
  root["fps"] = seq.fps;
  root["joints"] = seq.joint_names;
  json frames = json::array();
  for (const auto& pose : seq.frames) {
    json fr = json::array();
    for (int j = 0; j < pose.joint_count(); ++j) {
      const double* p = pose.joint(j);
      require_finite(p[0], path);
      require_finite(p[1], path);
      fr.push_back({p[0], p[1]});
    }
    frames.push_back(std::move(fr));
  }
  root["keypoints"] = std::move(frames);
  if (seq.has_intrinsics) {
    root["intrinsics"] = {{"fx", seq.intrinsics.fx},
                          {"fy", seq.intrinsics.fy},
                          {"cx", seq.intrinsics.cx},
                          {"cy", seq.intrinsics.cy}};
  }
  if (!seq.root_trajectory.empty()) {
    root["root_trajectory"] = trajectory_to_json(seq.root_trajectory, path);
  }
  write_file(path, root.dump(1) + "\n");
}

PoseSeq2d load_seq2d(const std::string& path) {
  const json root = parse_file(path);
  check_header(root, "starpose-poseseq2d", path);
  check_keys(root,
             {"format", "version", "fps", "joints", "keypoints", "intrinsics", "root_trajectory"},
             path);
  PoseSeq2d seq;
  seq.fps = finite_number(root.at("fps"), path);
  seq.joint_names = root.at("joints").get<std::vector<std::string>>();
  const json& frames = root.at("keypoints");
  if (!frames.is_array()) throw DataError(path + ": keypoints must be an array");
  for (const auto& fr : frames) {
    Pose2d pose(static_cast<int>(fr.size()));
    for (std::size_t j = 0; j < fr.size(); ++j) {
      const json& joint = fr[j];
      if (!joint.is_array() || joint.size() != 2) {
        throw DataError(path + ": keypoint entry must be [u,v]");
      }
      pose.joint(static_cast<int>(j))[0] = finite_number(joint[0], path);
      pose.joint(static_cast<int>(j))[1] = finite_number(joint[1], path);
    }
    if (!seq.frames.empty() && pose.joint_count() != seq.frames.front().joint_count()) {
      throw DataError(path + ": inconsistent joint count across frames");
    }
    seq.frames.push_back(std::move(pose));
  }
  if (root.contains("intrinsics")) {
    const json& intr = root["intrinsics"];
    check_keys(intr, {"fx", "fy", "cx", "cy"}, path);
    seq.has_intrinsics = true;
    seq.intrinsics.fx = finite_number(intr.at("fx"), path);
    seq.intrinsics.fy = finite_number(intr.at("fy"), path);
    seq.intrinsics.cx = finite_number(intr.at("cx"), path);
    seq.intrinsics.cy = finite_number(intr.at("cy"), path);
  }
  if (root.contains("root_trajectory")) {
    seq.root_trajectory = trajectory_from_json(root["root_trajectory"], path);
  }
  return seq;
}

void save_topology(const std::string& path, const SkeletonTopology& topo) {
  json root;
  root["num_joints"] = topo.num_joints;
  root["root"] = topo.root_index;
  root["parents"] = topo.parents;
  json pairs = json::array();
  for (const auto& [l, r] : topo.symmetry_pairs) pairs.push_back({l, r});
  root["symmetry_pairs"] = std::move(pairs);
  root["joint_weights"] = topo.joint_weights;
  if (!topo.joint_names.empty()) root["joint_names"] = topo.joint_names;
  write_file(path, root.dump(1) + "\n");
}

SkeletonTopology load_topology(const std::string& path) {
  const json root = parse_file(path);
  if (!root.is_object()) throw DataError(path + ": expected a JSON object");
  check_keys(root, {"num_joints", "root", "parents", "symmetry_pairs", "joint_weights",
                    "joint_names"},
             path);
  std::vector<std::pair<int, int>> pairs;
  for (const auto& p : root.at("symmetry_pairs")) {
    if (!p.is_array() || p.size() != 2) throw DataError(path + ": symmetry pair must be [l,r]");
    pairs.emplace_back(p[0].get<int>(), p[1].get<int>());
  }
  std::vector<std::string> names;
  if (root.contains("joint_names")) names = root["joint_names"].get<std::vector<std::string>>();
  SkeletonTopology topo = make_topology(
      root.at("num_joints").get<int>(), root.at("root").get<int>(),
      root.at("parents").get<std::vector<int>>(), std::move(pairs),
      root.at("joint_weights").get<std::vector<double>>(), std::move(names));
  const auto violations = validate_topology(topo);
  if (!violations.empty()) {
    std::string msg = path + ": invalid topology:";
    for (const auto& v : violations) msg += " [" + v + "]";
    throw DataError(msg);
  }
  return topo;
}

void save_camera(const std::string& path, const CameraIntrinsics& intr) {
  json root = {{"fx", intr.fx}, {"fy", intr.fy}, {"cx", intr.cx}, {"cy", intr.cy}};
  write_file(path, root.dump(1) + "\n");
}

CameraIntrinsics load_camera(const std::string& path) {
  const json root = parse_file(path);
  if (!root.is_object()) throw DataError(path + ": expected a JSON object");
  check_keys(root, {"fx", "fy", "cx", "cy"}, path);
  CameraIntrinsics intr;
  intr.fx = finite_number(root.at("fx"), path);
  intr.fy = finite_number(root.at("fy"), path);
  intr.cx = finite_number(root.at("cx"), path);
  intr.cy = finite_number(root.at("cy"), path);
  if (!(intr.fx > 0.0) || !(intr.fy > 0.0)) {
    throw DataError(path + ": focal lengths must be positive");
  }
  return intr;
}

void save_manifest(const std::string& path, const DatasetManifest& manifest) {
  json root;
  root["format"] = "starpose-manifest";
  root["version"] = 1;
  root["camera"] = manifest.camera_path;
  root["topology"] = manifest.topology_path;
  json seqs = json::array();
  for (const auto& [p2d, p3d] : manifest.sequences) {
    seqs.push_back({{"poses2d", p2d}, {"poses3d", p3d}});
  }
  root["sequences"] = std::move(seqs);
  root["train"] = manifest.train_indices;
  root["test"] = manifest.test_indices;
  write_file(path, root.dump(1) + "\n");
}

DatasetManifest load_manifest(const std::string& path) {
  const json root = parse_file(path);
  check_header(root, "starpose-manifest", path);
  check_keys(root, {"format", "version", "camera", "topology", "sequences", "train", "test"},
             path);
  DatasetManifest m;
  m.camera_path = root.at("camera").get<std::string>();
  m.topology_path = root.at("topology").get<std::string>();
  for (const auto& s : root.at("sequences")) {
    check_keys(s, {"poses2d", "poses3d"}, path);
    m.sequences.emplace_back(s.at("poses2d").get<std::string>(),
                             s.at("poses3d").get<std::string>());
  }
  m.train_indices = root.at("train").get<std::vector<int>>();
  m.test_indices = root.at("test").get<std::vector<int>>();
  const int n = static_cast<int>(m.sequences.size());
  for (int idx : m.train_indices) {
    if (idx < 0 || idx >= n) throw DataError(path + ": train index out of range");
  }
  for (int idx : m.test_indices) {
    if (idx < 0 || idx >= n) throw DataError(path + ": test index out of range");
  }
  return m;
}

Dataset load_dataset(const std::string& manifest_path) {
  const DatasetManifest m = load_manifest(manifest_path);
  const std::filesystem::path base = std::filesystem::path(manifest_path).parent_path();
  auto resolve = [&base](const std::string& rel) { return (base / rel).string(); };

  Dataset ds;
  ds.topology = load_topology(resolve(m.topology_path));
  ds.camera = load_camera(resolve(m.camera_path));
  for (const auto& [p2d, p3d] : m.sequences) {
    ds.seq2d.push_back(load_seq2d(resolve(p2d)));
    ds.seq3d.push_back(load_seq3d(resolve(p3d)));
    const auto& s2 = ds.seq2d.back();
    const auto& s3 = ds.seq3d.back();
    if (s2.frame_count() != s3.frame_count()) {
      throw DataError(manifest_path + ": 2D/3D frame counts differ for " + p2d);
    }
    if (s3.root_trajectory.size() != s3.frames.size()) {
      throw DataError(manifest_path + ": 3D sequence missing root trajectory entries: " + p3d);
    }
  }
  ds.train_indices = m.train_indices;
  ds.test_indices = m.test_indices;
  return ds;
}

}  // namespace starpose
