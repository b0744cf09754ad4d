#pragma once

#include <string>
#include <utility>
#include <vector>

#include "starpose/pose.hpp"
#include "starpose/skeleton.hpp"

namespace starpose {

// All on-disk formats are JSON with fixed key sets; unknown keys, missing
// fields and non-finite numbers are rejected. Doubles are written in the
// shortest representation that parses back to the same bits, so a
// save/load round trip is bit-identical for finite values.

void save_seq3d(const std::string& path, const PoseSeq3d& seq);
PoseSeq3d load_seq3d(const std::string& path);

void save_seq2d(const std::string& path, const PoseSeq2d& seq);
PoseSeq2d load_seq2d(const std::string& path);

void save_topology(const std::string& path, const SkeletonTopology& topo);
SkeletonTopology load_topology(const std::string& path);

void save_camera(const std::string& path, const CameraIntrinsics& intr);
CameraIntrinsics load_camera(const std::string& path);

// Dataset manifest: camera and topology files plus paired 2D/3D sequence
// paths and a train/test split. Paths are stored relative to the manifest.
struct DatasetManifest {
  std::string camera_path;
  std::string topology_path;
  std::vector<std::pair<std::string, std::string>> sequences;  // (2d, 3d)
  std::vector<int> train_indices;
  std::vector<int> test_indices;
};

void save_manifest(const std::string& path, const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::string& path);

// A manifest with every referenced file loaded.
struct Dataset {
  SkeletonTopology topology;
  CameraIntrinsics camera;
  std::vector<PoseSeq2d> seq2d;
  std::vector<PoseSeq3d> seq3d;
  std::vector<int> train_indices;
  std::vector<int> test_indices;
};

Dataset load_dataset(const std::string& manifest_path);

}  // namespace starpose
