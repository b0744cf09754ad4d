#pragma once

#include <cstdint>
#include <string>

#include "starpose/config.hpp"
#include "starpose/pose_io.hpp"

namespace starpose {

// The default bone-length table (mm) in bone order for the 17-joint body.
std::vector<double> default_bone_lengths_mm();

// Procedural gait generator: per-sequence sinusoidal joint angles over a
// fixed-bone-length kinematic tree, projected through the configured
// camera. Left and right limb lengths are exactly equal, so the symmetry
// and bone-variance losses vanish on ground truth; with zero pixel noise
// the reprojection loss vanishes too.
Dataset synth_dataset(const SynthConfig& cfg, std::uint64_t seed);

// Writes sequences, camera, topology and the manifest under out_dir.
// Returns the manifest path.
std::string write_dataset(const Dataset& ds, const std::string& out_dir);

}  // namespace starpose
