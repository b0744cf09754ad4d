#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "starpose/pose.hpp"

namespace starpose {

// Procedural motion generator settings. Angle amplitudes are radians,
// frequencies Hz, depths camera-space millimetres.
struct SynthConfig {
  int num_sequences = 16;
  int frames = 96;
  double fps = 25.0;
  double noise_px = 0.0;           // isotropic Gaussian pixel noise on 2D
  double train_fraction = 0.75;
  std::array<double, 2> gait_freq_hz{0.6, 1.2};
  std::array<double, 2> hip_amplitude{0.3, 0.6};
  std::array<double, 2> knee_amplitude{0.2, 0.5};
  std::array<double, 2> arm_amplitude{0.3, 0.6};
  std::array<double, 2> sway_amplitude{0.04, 0.10};
  std::array<double, 2> depth_mm{2800.0, 4200.0};
  std::vector<double> bone_lengths_mm;  // 16 entries in bone order; defaulted
  CameraIntrinsics camera{1145.04, 1145.04, 512.0, 512.0};
};

struct RunConfig {
  // diffusion
  int steps = 50;
  double beta_min = 1e-4;
  double beta_max = 2e-3;
  int ddim_steps = 5;
  // mixture
  int gmm_components = 5;
  int gmm_max_iters = 200;
  double gmm_tol = 1e-7;
  // model dimensions
  int hidden = 64;
  int heads = 4;
  int blocks = 3;
  int context_dim = 32;
  int context_embed = 32;
  int context_frames = 27;  // 2D window length f
  int hpim_dim = 32;
  int hpim_out = 32;
  int hpim_heads = 4;
  int step_embed_dim = 32;
  int history = 8;  // L
  // guidance
  double lambda_p = 1.0;
  double lambda_s = 1.0;
  double lambda_b = 0.01;
  double lambda_d = 0.01;
  double rho = 0.02;
  std::string rho_schedule = "constant";       // or "sqrt1ma"
  std::string gradient_mode = "approximate";   // or "exact"
  bool guidance_enabled = true;
  bool train_stpg = true;
  // sampling
  int hypotheses = 5;  // N
  std::string variant = "mu-consistent";  // or "literal"
  bool no_hpim = false;
  // training
  int epochs = 15;
  int batch_size = 32;
  double lr = 1e-4;
  double lr_decay = 0.9;
  int lr_decay_every = 10;
  int pretrain_epochs = 30;
  int pretrain_batch = 64;
  double pretrain_lr = 1e-3;
  // paths
  std::string model_checkpoint;
  std::string topology_path;
  // misc
  std::uint64_t seed = 1;
  SynthConfig synth;

  // Throws on inconsistent dimensions or ranges.
  void validate() const;
};

// Loads a JSON run configuration. Every key is checked against the schema;
// unknown keys are errors. Missing keys keep their defaults.
RunConfig load_config(const std::string& path);
RunConfig parse_config_text(const std::string& text);

// The merged effective configuration as canonical JSON (sorted keys).
std::string dump_config(const RunConfig& cfg);

}  // namespace starpose
