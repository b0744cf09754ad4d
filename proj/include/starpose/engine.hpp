#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "starpose/config.hpp"
#include "starpose/context_encoder.hpp"
#include "starpose/denoiser.hpp"
#include "starpose/hpim.hpp"
#include "starpose/mixture.hpp"
#include "starpose/pose_io.hpp"
#include "starpose/schedule.hpp"
#include "starpose/stpg.hpp"
#include "starpose/tensor.hpp"

namespace starpose {

enum class ReverseVariant { MuConsistent, Literal };

ReverseVariant parse_variant(const std::string& name);

// Everything needed to run inference. Parameter tables are immutable after
// training; the bundle can be shared across threads.
struct ModelBundle {
  SkeletonTopology topology;
  nn::NormalizedGraph adjacency;
  GmmModel gmm;
  DiffusionSchedule schedule;
  ParamTable context;   // frozen 2D context encoder
  ParamTable denoiser;
  ParamTable hpim;
  ContextEncoderConfig context_cfg;
  DenoiserConfig denoiser_cfg;
  HpimConfig hpim_cfg;
  int context_frames = 27;
};

// The network predicts the residual displacement h_k - mu - sqrt(a_k)(h0 -
// mu), whose sensitivity to h_k is step-independent; dividing by
// sqrt(1 - a_k) turns it into the noise estimate eps_hat used everywhere.
std::vector<double> predict_noise(const ModelBundle& bundle, const std::vector<double>& h_k,
                                  const std::vector<double>& f_2d,
                                  const std::vector<double>& f_his, int k,
                                  DenoiserTape* tape = nullptr);

// Noising step: h_k = mu + sqrt(a_k)(h0 - mu) + sqrt(1 - a_k) * eps.
std::vector<double> forward_diffuse_with_noise(const std::vector<double>& h0,
                                               const std::vector<double>& mu, double alpha_k,
                                               const std::vector<double>& eps);
std::vector<double> forward_diffuse(const std::vector<double>& h0, const GmmModel& gmm,
                                    const DiffusionSchedule& schedule, int k,
                                    std::uint64_t seed);

// Clean-pose estimate: h0|k = mu + (h_k - mu - sqrt(1 - a_k) eps_hat)/sqrt(a_k).
// Exact algebraic inverse of the noising step when eps_hat equals eps.
std::vector<double> estimate_clean(const std::vector<double>& h_k,
                                   const std::vector<double>& eps_hat,
                                   const std::vector<double>& mu, double alpha_k);

// One reverse update from step k to k_prev < k (alpha at step 0 is 1).
// The mu-consistent variant re-centres around the mixture mean; the literal
// variant drops the mean shift: sqrt(a_prev) h0|k + sqrt(1-a_prev) eps_hat.
std::vector<double> reverse_step(const std::vector<double>& h_k,
                                 const std::vector<double>& eps_hat,
                                 const std::vector<double>& mu,
                                 const DiffusionSchedule& schedule, int k, int k_prev,
                                 ReverseVariant variant);

struct HypothesisSampleResult {
  std::vector<Pose3d> hypotheses;
  Pose3d mean;
  std::vector<std::vector<double>> energy_traces;  // per hypothesis, per reverse step
  std::vector<double> final_energies;              // energy of each final pose
  int guidance_depth_skips = 0;  // guidance evaluations skipped on depth failure
};

// Draws N initial poses from the mixture and runs the guided reverse
// process along the configured step subsequence. The returned mean is the
// arithmetic mean of the hypotheses.
HypothesisSampleResult sample_hypotheses(const ModelBundle& bundle,
                                         const std::vector<double>& f_2d,
                                         const std::vector<double>& f_his,
                                         const GuidanceContext& ctx, const RunConfig& cfg,
                                         std::uint64_t seed);

struct InferenceFrameTrace {
  std::vector<double> mean_energy_per_step;
  double final_energy = 0.0;
};

struct InferenceTrace {
  std::vector<InferenceFrameTrace> frames;
  std::vector<std::string> warnings;
};

// Frame-by-frame autoregressive inference. Frames are processed strictly
// in order; each output depends only on inputs at or before its index.
PoseSeq3d infer_sequence(const ModelBundle& bundle, const PoseSeq2d& seq2d, const RunConfig& cfg,
                         InferenceTrace* trace = nullptr);

struct TrainEpochLog {
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;       // mean combined loss per example
  double diff_loss = 0.0;  // mean reconstruction term
  double stpg_loss = 0.0;  // mean weighted physical terms
};

struct TrainResult {
  ModelBundle bundle;
  std::vector<TrainEpochLog> log;
  std::vector<double> pretrain_curve;
  std::vector<double> em_log_likelihoods;
  std::vector<std::string> notes;
};

// Full training pipeline: mixture fit, context pretraining (frozen after),
// then denoiser + history-encoder training with teacher-forced history.
TrainResult train(const Dataset& dataset, const RunConfig& cfg, std::uint64_t seed);

// Checkpoint packing. The tensor table is self-contained: model parameters
// plus mixture, topology and the dimension/schedule metadata.
ParamTable bundle_to_tensors(const ModelBundle& bundle);
ModelBundle bundle_from_tensors(const ParamTable& tensors);
ModelBundle load_bundle(const std::string& checkpoint_path);
void save_bundle(const std::string& checkpoint_path, const ModelBundle& bundle);

// The flattened root-relative pose of one frame.
std::vector<double> flatten_pose(const Pose3d& pose);

// Trailing 2D context window [max(0, t-f+1), t], clamped at the start.
std::vector<Pose2d> context_window(const PoseSeq2d& seq, int t, int frames);

}  // namespace starpose
