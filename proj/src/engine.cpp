#include "starpose/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "starpose/checkpoint.hpp"
#include "starpose/errors.hpp"
#include "starpose/optimizer.hpp"
#include "starpose/threading.hpp"

namespace starpose {

namespace {

constexpr std::uint64_t kSeedGmm = 1;
constexpr std::uint64_t kSeedPretrain = 2;
constexpr std::uint64_t kSeedDenoiserInit = 3;
constexpr std::uint64_t kSeedHpimInit = 4;
constexpr std::uint64_t kSeedEpochShuffle = 1000;
constexpr std::uint64_t kSeedExampleNoise = 5000;

void check_same_size(const std::vector<double>& a, const std::vector<double>& b,
                     const char* what) {
  if (a.size() != b.size()) throw ShapeMismatch(std::string(what) + ": size mismatch");
}

double rho_at(const RunConfig& cfg, double alpha_k) {
  return cfg.rho_schedule == "sqrt1ma" ? cfg.rho * std::sqrt(1.0 - alpha_k) : cfg.rho;
}

EnergyWeights weights_from(const RunConfig& cfg) {
  EnergyWeights w;
  w.lambda_p = cfg.lambda_p;
  w.lambda_s = cfg.lambda_s;
  w.lambda_b = cfg.lambda_b;
  w.lambda_d = cfg.lambda_d;
  w.rho = cfg.rho;
  return w;
}

double safe_energy(const Pose3d& h, const GuidanceContext& ctx, const EnergyWeights& w) {
  try {
    return energy(h, ctx, w);
  } catch (const NonPositiveDepth&) {
    return std::numeric_limits<double>::infinity();
  }
}

}  // namespace

ReverseVariant parse_variant(const std::string& name) {
  if (name == "mu-consistent") return ReverseVariant::MuConsistent;
  if (name == "literal") return ReverseVariant::Literal;
  throw DataError("unknown reverse variant: " + name);
}

std::vector<double> predict_noise(const ModelBundle& bundle, const std::vector<double>& h_k,
                                  const std::vector<double>& f_2d,
                                  const std::vector<double>& f_his, int k, DenoiserTape* tape) {
  const std::vector<double> k_emb = step_embedding(k, bundle.denoiser_cfg.step_dim);
  std::vector<double> out = denoiser_forward(bundle.denoiser, bundle.denoiser_cfg,
                                             bundle.adjacency, h_k, f_2d, f_his, k_emb, tape);
  const double scale = 1.0 / std::sqrt(1.0 - bundle.schedule.alpha_at(k));
  for (auto& v : out) v *= scale;
  return out;
}

std::vector<double> forward_diffuse_with_noise(const std::vector<double>& h0,
                                               const std::vector<double>& mu, double alpha_k,
                                               const std::vector<double>& eps) {
  check_same_size(h0, mu, "forward diffuse");
  check_same_size(h0, eps, "forward diffuse");
  const double sa = std::sqrt(alpha_k);
  const double sn = std::sqrt(1.0 - alpha_k);
  std::vector<double> out(h0.size());
  for (std::size_t i = 0; i < h0.size(); ++i) {
    out[i] = mu[i] + sa * (h0[i] - mu[i]) + sn * eps[i];
  }
  return out;
}

std::vector<double> forward_diffuse(const std::vector<double>& h0, const GmmModel& gmm,
                                    const DiffusionSchedule& schedule, int k,
                                    std::uint64_t seed) {
  if (k < 1 || k > schedule.steps) throw NumericalError("forward diffuse: step out of range");
  Rng rng(seed);
  const std::vector<double> eps = gmm_centered_noise(gmm, rng);
  return forward_diffuse_with_noise(h0, gmm.mixture_mean.data, schedule.alpha_at(k), eps);
}

std::vector<double> estimate_clean(const std::vector<double>& h_k,
                                   const std::vector<double>& eps_hat,
                                   const std::vector<double>& mu, double alpha_k) {
  check_same_size(h_k, eps_hat, "estimate clean");
  check_same_size(h_k, mu, "estimate clean");
  const double inv_sa = 1.0 / std::sqrt(alpha_k);
  const double sn = std::sqrt(1.0 - alpha_k);
  std::vector<double> out(h_k.size());
  for (std::size_t i = 0; i < h_k.size(); ++i) {
    out[i] = mu[i] + inv_sa * (h_k[i] - mu[i] - sn * eps_hat[i]);
  }
  return out;
}

std::vector<double> reverse_step(const std::vector<double>& h_k,
                                 const std::vector<double>& eps_hat,
                                 const std::vector<double>& mu,
                                 const DiffusionSchedule& schedule, int k, int k_prev,
                                 ReverseVariant variant) {
  if (k < 1 || k > schedule.steps) throw NumericalError("reverse step: step out of range");
  if (k_prev < 0 || k_prev >= k) throw NumericalError("reverse step: ordering violation");
  const std::vector<double> h0k = estimate_clean(h_k, eps_hat, mu, schedule.alpha_at(k));
  const double sa = std::sqrt(schedule.alpha_at(k_prev));
  const double sn = std::sqrt(1.0 - schedule.alpha_at(k_prev));
  std::vector<double> out(h_k.size());
  if (variant == ReverseVariant::MuConsistent) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = mu[i] + sa * (h0k[i] - mu[i]) + sn * eps_hat[i];
    }
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = sa * h0k[i] + sn * eps_hat[i];
    }
  }
  return out;
}

std::vector<double> flatten_pose(const Pose3d& pose) { return pose.xyz; }

std::vector<Pose2d> context_window(const PoseSeq2d& seq, int t, int frames) {
  const int start = std::max(0, t - frames + 1);
  std::vector<Pose2d> window;
  window.reserve(t - start + 1);
  for (int i = start; i <= t; ++i) window.push_back(seq.frames[i]);
  return window;
}

HypothesisSampleResult sample_hypotheses(const ModelBundle& bundle,
                                         const std::vector<double>& f_2d,
                                         const std::vector<double>& f_his,
                                         const GuidanceContext& ctx, const RunConfig& cfg,
                                         std::uint64_t seed) {
  const int N = cfg.hypotheses;
  const DiffusionSchedule& sched = bundle.schedule;
  if (cfg.ddim_steps > sched.steps) {
    throw NumericalError("sampling: ddim steps exceed the schedule length");
  }
  const std::vector<int> steps = ddim_subsequence(sched.steps, cfg.ddim_steps);
  const ReverseVariant variant = parse_variant(cfg.variant);
  const EnergyWeights weights = weights_from(cfg);
  const bool guided = cfg.guidance_enabled && cfg.rho != 0.0 &&
                      (cfg.lambda_p > 0 || cfg.lambda_s > 0 || cfg.lambda_b > 0 ||
                       cfg.lambda_d > 0);
  const bool exact_grad = cfg.gradient_mode == "exact";
  const std::vector<double>& mu = bundle.gmm.mixture_mean.data;
  const int dim = static_cast<int>(mu.size());

  HypothesisSampleResult result;
  result.hypotheses.assign(N, Pose3d());
  result.energy_traces.assign(N, {});
  result.final_energies.assign(N, 0.0);
  std::vector<int> depth_skips(N, 0);

  parallel_chunks(static_cast<std::size_t>(N), 1, [&](std::size_t, std::size_t begin,
                                                      std::size_t end) {
    ParamTable scratch_grads;  // reused by the exact-gradient mode
    if (exact_grad) scratch_grads = zeros_like(bundle.denoiser);
    for (std::size_t n = begin; n < end; ++n) {
      Rng rng(derive_seed(seed, n));
      std::vector<double> h = gmm_sample(bundle.gmm, rng);
      std::vector<double> trace;
      trace.reserve(steps.size());
      for (std::size_t si = steps.size(); si-- > 0;) {
        const int k = steps[si];
        const int k_prev = si == 0 ? 0 : steps[si - 1];
        DenoiserTape tape;
        const std::vector<double> eps_hat =
            predict_noise(bundle, h, f_2d, f_his, k, exact_grad ? &tape : nullptr);
        const std::vector<double> h0k =
            estimate_clean(h, eps_hat, mu, sched.alpha_at(k));
        const Pose3d pose0k(h0k);
        trace.push_back(safe_energy(pose0k, ctx, weights));

        std::vector<double> h_next = reverse_step(h, eps_hat, mu, sched, k, k_prev, variant);
        if (guided) {
          bool ok = true;
          Pose3d g0;
          try {
            g0 = energy_grad(pose0k, ctx, weights);
          } catch (const NonPositiveDepth&) {
            ok = false;
            ++depth_skips[n];
          }
          if (ok) {
            const double inv_sa = 1.0 / std::sqrt(sched.alpha_at(k));
            std::vector<double> g_hk(dim);
            if (exact_grad) {
              // dE/dh_k = (1/sqrt(a_k)) (g0 - sqrt(1-a_k) * (d eps/d h_k)^T g0);
              // the raw network output is sqrt(1-a_k) * eps_hat, so its
              // VJP against g0 is already the scaled term needed here.
              std::vector<double> vjp;
              denoiser_backward(bundle.denoiser, bundle.denoiser_cfg, bundle.adjacency, tape,
                                g0.xyz, scratch_grads, &vjp, nullptr);
              for (int i = 0; i < dim; ++i) g_hk[i] = inv_sa * (g0.xyz[i] - vjp[i]);
            } else {
              for (int i = 0; i < dim; ++i) g_hk[i] = inv_sa * g0.xyz[i];
            }
            const double rho_k = rho_at(cfg, sched.alpha_at(k));
            for (int i = 0; i < dim; ++i) h_next[i] -= rho_k * g_hk[i];
          }
        }
        h = std::move(h_next);
      }
      result.hypotheses[n] = Pose3d(h);
      result.final_energies[n] = safe_energy(result.hypotheses[n], ctx, weights);
      result.energy_traces[n] = std::move(trace);
    }
  });

  for (int n = 0; n < N; ++n) result.guidance_depth_skips += depth_skips[n];

  Pose3d mean(dim / 3);
  for (int n = 0; n < N; ++n) {
    for (int i = 0; i < dim; ++i) mean.xyz[i] += result.hypotheses[n].xyz[i];
  }
  for (int i = 0; i < dim; ++i) mean.xyz[i] /= N;
  result.mean = std::move(mean);
  return result;
}

PoseSeq3d infer_sequence(const ModelBundle& bundle, const PoseSeq2d& seq2d, const RunConfig& cfg,
                         InferenceTrace* trace) {
  const int frames = seq2d.frame_count();
  if (frames < 1) throw DataError("inference: empty sequence");
  const int J = bundle.topology.num_joints;
  if (seq2d.frames.front().joint_count() != J) {
    throw ShapeMismatch("inference: sequence joint count differs from the model topology");
  }
  if (cfg.history > bundle.hpim_cfg.max_window) {
    throw DataError("config history exceeds the trained window capacity");
  }

  const bool have_traj = seq2d.root_trajectory.size() == static_cast<std::size_t>(frames);
  const bool have_intr = seq2d.has_intrinsics;
  const bool reprojection = have_traj && have_intr;
  if (trace && cfg.lambda_p > 0 && !reprojection) {
    trace->warnings.push_back(
        "reprojection term disabled: the input sequence carries no root trajectory or "
        "intrinsics");
  }

  PoseSeq3d out;
  out.fps = seq2d.fps;
  out.joint_names = seq2d.joint_names;
  if (have_traj) out.root_trajectory = seq2d.root_trajectory;
  out.frames.reserve(frames);

  HistoryBuffer buffer(cfg.history);
  const std::vector<double> f_his_zero(bundle.hpim_cfg.out_dim, 0.0);

  for (int t = 0; t < frames; ++t) {
    const std::vector<Pose2d> window2d = context_window(seq2d, t, bundle.context_frames);
    const std::vector<double> f_2d =
        encode_context(bundle.context, bundle.context_cfg, window2d);
    const std::vector<double> f_his =
        cfg.no_hpim ? f_his_zero
                    : encode_history(bundle.hpim, bundle.hpim_cfg, buffer, bundle.topology);

    GuidanceContext ctx;
    ctx.observed_2d = seq2d.frames[t];
    ctx.intrinsics = seq2d.intrinsics;
    ctx.topology = bundle.topology;
    ctx.window = buffer.poses_3d();
    if (!buffer.empty()) ctx.prev_pose = buffer.entry(buffer.size() - 1).predicted_3d;
    if (have_traj) ctx.root_position = seq2d.root_trajectory[t];
    ctx.reprojection_enabled = reprojection;
    ctx.window_capacity = cfg.history;

    const HypothesisSampleResult sample = sample_hypotheses(
        bundle, f_2d, f_his, ctx, cfg, derive_seed(cfg.seed, static_cast<std::uint64_t>(t)));

    if (trace) {
      InferenceFrameTrace ft;
      const std::size_t steps = sample.energy_traces.empty() ? 0 : sample.energy_traces[0].size();
      ft.mean_energy_per_step.assign(steps, 0.0);
      for (const auto& tr : sample.energy_traces) {
        for (std::size_t i = 0; i < steps; ++i) ft.mean_energy_per_step[i] += tr[i];
      }
      for (auto& v : ft.mean_energy_per_step) v /= static_cast<double>(cfg.hypotheses);
      double fe = 0.0;
      for (double e : sample.final_energies) fe += e;
      ft.final_energy = fe / static_cast<double>(cfg.hypotheses);
      trace->frames.push_back(std::move(ft));
    }

    out.frames.push_back(sample.mean);
    buffer.push(seq2d.frames[t], sample.mean, t);
  }
  return out;
}

namespace {

// Per-frame training example over the teacher-forced history.
struct TrainExample {
  int seq = 0;
  int frame = 0;
};

struct ExampleLoss {
  double diff = 0.0;
  double stpg = 0.0;
  int depth_skips = 0;  // physical terms skipped on reprojection depth failure
};

struct TrainContext {
  const Dataset& ds;
  const RunConfig& cfg;
  const GmmModel& gmm;
  const DiffusionSchedule& schedule;
  const nn::NormalizedGraph& adjacency;
  const DenoiserConfig& den_cfg;
  const HpimConfig& hpim_cfg;
  const std::vector<std::vector<std::vector<double>>>& f2d;      // [seq][frame]
  const std::vector<std::vector<std::vector<double>>>& gt_flat;  // [seq][frame]
  const ParamTable& den_params;
  const ParamTable& hpim_params;
  ReverseVariant variant;
  EnergyWeights weights;
};

ExampleLoss train_example(const TrainContext& tc, const TrainExample& ex, std::uint64_t ex_seed,
                          ParamTable& den_grads, ParamTable& hpim_grads) {
  const RunConfig& cfg = tc.cfg;
  const PoseSeq2d& seq2 = tc.ds.seq2d[ex.seq];
  const PoseSeq3d& seq3 = tc.ds.seq3d[ex.seq];
  const int t = ex.frame;
  const SkeletonTopology& topo = tc.ds.topology;

  // Teacher-forced history: ground-truth 3D plus observed 2D.
  HistoryBuffer buffer(cfg.history);
  const int h_start = std::max(0, t - cfg.history);
  for (int i = h_start; i < t; ++i) {
    buffer.push(seq2.frames[i], seq3.frames[i], i);
  }

  HpimTape hpim_tape;
  std::vector<double> f_his;
  if (cfg.no_hpim) {
    f_his.assign(tc.hpim_cfg.out_dim, 0.0);
  } else {
    f_his = encode_history(tc.hpim_params, tc.hpim_cfg, buffer, topo, &hpim_tape);
  }

  Rng rng(ex_seed);
  const int k = 1 + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(cfg.steps)));
  const std::vector<double> eps = gmm_centered_noise(tc.gmm, rng);
  const std::vector<double>& mu = tc.gmm.mixture_mean.data;
  const std::vector<double>& h0 = tc.gt_flat[ex.seq][t];
  const double alpha_k = tc.schedule.alpha_at(k);
  const double alpha_prev = tc.schedule.alpha_at(k - 1);

  const std::vector<double> h_k = forward_diffuse_with_noise(h0, mu, alpha_k, eps);
  const std::vector<double> h_prev_true = forward_diffuse_with_noise(h0, mu, alpha_prev, eps);

  const std::vector<double> k_emb = step_embedding(k, tc.den_cfg.step_dim);
  DenoiserTape tape;
  std::vector<double> eps_hat =
      denoiser_forward(tc.den_params, tc.den_cfg, tc.adjacency, h_k, tc.f2d[ex.seq][t], f_his,
                       k_emb, &tape);
  // The raw output is the scaled residual; the noise estimate divides out
  // the step's noise magnitude.
  const double noise_scale = std::sqrt(1.0 - alpha_k);
  for (auto& v : eps_hat) v /= noise_scale;

  const std::vector<double> h_prev_recon =
      reverse_step(h_k, eps_hat, mu, tc.schedule, k, k - 1, tc.variant);

  // d(reconstruction)/d(eps_hat) is the same scalar for every coordinate.
  const double c_k = std::sqrt(1.0 - alpha_prev) -
                     std::sqrt(alpha_prev) * std::sqrt(1.0 - alpha_k) / std::sqrt(alpha_k);

  const std::size_t dim = h0.size();
  std::vector<double> d_eps(dim, 0.0);
  ExampleLoss loss;
  for (std::size_t i = 0; i < dim; ++i) {
    const double diff = h_prev_recon[i] - h_prev_true[i];
    loss.diff += diff * diff;
    d_eps[i] = 2.0 * diff * c_k;
  }

  if (cfg.train_stpg) {
    const std::vector<double> h0k = estimate_clean(h_k, eps_hat, mu, alpha_k);
    const Pose3d pose0k(h0k);

    GuidanceContext ctx;
    ctx.observed_2d = seq2.frames[t];
    ctx.intrinsics = tc.ds.camera;
    ctx.topology = topo;
    for (int i = h_start; i < t; ++i) ctx.window.push_back(seq3.frames[i]);
    if (t > 0) ctx.prev_pose = seq3.frames[t - 1];
    ctx.root_position = seq3.root_trajectory[t];
    ctx.reprojection_enabled = true;
    ctx.window_capacity = cfg.history;

    try {
      loss.stpg = energy(pose0k, ctx, tc.weights);
      const Pose3d g0 = energy_grad(pose0k, ctx, tc.weights);
      const double factor = -std::sqrt(1.0 - alpha_k) / std::sqrt(alpha_k);
      for (std::size_t i = 0; i < dim; ++i) d_eps[i] += factor * g0.xyz[i];
    } catch (const NonPositiveDepth&) {
      // The current estimate wandered behind the camera; leave the
      // reconstruction term to pull it back and skip the physical terms.
      loss.stpg = 0.0;
      ++loss.depth_skips;
    }
  }

  for (auto& v : d_eps) v /= noise_scale;  // chain through the output scaling
  std::vector<double> d_fhis;
  denoiser_backward(tc.den_params, tc.den_cfg, tc.adjacency, tape, d_eps, den_grads, nullptr,
                    cfg.no_hpim ? nullptr : &d_fhis);
  if (!cfg.no_hpim) {
    hpim_backward(tc.hpim_params, tc.hpim_cfg, hpim_tape, topo, d_fhis, hpim_grads);
  }
  return loss;
}

}  // namespace

TrainResult train(const Dataset& ds, const RunConfig& cfg, std::uint64_t seed) {
  if (ds.train_indices.empty()) throw DataError("training: empty train split");
  const SkeletonTopology& topo = ds.topology;
  const int J = topo.num_joints;
  for (int s : ds.train_indices) {
    if (ds.seq3d[s].frames.empty()) throw DataError("training: empty sequence in train split");
    if (ds.seq3d[s].frames.front().joint_count() != J) {
      throw ShapeMismatch("training: sequence joint count differs from topology");
    }
  }

  TrainResult result;
  ModelBundle& bundle = result.bundle;
  bundle.topology = topo;
  bundle.adjacency = skeleton_graph(topo);
  bundle.schedule = linear_schedule(cfg.steps, cfg.beta_min, cfg.beta_max);
  bundle.context_cfg = ContextEncoderConfig{cfg.context_embed, cfg.context_dim};
  bundle.denoiser_cfg = DenoiserConfig{cfg.hidden,   cfg.heads,    cfg.blocks,
                                       cfg.context_dim, cfg.hpim_out, cfg.step_embed_dim};
  bundle.hpim_cfg = HpimConfig{cfg.hpim_dim, cfg.hpim_out, cfg.hpim_heads, cfg.history};
  bundle.context_frames = cfg.context_frames;

  // Mixture over flattened root-relative training poses.
  std::size_t total_frames = 0;
  for (int s : ds.train_indices) total_frames += ds.seq3d[s].frames.size();
  Tensor gmm_data({static_cast<std::int64_t>(total_frames), 3 * J});
  std::int64_t row = 0;
  for (int s : ds.train_indices) {
    for (const Pose3d& pose : ds.seq3d[s].frames) {
      std::copy(pose.xyz.begin(), pose.xyz.end(), gmm_data.row(row));
      ++row;
    }
  }
  EmOptions em_opts;
  em_opts.max_iters = cfg.gmm_max_iters;
  em_opts.tol = cfg.gmm_tol;
  EmResult em = fit_em(gmm_data, cfg.gmm_components, derive_seed(seed, kSeedGmm), em_opts);
  bundle.gmm = std::move(em.model);
  result.em_log_likelihoods = std::move(em.log_likelihoods);
  for (auto& e : em.events) result.notes.push_back("em: " + e);

  // Frozen 2D context encoder, pretrained by direct 3D regression.
  std::vector<ContextPretrainExample> pre_examples;
  for (int s : ds.train_indices) {
    const PoseSeq2d& s2 = ds.seq2d[s];
    const PoseSeq3d& s3 = ds.seq3d[s];
    for (int t = 0; t < s2.frame_count(); ++t) {
      pre_examples.push_back({context_window(s2, t, cfg.context_frames), s3.frames[t].xyz});
    }
  }
  ContextPretrainOptions pre_opts{cfg.pretrain_epochs, cfg.pretrain_batch, cfg.pretrain_lr};
  ContextPretrainResult pre =
      pretrain_context(pre_examples, bundle.context_cfg, pre_opts, derive_seed(seed, kSeedPretrain));
  bundle.context = std::move(pre.encoder);
  result.pretrain_curve = std::move(pre.loss_curve);

  // Context vectors are frozen; compute them once.
  std::vector<std::vector<std::vector<double>>> f2d(ds.seq2d.size());
  std::vector<std::vector<std::vector<double>>> gt_flat(ds.seq3d.size());
  for (int s : ds.train_indices) {
    const PoseSeq2d& s2 = ds.seq2d[s];
    f2d[s].resize(s2.frame_count());
    gt_flat[s].resize(s2.frame_count());
    for (int t = 0; t < s2.frame_count(); ++t) {
      f2d[s][t] = encode_context(bundle.context, bundle.context_cfg,
                                 context_window(s2, t, cfg.context_frames));
      gt_flat[s][t] = ds.seq3d[s].frames[t].xyz;
    }
  }

  bundle.denoiser = denoiser_init(bundle.denoiser_cfg, derive_seed(seed, kSeedDenoiserInit));
  bundle.hpim = hpim_init(bundle.hpim_cfg, topo, derive_seed(seed, kSeedHpimInit));

  std::vector<TrainExample> examples;
  for (int s : ds.train_indices) {
    for (int t = 0; t < ds.seq3d[s].frame_count(); ++t) examples.push_back({s, t});
  }

  TrainContext tc{ds,
                  cfg,
                  bundle.gmm,
                  bundle.schedule,
                  bundle.adjacency,
                  bundle.denoiser_cfg,
                  bundle.hpim_cfg,
                  f2d,
                  gt_flat,
                  bundle.denoiser,
                  bundle.hpim,
                  parse_variant(cfg.variant),
                  weights_from(cfg)};

  AdamOptimizer den_adam(bundle.denoiser);
  AdamOptimizer hpim_adam(bundle.hpim);

  const std::size_t n = examples.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  constexpr std::size_t kChunk = 4;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(seed, kSeedEpochShuffle + static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = shuffle_rng.uniform_below(i);
      std::swap(order[i - 1], order[j]);
    }
    const double lr = decayed_lr(cfg.lr, cfg.lr_decay, cfg.lr_decay_every, epoch);

    double epoch_diff = 0.0, epoch_stpg = 0.0;
    long depth_skips = 0;
    std::size_t cursor = 0;
    while (cursor < n) {
      const std::size_t batch_end = std::min(n, cursor + static_cast<std::size_t>(cfg.batch_size));
      const std::size_t batch_n = batch_end - cursor;
      const std::size_t chunk_count = (batch_n + kChunk - 1) / kChunk;

      std::vector<ParamTable> den_slots(chunk_count);
      std::vector<ParamTable> hpim_slots(chunk_count);
      std::vector<ExampleLoss> loss_slots(chunk_count);

      parallel_chunks(batch_n, kChunk, [&](std::size_t c, std::size_t begin, std::size_t end) {
        ParamTable dg = zeros_like(bundle.denoiser);
        ParamTable hg = zeros_like(bundle.hpim);
        ExampleLoss acc;
        for (std::size_t i = begin; i < end; ++i) {
          const std::size_t pos = cursor + i;
          const TrainExample& ex = examples[order[pos]];
          const std::uint64_t ex_seed =
              derive_seed(derive_seed(seed, kSeedExampleNoise + static_cast<std::uint64_t>(epoch)),
                          static_cast<std::uint64_t>(pos));
          const ExampleLoss l = train_example(tc, ex, ex_seed, dg, hg);
          acc.diff += l.diff;
          acc.stpg += l.stpg;
          acc.depth_skips += l.depth_skips;
        }
        den_slots[c] = std::move(dg);
        hpim_slots[c] = std::move(hg);
        loss_slots[c] = acc;
      });

      ParamTable den_grads = zeros_like(bundle.denoiser);
      ParamTable hpim_grads = zeros_like(bundle.hpim);
      ExampleLoss batch_loss;
      for (std::size_t c = 0; c < chunk_count; ++c) {
        accumulate(den_grads, den_slots[c]);
        accumulate(hpim_grads, hpim_slots[c]);
        batch_loss.diff += loss_slots[c].diff;
        batch_loss.stpg += loss_slots[c].stpg;
        batch_loss.depth_skips += loss_slots[c].depth_skips;
      }
      if (!std::isfinite(batch_loss.diff) || !std::isfinite(batch_loss.stpg)) {
        throw NumericalError("training: non-finite loss at epoch " + std::to_string(epoch) +
                             ", batch starting at example " + std::to_string(cursor) +
                             " (diff=" + std::to_string(batch_loss.diff) +
                             ", stpg=" + std::to_string(batch_loss.stpg) + ")");
      }
      const double inv = 1.0 / static_cast<double>(batch_n);
      for (auto& [name, g] : den_grads) {
        for (auto& v : g.data) v *= inv;
      }
      den_adam.step(bundle.denoiser, den_grads, lr);
      if (!cfg.no_hpim) {
        for (auto& [name, g] : hpim_grads) {
          for (auto& v : g.data) v *= inv;
        }
        hpim_adam.step(bundle.hpim, hpim_grads, lr);
      }
      epoch_diff += batch_loss.diff;
      epoch_stpg += batch_loss.stpg;
      depth_skips += batch_loss.depth_skips;
      cursor = batch_end;
    }

    if (depth_skips > 0) {
      result.notes.push_back("epoch " + std::to_string(epoch) + ": skipped physical terms on " +
                             std::to_string(depth_skips) + " examples (depth failure)");
    }
    TrainEpochLog log;
    log.epoch = epoch;
    log.lr = lr;
    log.diff_loss = epoch_diff / static_cast<double>(n);
    log.stpg_loss = epoch_stpg / static_cast<double>(n);
    log.loss = log.diff_loss + log.stpg_loss;
    result.log.push_back(log);
  }

  return result;
}

namespace {

Tensor scalar_tensor(double v) {
  Tensor t({1});
  t[0] = v;
  return t;
}

double scalar_from(const ParamTable& t, const std::string& name) {
  const Tensor& s = param(t, name);
  if (s.size() != 1) throw DataError("checkpoint: " + name + " must hold one value");
  return s[0];
}

}  // namespace

ParamTable bundle_to_tensors(const ModelBundle& bundle) {
  ParamTable out;
  for (const auto& [name, t] : bundle.context) out.emplace(name, t);
  for (const auto& [name, t] : bundle.denoiser) out.emplace(name, t);
  for (const auto& [name, t] : bundle.hpim) out.emplace(name, t);
  out.emplace("gmm/weights", bundle.gmm.weights);
  out.emplace("gmm/means", bundle.gmm.means);
  out.emplace("gmm/vars", bundle.gmm.vars);
  out.emplace("gmm/mixture_mean", bundle.gmm.mixture_mean);

  const SkeletonTopology& topo = bundle.topology;
  Tensor parents({topo.num_joints});
  Tensor weights({topo.num_joints});
  for (int j = 0; j < topo.num_joints; ++j) {
    parents[j] = topo.parents[j];
    weights[j] = topo.joint_weights[j];
  }
  Tensor sym({static_cast<std::int64_t>(topo.symmetry_pairs.size()), 2});
  for (std::size_t p = 0; p < topo.symmetry_pairs.size(); ++p) {
    sym(p, 0) = topo.symmetry_pairs[p].first;
    sym(p, 1) = topo.symmetry_pairs[p].second;
  }
  out.emplace("topology/parents", std::move(parents));
  out.emplace("topology/joint_weights", std::move(weights));
  out.emplace("topology/symmetry_pairs", std::move(sym));
  out.emplace("topology/root", scalar_tensor(topo.root_index));

  Tensor sched({3});
  sched[0] = bundle.schedule.steps;
  sched[1] = bundle.schedule.betas.front();
  sched[2] = bundle.schedule.betas.back();
  out.emplace("meta/schedule", std::move(sched));

  Tensor model({11});
  model[0] = bundle.denoiser_cfg.hidden;
  model[1] = bundle.denoiser_cfg.heads;
  model[2] = bundle.denoiser_cfg.blocks;
  model[3] = bundle.denoiser_cfg.context_dim;
  model[4] = bundle.context_cfg.embed_dim;
  model[5] = bundle.context_frames;
  model[6] = bundle.hpim_cfg.dim;
  model[7] = bundle.hpim_cfg.out_dim;
  model[8] = bundle.hpim_cfg.heads;
  model[9] = bundle.denoiser_cfg.step_dim;
  model[10] = bundle.hpim_cfg.max_window;
  out.emplace("meta/model", std::move(model));
  return out;
}

ModelBundle bundle_from_tensors(const ParamTable& tensors) {
  ModelBundle bundle;

  const Tensor& parents_t = param(tensors, "topology/parents");
  const Tensor& weights_t = param(tensors, "topology/joint_weights");
  const Tensor& sym_t = param(tensors, "topology/symmetry_pairs");
  const int J = static_cast<int>(parents_t.size());
  std::vector<int> parents(J);
  std::vector<double> weights(J);
  for (int j = 0; j < J; ++j) {
    parents[j] = static_cast<int>(parents_t[j]);
    weights[j] = weights_t[j];
  }
  std::vector<std::pair<int, int>> sym;
  for (std::int64_t p = 0; p < sym_t.rows(); ++p) {
    sym.emplace_back(static_cast<int>(sym_t(p, 0)), static_cast<int>(sym_t(p, 1)));
  }
  bundle.topology =
      make_topology(J, static_cast<int>(scalar_from(tensors, "topology/root")),
                    std::move(parents), std::move(sym), std::move(weights));
  const auto violations = validate_topology(bundle.topology);
  if (!violations.empty()) {
    throw DataError("checkpoint: invalid topology: " + violations.front());
  }
  bundle.adjacency = skeleton_graph(bundle.topology);

  const Tensor& sched = param(tensors, "meta/schedule");
  if (sched.size() != 3) throw DataError("checkpoint: bad schedule metadata");
  bundle.schedule = linear_schedule(static_cast<int>(sched[0]), sched[1], sched[2]);

  const Tensor& model = param(tensors, "meta/model");
  if (model.size() != 11) throw DataError("checkpoint: bad model metadata");
  bundle.denoiser_cfg.hidden = static_cast<int>(model[0]);
  bundle.denoiser_cfg.heads = static_cast<int>(model[1]);
  bundle.denoiser_cfg.blocks = static_cast<int>(model[2]);
  bundle.denoiser_cfg.context_dim = static_cast<int>(model[3]);
  bundle.context_cfg.embed_dim = static_cast<int>(model[4]);
  bundle.context_cfg.out_dim = static_cast<int>(model[3]);
  bundle.context_frames = static_cast<int>(model[5]);
  bundle.hpim_cfg.dim = static_cast<int>(model[6]);
  bundle.hpim_cfg.out_dim = static_cast<int>(model[7]);
  bundle.hpim_cfg.heads = static_cast<int>(model[8]);
  bundle.denoiser_cfg.step_dim = static_cast<int>(model[9]);
  bundle.denoiser_cfg.history_dim = bundle.hpim_cfg.out_dim;
  bundle.hpim_cfg.max_window = static_cast<int>(model[10]);

  bundle.gmm.weights = param(tensors, "gmm/weights");
  bundle.gmm.means = param(tensors, "gmm/means");
  bundle.gmm.vars = param(tensors, "gmm/vars");
  bundle.gmm.mixture_mean = param(tensors, "gmm/mixture_mean");
  const auto gmm_violations = validate_gmm(bundle.gmm);
  if (!gmm_violations.empty()) {
    throw DataError("checkpoint: invalid mixture: " + gmm_violations.front());
  }

  for (const auto& [name, t] : tensors) {
    if (name.rfind("context/", 0) == 0) bundle.context.emplace(name, t);
    if (name.rfind("denoiser/", 0) == 0) bundle.denoiser.emplace(name, t);
    if (name.rfind("hpim/", 0) == 0) bundle.hpim.emplace(name, t);
  }
  if (bundle.context.empty() || bundle.denoiser.empty() || bundle.hpim.empty()) {
    throw DataError("checkpoint: missing model parameter tables");
  }
  return bundle;
}

ModelBundle load_bundle(const std::string& checkpoint_path) {
  return bundle_from_tensors(load_checkpoint(checkpoint_path));
}

void save_bundle(const std::string& checkpoint_path, const ModelBundle& bundle) {
  save_checkpoint(checkpoint_path, bundle_to_tensors(bundle));
}

}  // namespace starpose
