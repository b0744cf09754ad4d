#include "starpose/context_encoder.hpp"

#include <cmath>

#include "starpose/errors.hpp"
#include "starpose/nn.hpp"
#include "starpose/optimizer.hpp"
#include "starpose/rng.hpp"

namespace starpose {

namespace {

// Pixel coordinates are scaled to O(1) before the tanh embedding so the
// nonlinearity operates away from saturation.
constexpr double kUvScale = 1e-3;

Tensor frame_matrix(const Pose2d& frame) {
  const int J = frame.joint_count();
  Tensor joints({J, 2});
  for (int j = 0; j < J; ++j) {
    joints(j, 0) = frame.joint(j)[0] * kUvScale;
    joints(j, 1) = frame.joint(j)[1] * kUvScale;
  }
  return joints;
}

}  // namespace

ParamTable context_init(const ContextEncoderConfig& cfg, std::uint64_t seed) {
  ParamTable p;
  p.emplace("context/embed/w", Tensor({cfg.embed_dim, 2}));
  p.emplace("context/agg/w", Tensor({cfg.embed_dim, cfg.embed_dim}));
  p.emplace("context/proj/w", Tensor({cfg.out_dim, cfg.embed_dim}));
  p.emplace("context/proj/b", Tensor({cfg.out_dim}));
  nn::init_fan_in_uniform(p, seed);
  return p;
}

void context_forward(const ParamTable& params, const ContextEncoderConfig& cfg,
                     const std::vector<Pose2d>& window, ContextTape& tape) {
  if (window.empty()) throw ShapeMismatch("context encoder: empty window");
  const int F = static_cast<int>(window.size());
  const int E = cfg.embed_dim;
  const Tensor& w_embed = param(params, "context/embed/w");
  const Tensor& w_agg = param(params, "context/agg/w");

  tape.embedded.assign(F, Tensor());
  tape.frame_feats = Tensor({F, E});
  for (int f = 0; f < F; ++f) {
    const int J = window[f].joint_count();
    if (J == 0) throw ShapeMismatch("context encoder: empty frame");
    const Tensor joints = frame_matrix(window[f]);
    Tensor& emb = tape.embedded[f];
    nn::linear_forward(joints, w_embed, nullptr, emb);
    nn::tanh_inplace(emb);
    double* row = tape.frame_feats.row(f);
    for (int j = 0; j < J; ++j) {
      const double* er = emb.row(j);
      for (int e = 0; e < E; ++e) row[e] += er[e];
    }
    for (int e = 0; e < E; ++e) row[e] /= J;
  }

  nn::linear_forward(tape.frame_feats, w_agg, nullptr, tape.agg);
  nn::tanh_inplace(tape.agg);

  tape.pooled = Tensor({1, E});
  for (int f = 0; f < F; ++f) {
    const double* row = tape.agg.row(f);
    for (int e = 0; e < E; ++e) tape.pooled[e] += row[e];
  }
  for (int e = 0; e < E; ++e) tape.pooled[e] /= F;

  nn::linear_forward(tape.pooled, param(params, "context/proj/w"),
                     &param(params, "context/proj/b"), tape.out);
}

std::vector<double> encode_context(const ParamTable& params, const ContextEncoderConfig& cfg,
                                   const std::vector<Pose2d>& window) {
  ContextTape tape;
  context_forward(params, cfg, window, tape);
  return tape.out.data;
}

void context_backward(const ParamTable& params, const ContextEncoderConfig& cfg,
                      const std::vector<Pose2d>& window, const ContextTape& tape,
                      const std::vector<double>& d_out, ParamTable& grads) {
  const int F = static_cast<int>(window.size());
  const int E = cfg.embed_dim;

  Tensor dy({1, cfg.out_dim});
  dy.data = d_out;
  Tensor d_pooled({1, E});
  nn::linear_backward(tape.pooled, param(params, "context/proj/w"), dy,
                      param_mut(grads, "context/proj/w"), &param_mut(grads, "context/proj/b"),
                      &d_pooled);

  Tensor d_agg_post({F, E});
  for (int f = 0; f < F; ++f) {
    double* row = d_agg_post.row(f);
    for (int e = 0; e < E; ++e) row[e] = d_pooled[e] / F;
  }
  Tensor d_agg_pre({F, E});
  nn::tanh_backward(tape.agg, d_agg_post, d_agg_pre);

  Tensor d_frames({F, E});
  nn::linear_backward(tape.frame_feats, param(params, "context/agg/w"), d_agg_pre,
                      param_mut(grads, "context/agg/w"), nullptr, &d_frames);

  for (int f = 0; f < F; ++f) {
    const int J = window[f].joint_count();
    Tensor d_emb_post({J, E});
    const double* df = d_frames.row(f);
    for (int j = 0; j < J; ++j) {
      double* row = d_emb_post.row(j);
      for (int e = 0; e < E; ++e) row[e] = df[e] / J;
    }
    Tensor d_emb_pre({J, E});
    nn::tanh_backward(tape.embedded[f], d_emb_post, d_emb_pre);
    const Tensor joints = frame_matrix(window[f]);
    nn::linear_backward(joints, param(params, "context/embed/w"), d_emb_pre,
                        param_mut(grads, "context/embed/w"), nullptr, nullptr);
  }
}

ContextPretrainResult pretrain_context(const std::vector<ContextPretrainExample>& dataset,
                                       const ContextEncoderConfig& cfg,
                                       const ContextPretrainOptions& opts, std::uint64_t seed) {
  if (dataset.empty()) throw DataError("context pretraining: empty dataset");
  const int out_dim = static_cast<int>(dataset.front().target.size());

  ParamTable params = context_init(cfg, derive_seed(seed, 0));
  params.emplace("context/head/w", Tensor({out_dim, cfg.out_dim}));
  params.emplace("context/head/b", Tensor({out_dim}));
  {
    ParamTable head_only;
    head_only.emplace("context/head/w", Tensor({out_dim, cfg.out_dim}));
    nn::init_fan_in_uniform(head_only, derive_seed(seed, 1));
    param_mut(params, "context/head/w") = param(head_only, "context/head/w");
  }

  AdamOptimizer adam(params);
  ContextPretrainResult result;
  const std::size_t n = dataset.size();

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(seed, 100 + static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = shuffle_rng.uniform_below(i);
      std::swap(order[i - 1], order[j]);
    }
    double epoch_loss = 0.0;
    std::size_t cursor = 0;
    while (cursor < n) {
      const std::size_t end = std::min(n, cursor + static_cast<std::size_t>(opts.batch_size));
      ParamTable grads = zeros_like(params);
      double batch_loss = 0.0;
      for (std::size_t idx = cursor; idx < end; ++idx) {
        const ContextPretrainExample& ex = dataset[order[idx]];
        ContextTape tape;
        context_forward(params, cfg, ex.window, tape);
        Tensor pred;
        Tensor ctx_row({1, cfg.out_dim});
        ctx_row.data = tape.out.data;
        nn::linear_forward(ctx_row, param(params, "context/head/w"),
                           &param(params, "context/head/b"), pred);
        // Mean squared error over coordinates, in metres so the head's
        // operating range matches the O(1) encoder features.
        std::vector<double> d_pred(out_dim);
        double loss = 0.0;
        for (int d = 0; d < out_dim; ++d) {
          const double diff = pred[d] - ex.target[d] * kUvScale;
          loss += diff * diff;
          d_pred[d] = 2.0 * diff / out_dim;
        }
        batch_loss += loss / out_dim;
        Tensor d_pred_t({1, out_dim});
        d_pred_t.data = d_pred;
        Tensor d_ctx({1, cfg.out_dim});
        nn::linear_backward(ctx_row, param(params, "context/head/w"), d_pred_t,
                            param_mut(grads, "context/head/w"),
                            &param_mut(grads, "context/head/b"), &d_ctx);
        context_backward(params, cfg, ex.window, tape, d_ctx.data, grads);
      }
      const double inv = 1.0 / static_cast<double>(end - cursor);
      for (auto& [name, g] : grads) {
        for (auto& v : g.data) v *= inv;
      }
      adam.step(params, grads, opts.lr);
      epoch_loss += batch_loss;
      cursor = end;
    }
    result.loss_curve.push_back(epoch_loss / static_cast<double>(n));
  }

  // Drop the regression head; the frozen encoder is the product.
  params.erase("context/head/w");
  params.erase("context/head/b");
  result.encoder = std::move(params);
  return result;
}

}  // namespace starpose
