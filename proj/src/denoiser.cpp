#include "starpose/denoiser.hpp"

#include <string>

#include "starpose/errors.hpp"

namespace starpose {

namespace {

std::string block_prefix(int b) { return "denoiser/block" + std::to_string(b); }

// Pose coordinates enter in millimetres and the predicted noise leaves in
// millimetres, but the network itself runs at O(1): inputs are scaled to
// metres and the head output back up.
constexpr double kPoseInScale = 1e-3;
constexpr double kNoiseOutScale = 1e3;

}  // namespace

nn::NormalizedGraph skeleton_graph(const SkeletonTopology& topo) {
  return nn::normalize_graph(topo.num_joints, topo.bones);
}

ParamTable denoiser_init(const DenoiserConfig& cfg, std::uint64_t seed) {
  if (cfg.hidden % cfg.heads != 0) throw ShapeMismatch("denoiser: heads must divide hidden");
  if (cfg.step_dim % 2 != 0) throw ShapeMismatch("denoiser: step embedding dim must be even");
  ParamTable p;
  p.emplace("denoiser/in/w", Tensor({cfg.hidden, cfg.input_dim()}));
  p.emplace("denoiser/in/b", Tensor({cfg.hidden}));
  for (int b = 0; b < cfg.blocks; ++b) {
    const std::string bp = block_prefix(b);
    p.emplace(bp + "/gcn1/w", Tensor({cfg.hidden, cfg.hidden}));
    p.emplace(bp + "/gcn1/b", Tensor({cfg.hidden}));
    p.emplace(bp + "/gcn2/w", Tensor({cfg.hidden, cfg.hidden}));
    p.emplace(bp + "/gcn2/b", Tensor({cfg.hidden}));
    nn::attention_declare(p, bp + "/attn", cfg.hidden);
  }
  p.emplace("denoiser/out/w", Tensor({3, cfg.hidden}));
  p.emplace("denoiser/out/b", Tensor({3}));
  nn::init_fan_in_uniform(p, seed);
  // Compensate the output amplification so the initial noise prediction is
  // on the order of single millimetres; early clean-pose estimates then
  // stay near the data manifold instead of kilometres away.
  for (auto& v : param_mut(p, "denoiser/out/w").data) v /= kNoiseOutScale;
  return p;
}

std::vector<double> denoiser_forward(const ParamTable& params, const DenoiserConfig& cfg,
                                     const nn::NormalizedGraph& adjacency,
                                     const std::vector<double>& h_k,
                                     const std::vector<double>& f_2d,
                                     const std::vector<double>& f_his,
                                     const std::vector<double>& k_embed,
                                     DenoiserTape* tape) {
  const int J = adjacency.nodes;
  if (static_cast<int>(h_k.size()) != 3 * J) throw ShapeMismatch("denoiser: pose size mismatch");
  if (static_cast<int>(f_2d.size()) != cfg.context_dim ||
      static_cast<int>(f_his.size()) != cfg.history_dim ||
      static_cast<int>(k_embed.size()) != cfg.step_dim) {
    throw ShapeMismatch("denoiser: condition size mismatch");
  }

  Tensor features({J, cfg.input_dim()});
  for (int j = 0; j < J; ++j) {
    double* row = features.row(j);
    int c = 0;
    for (int d = 0; d < 3; ++d) row[c++] = h_k[3 * j + d] * kPoseInScale;
    for (double v : f_2d) row[c++] = v;
    for (double v : f_his) row[c++] = v;
    for (double v : k_embed) row[c++] = v;
  }

  DenoiserTape local;
  DenoiserTape& t = tape ? *tape : local;
  t.features = features;
  t.blocks.assign(cfg.blocks, DenoiserBlockTape());

  nn::linear_forward(features, param(params, "denoiser/in/w"), &param(params, "denoiser/in/b"),
                     t.x0);

  Tensor x = t.x0;
  for (int b = 0; b < cfg.blocks; ++b) {
    const std::string bp = block_prefix(b);
    DenoiserBlockTape& bt = t.blocks[b];
    bt.x_in = x;

    nn::graph_apply(adjacency, x, bt.s1);
    nn::linear_forward(bt.s1, param(params, bp + "/gcn1/w"), &param(params, bp + "/gcn1/b"),
                       bt.h1);
    nn::tanh_inplace(bt.h1);

    nn::graph_apply(adjacency, bt.h1, bt.s2);
    nn::linear_forward(bt.s2, param(params, bp + "/gcn2/w"), &param(params, bp + "/gcn2/b"),
                       bt.h2);
    nn::tanh_inplace(bt.h2);

    bt.z = bt.x_in;
    for (std::int64_t i = 0; i < bt.z.size(); ++i) bt.z[i] += bt.h2[i];

    nn::attention_forward(bt.z, params, bp + "/attn", cfg.heads, bt.attn_out, &bt.attn);
    x = bt.z;
    for (std::int64_t i = 0; i < x.size(); ++i) x[i] += bt.attn_out[i];
  }
  t.x_final = x;

  Tensor out;
  nn::linear_forward(x, param(params, "denoiser/out/w"), &param(params, "denoiser/out/b"), out);
  for (auto& v : out.data) v *= kNoiseOutScale;
  return out.data;
}

void denoiser_backward(const ParamTable& params, const DenoiserConfig& cfg,
                       const nn::NormalizedGraph& adjacency, const DenoiserTape& tape,
                       const std::vector<double>& d_out, ParamTable& grads,
                       std::vector<double>* d_hk, std::vector<double>* d_fhis) {
  const int J = adjacency.nodes;
  if (static_cast<int>(d_out.size()) != 3 * J)
    throw ShapeMismatch("denoiser backward: upstream size mismatch");
  if (tape.blocks.empty() && cfg.blocks > 0)
    throw ShapeMismatch("denoiser backward: tape missing");

  Tensor dy({J, 3});
  dy.data = d_out;
  for (auto& v : dy.data) v *= kNoiseOutScale;
  Tensor dx({J, cfg.hidden});
  nn::linear_backward(tape.x_final, param(params, "denoiser/out/w"), dy,
                      param_mut(grads, "denoiser/out/w"), &param_mut(grads, "denoiser/out/b"),
                      &dx);

  for (int b = cfg.blocks - 1; b >= 0; --b) {
    const std::string bp = block_prefix(b);
    const DenoiserBlockTape& bt = tape.blocks[b];

    // x_out = z + attn(z): gradient reaches z both directly and through
    // the attention layer.
    Tensor dz = dx;
    nn::attention_backward(bt.attn, params, bp + "/attn", cfg.heads, dx, grads, &dz);

    // z = x_in + gcn2(gcn1(x_in)).
    Tensor dh2_pre({J, cfg.hidden});
    nn::tanh_backward(bt.h2, dz, dh2_pre);
    Tensor ds2({J, cfg.hidden});
    nn::linear_backward(bt.s2, param(params, bp + "/gcn2/w"), dh2_pre,
                        param_mut(grads, bp + "/gcn2/w"), &param_mut(grads, bp + "/gcn2/b"),
                        &ds2);
    Tensor dh1;
    nn::graph_apply(adjacency, ds2, dh1);  // adjacency is symmetric

    Tensor dh1_pre({J, cfg.hidden});
    nn::tanh_backward(bt.h1, dh1, dh1_pre);
    Tensor ds1({J, cfg.hidden});
    nn::linear_backward(bt.s1, param(params, bp + "/gcn1/w"), dh1_pre,
                        param_mut(grads, bp + "/gcn1/w"), &param_mut(grads, bp + "/gcn1/b"),
                        &ds1);
    Tensor dx_gcn;
    nn::graph_apply(adjacency, ds1, dx_gcn);

    dx = dz;
    for (std::int64_t i = 0; i < dx.size(); ++i) dx[i] += dx_gcn[i];
  }

  Tensor d_features({J, cfg.input_dim()});
  nn::linear_backward(tape.features, param(params, "denoiser/in/w"), dx,
                      param_mut(grads, "denoiser/in/w"), &param_mut(grads, "denoiser/in/b"),
                      &d_features);

  if (d_hk) {
    d_hk->assign(3 * static_cast<std::size_t>(J), 0.0);
    for (int j = 0; j < J; ++j) {
      for (int d = 0; d < 3; ++d) (*d_hk)[3 * j + d] = d_features(j, d) * kPoseInScale;
    }
  }
  if (d_fhis) {
    d_fhis->assign(cfg.history_dim, 0.0);
    const int offset = 3 + cfg.context_dim;
    for (int j = 0; j < J; ++j) {
      for (int c = 0; c < cfg.history_dim; ++c) (*d_fhis)[c] += d_features(j, offset + c);
    }
  }
}

}  // namespace starpose
