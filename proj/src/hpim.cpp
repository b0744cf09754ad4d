#include "starpose/hpim.hpp"

#include <string>

#include "starpose/errors.hpp"

namespace starpose {

namespace {

// Pixel and millimetre inputs are scaled to O(1) before their embeddings.
constexpr double kInputScale = 1e-3;

}  // namespace

void HistoryBuffer::push(Pose2d observed_2d, Pose3d predicted_3d, long frame_index) {
  if (!entries_.empty() && frame_index != entries_.back().frame_index + 1) {
    throw DataError("history buffer: non-contiguous frame index " + std::to_string(frame_index));
  }
  entries_.push_back({std::move(observed_2d), std::move(predicted_3d), frame_index});
  while (static_cast<int>(entries_.size()) > capacity_) entries_.pop_front();
}

std::vector<Pose3d> HistoryBuffer::poses_3d() const {
  std::vector<Pose3d> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.predicted_3d);
  return out;
}

std::vector<std::pair<int, int>> IntegrationGraph::all_edges() const {
  std::vector<std::pair<int, int>> edges;
  edges.reserve(skeleton_edges.size() + cross_edges.size() + temporal_edges.size());
  edges.insert(edges.end(), skeleton_edges.begin(), skeleton_edges.end());
  edges.insert(edges.end(), cross_edges.begin(), cross_edges.end());
  edges.insert(edges.end(), temporal_edges.begin(), temporal_edges.end());
  return edges;
}

nn::NormalizedGraph IntegrationGraph::normalized() const {
  return nn::normalize_graph(nodes, all_edges());
}

IntegrationGraph build_integration_graph(const SkeletonTopology& topo, int window_len) {
  const int J = topo.num_joints;
  IntegrationGraph g;
  g.nodes = 2 * J * window_len;
  for (int l = 0; l < window_len; ++l) {
    const int base = l * 2 * J;
    for (const auto& [a, b] : topo.bones) {
      g.skeleton_edges.emplace_back(base + a, base + b);          // 2D stream
      g.skeleton_edges.emplace_back(base + J + a, base + J + b);  // 3D stream
    }
    for (int j = 0; j < J; ++j) g.cross_edges.emplace_back(base + j, base + J + j);
  }
  for (int l = 0; l + 1 < window_len; ++l) {
    const int base = l * 2 * J, next = (l + 1) * 2 * J;
    for (int s = 0; s < 2; ++s) {
      for (int j = 0; j < J; ++j) {
        g.temporal_edges.emplace_back(base + s * J + j, next + s * J + j);
      }
    }
  }
  return g;
}

ParamTable hpim_init(const HpimConfig& cfg, const SkeletonTopology& topo, std::uint64_t seed) {
  if (cfg.dim % cfg.heads != 0) throw ShapeMismatch("hpim: heads must divide dim");
  const int J = topo.num_joints;
  ParamTable p;
  p.emplace("hpim/embed2d/w", Tensor({cfg.dim, 2}));
  p.emplace("hpim/embed3d/w", Tensor({cfg.dim, 3}));
  p.emplace("hpim/spe2d", Tensor({J, cfg.dim}));
  p.emplace("hpim/spe3d", Tensor({J, cfg.dim}));
  p.emplace("hpim/tpe2d", Tensor({cfg.max_window, cfg.dim}));
  p.emplace("hpim/tpe3d", Tensor({cfg.max_window, cfg.dim}));
  nn::attention_declare(p, "hpim/enc2d/attn", cfg.dim);
  nn::attention_declare(p, "hpim/enc3d/attn", cfg.dim);
  p.emplace("hpim/gcn1/w", Tensor({cfg.dim, cfg.dim}));
  p.emplace("hpim/gcn1/b", Tensor({cfg.dim}));
  p.emplace("hpim/gcn2/w", Tensor({cfg.dim, cfg.dim}));
  p.emplace("hpim/gcn2/b", Tensor({cfg.dim}));
  nn::attention_declare(p, "hpim/attn1", cfg.dim);
  nn::attention_declare(p, "hpim/attn2", cfg.dim);
  p.emplace("hpim/fc/w", Tensor({cfg.out_dim, cfg.dim}));
  p.emplace("hpim/fc/b", Tensor({cfg.out_dim}));
  p.emplace("hpim/null", Tensor({cfg.out_dim}));  // stays zero at init
  nn::init_fan_in_uniform(p, seed);
  return p;
}

namespace {

// Embed one frame of one stream and run its spatial encoder.
void encode_frame_stream(const ParamTable& params, const HpimConfig& cfg, const Tensor& joints,
                         const std::string& embed_name, const std::string& spe_name,
                         const std::string& enc_prefix, int heads, Tensor& p_out, Tensor& z_out,
                         nn::AttentionTape& enc_tape) {
  nn::linear_forward(joints, param(params, embed_name), nullptr, p_out);
  const Tensor& spe = param(params, spe_name);
  for (std::int64_t i = 0; i < p_out.size(); ++i) p_out[i] += spe[i];
  Tensor attn_out;
  nn::attention_forward(p_out, params, enc_prefix, heads, attn_out, &enc_tape);
  z_out = p_out;
  for (std::int64_t i = 0; i < z_out.size(); ++i) z_out[i] += attn_out[i];
}

void decode_frame_stream(const ParamTable& params, const HpimConfig& cfg, const Tensor& joints,
                         const Tensor& dz, const nn::AttentionTape& enc_tape,
                         const std::string& embed_name, const std::string& spe_name,
                         const std::string& enc_prefix, int heads, ParamTable& grads) {
  // z = p + attn(p): route dz through both paths.
  Tensor dp = dz;
  nn::attention_backward(enc_tape, params, enc_prefix, heads, dz, grads, &dp);
  Tensor& d_spe = param_mut(grads, spe_name);
  for (std::int64_t i = 0; i < dp.size(); ++i) d_spe[i] += dp[i];
  nn::linear_backward(joints, param(params, embed_name), dp, param_mut(grads, embed_name),
                      nullptr, nullptr);
}

}  // namespace

std::vector<double> encode_history(const ParamTable& params, const HpimConfig& cfg,
                                   const HistoryBuffer& buffer, const SkeletonTopology& topo,
                                   HpimTape* tape) {
  if (buffer.empty()) {
    if (tape) tape->used_null = true;
    return param(params, "hpim/null").data;
  }
  const int J = topo.num_joints;
  const int L = buffer.size();
  if (L > cfg.max_window) throw ShapeMismatch("hpim: window exceeds configured maximum");

  HpimTape local;
  HpimTape& t = tape ? *tape : local;
  t.used_null = false;
  t.window_len = L;
  t.frames.assign(L, HpimFrameTape());

  const int T = 2 * J * L;
  t.x = Tensor({T, cfg.dim});
  const Tensor& tpe2d = param(params, "hpim/tpe2d");
  const Tensor& tpe3d = param(params, "hpim/tpe3d");

  for (int l = 0; l < L; ++l) {
    const HistoryEntry& e = buffer.entry(l);
    if (e.observed_2d.joint_count() != J || e.predicted_3d.joint_count() != J) {
      throw ShapeMismatch("hpim: history entry joint count mismatch");
    }
    HpimFrameTape& ft = t.frames[l];
    ft.joints2d = Tensor({J, 2});
    ft.joints3d = Tensor({J, 3});
    for (int j = 0; j < J; ++j) {
      ft.joints2d(j, 0) = e.observed_2d.joint(j)[0] * kInputScale;
      ft.joints2d(j, 1) = e.observed_2d.joint(j)[1] * kInputScale;
      for (int d = 0; d < 3; ++d) {
        ft.joints3d(j, d) = e.predicted_3d.joint(j)[d] * kInputScale;
      }
    }
    encode_frame_stream(params, cfg, ft.joints2d, "hpim/embed2d/w", "hpim/spe2d",
                        "hpim/enc2d/attn", cfg.heads, ft.p2d, ft.z2d, ft.enc2d);
    encode_frame_stream(params, cfg, ft.joints3d, "hpim/embed3d/w", "hpim/spe3d",
                        "hpim/enc3d/attn", cfg.heads, ft.p3d, ft.z3d, ft.enc3d);

    // Temporal positional embedding indexed by distance from the newest
    // frame, then stack into the node-feature matrix.
    const int dist = L - 1 - l;
    const int base = l * 2 * J;
    for (int j = 0; j < J; ++j) {
      double* row2d = t.x.row(base + j);
      double* row3d = t.x.row(base + J + j);
      const double* z2 = ft.z2d.row(j);
      const double* z3 = ft.z3d.row(j);
      const double* tp2 = tpe2d.row(dist);
      const double* tp3 = tpe3d.row(dist);
      for (int c = 0; c < cfg.dim; ++c) {
        row2d[c] = z2[c] + tp2[c];
        row3d[c] = z3[c] + tp3[c];
      }
    }
  }

  t.graph = build_integration_graph(topo, L).normalized();

  // Round 1: graph branch and attention branch in parallel, then fuse.
  nn::graph_apply(t.graph, t.x, t.g1_s);
  nn::linear_forward(t.g1_s, param(params, "hpim/gcn1/w"), &param(params, "hpim/gcn1/b"), t.g1);
  nn::tanh_inplace(t.g1);
  nn::attention_forward(t.x, params, "hpim/attn1", cfg.heads, t.a1_out, &t.a1);
  t.fused = t.g1;
  for (std::int64_t i = 0; i < t.fused.size(); ++i) t.fused[i] += t.a1_out[i];

  // Round 2 on the fused features.
  nn::graph_apply(t.graph, t.fused, t.g2_s);
  nn::linear_forward(t.g2_s, param(params, "hpim/gcn2/w"), &param(params, "hpim/gcn2/b"), t.g2);
  nn::tanh_inplace(t.g2);
  nn::attention_forward(t.fused, params, "hpim/attn2", cfg.heads, t.a2_out, &t.a2);

  // Mean over nodes of the two branch outputs, then the final linear map.
  t.pooled = Tensor({1, cfg.dim});
  for (int n = 0; n < T; ++n) {
    const double* gr = t.g2.row(n);
    const double* ar = t.a2_out.row(n);
    for (int c = 0; c < cfg.dim; ++c) t.pooled[c] += gr[c] + ar[c];
  }
  for (int c = 0; c < cfg.dim; ++c) t.pooled[c] /= T;

  Tensor out;
  nn::linear_forward(t.pooled, param(params, "hpim/fc/w"), &param(params, "hpim/fc/b"), out);
  return out.data;
}

void hpim_backward(const ParamTable& params, const HpimConfig& cfg, const HpimTape& tape,
                   const SkeletonTopology& topo, const std::vector<double>& d_fhis,
                   ParamTable& grads) {
  if (tape.used_null) {
    Tensor& d_null = param_mut(grads, "hpim/null");
    for (std::int64_t i = 0; i < d_null.size(); ++i) d_null[i] += d_fhis[i];
    return;
  }
  const int J = topo.num_joints;
  const int L = tape.window_len;
  const int T = 2 * J * L;

  Tensor dy({1, cfg.out_dim});
  dy.data = d_fhis;
  Tensor d_pooled({1, cfg.dim});
  nn::linear_backward(tape.pooled, param(params, "hpim/fc/w"), dy,
                      param_mut(grads, "hpim/fc/w"), &param_mut(grads, "hpim/fc/b"), &d_pooled);

  // Mean pooling broadcasts the gradient to every node of both branches.
  Tensor d_branch({T, cfg.dim});
  for (int n = 0; n < T; ++n) {
    double* row = d_branch.row(n);
    for (int c = 0; c < cfg.dim; ++c) row[c] = d_pooled[c] / T;
  }

  // Round 2 backward into the fused features.
  Tensor d_fused({T, cfg.dim});
  {
    Tensor dg2_pre({T, cfg.dim});
    nn::tanh_backward(tape.g2, d_branch, dg2_pre);
    Tensor ds2({T, cfg.dim});
    nn::linear_backward(tape.g2_s, param(params, "hpim/gcn2/w"), dg2_pre,
                        param_mut(grads, "hpim/gcn2/w"), &param_mut(grads, "hpim/gcn2/b"), &ds2);
    Tensor dx_gcn;
    nn::graph_apply(tape.graph, ds2, dx_gcn);
    d_fused = dx_gcn;
    nn::attention_backward(tape.a2, params, "hpim/attn2", cfg.heads, d_branch, grads, &d_fused);
  }

  // Round 1 backward into the node features.
  Tensor dx({T, cfg.dim});
  {
    Tensor dg1_pre({T, cfg.dim});
    nn::tanh_backward(tape.g1, d_fused, dg1_pre);
    Tensor ds1({T, cfg.dim});
    nn::linear_backward(tape.g1_s, param(params, "hpim/gcn1/w"), dg1_pre,
                        param_mut(grads, "hpim/gcn1/w"), &param_mut(grads, "hpim/gcn1/b"), &ds1);
    Tensor dx_gcn;
    nn::graph_apply(tape.graph, ds1, dx_gcn);
    dx = dx_gcn;
    nn::attention_backward(tape.a1, params, "hpim/attn1", cfg.heads, d_fused, grads, &dx);
  }

  // Unstack node gradients into frames and streams.
  Tensor& d_tpe2d = param_mut(grads, "hpim/tpe2d");
  Tensor& d_tpe3d = param_mut(grads, "hpim/tpe3d");
  for (int l = 0; l < L; ++l) {
    const HpimFrameTape& ft = tape.frames[l];
    const int dist = L - 1 - l;
    const int base = l * 2 * J;
    Tensor dz2({J, cfg.dim}), dz3({J, cfg.dim});
    for (int j = 0; j < J; ++j) {
      const double* r2 = dx.row(base + j);
      const double* r3 = dx.row(base + J + j);
      double* o2 = dz2.row(j);
      double* o3 = dz3.row(j);
      double* t2 = d_tpe2d.row(dist);
      double* t3 = d_tpe3d.row(dist);
      for (int c = 0; c < cfg.dim; ++c) {
        o2[c] = r2[c];
        o3[c] = r3[c];
        t2[c] += r2[c];
        t3[c] += r3[c];
      }
    }
    decode_frame_stream(params, cfg, ft.joints2d, dz2, ft.enc2d, "hpim/embed2d/w", "hpim/spe2d",
                        "hpim/enc2d/attn", cfg.heads, grads);
    decode_frame_stream(params, cfg, ft.joints3d, dz3, ft.enc3d, "hpim/embed3d/w", "hpim/spe3d",
                        "hpim/enc3d/attn", cfg.heads, grads);
  }
}

}  // namespace starpose
