#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "starpose/denoiser.hpp"
#include "starpose/rng.hpp"

using namespace starpose;

namespace {

// Tiny 3-joint chain used for gradient checks.
SkeletonTopology chain3() {
  return make_topology(3, 0, {-1, 0, 1}, {}, {1.0, 1.0, 1.0});
}

DenoiserConfig tiny_cfg() {
  DenoiserConfig cfg;
  cfg.hidden = 4;
  cfg.heads = 2;
  cfg.blocks = 1;
  cfg.context_dim = 3;
  cfg.history_dim = 3;
  cfg.step_dim = 2;
  return cfg;
}

struct TinyInputs {
  std::vector<double> h_k, f_2d, f_his, k_emb;
};

TinyInputs tiny_inputs(Rng& rng) {
  TinyInputs in;
  in.h_k.resize(9);
  in.f_2d.resize(3);
  in.f_his.resize(3);
  in.k_emb.resize(2);
  for (auto& v : in.h_k) v = rng.uniform(-1.0, 1.0);
  for (auto& v : in.f_2d) v = rng.uniform(-1.0, 1.0);
  for (auto& v : in.f_his) v = rng.uniform(-1.0, 1.0);
  for (auto& v : in.k_emb) v = rng.uniform(-1.0, 1.0);
  return in;
}

}  // namespace

TEST_CASE("forward shape and determinism") {
  const SkeletonTopology topo = default_topology_17();
  const auto graph = skeleton_graph(topo);
  DenoiserConfig cfg;
  ParamTable params = denoiser_init(cfg, 3);
  Rng rng(1);
  std::vector<double> h(51), f2d(32), fhis(32), kemb(32);
  for (auto& v : h) v = rng.uniform(-100.0, 100.0);
  for (auto& v : f2d) v = rng.uniform(-1.0, 1.0);
  for (auto& v : fhis) v = rng.uniform(-1.0, 1.0);
  for (auto& v : kemb) v = rng.uniform(-1.0, 1.0);

  const auto out1 = denoiser_forward(params, cfg, graph, h, f2d, fhis, kemb);
  const auto out2 = denoiser_forward(params, cfg, graph, h, f2d, fhis, kemb);
  CHECK(out1.size() == 51);
  CHECK(out1 == out2);
}

TEST_CASE("init determinism and fan-in bound") {
  DenoiserConfig cfg;
  const ParamTable a = denoiser_init(cfg, 9);
  const ParamTable b = denoiser_init(cfg, 9);
  const ParamTable c = denoiser_init(cfg, 10);
  bool all_equal = true, any_diff = false;
  for (const auto& [name, t] : a) {
    if (t.data != b.at(name).data) all_equal = false;
    if (t.data != c.at(name).data) any_diff = true;
  }
  CHECK(all_equal);
  CHECK(any_diff);

  const Tensor& w = a.at("denoiser/in/w");
  const double bound = std::sqrt(6.0 / static_cast<double>(w.cols()));
  for (double v : w.data) CHECK(std::abs(v) <= bound);
}

TEST_CASE("zeroed attention reduces a block to pure graph convolution") {
  const SkeletonTopology topo = chain3();
  const auto graph = skeleton_graph(topo);
  const DenoiserConfig cfg = tiny_cfg();
  ParamTable params = denoiser_init(cfg, 5);
  for (auto& [name, t] : params) {
    if (name.find("/attn/") != std::string::npos) t.fill(0.0);
  }
  Rng rng(2);
  const TinyInputs in = tiny_inputs(rng);
  const auto out = denoiser_forward(params, cfg, graph, in.h_k, in.f_2d, in.f_his, in.k_emb);

  // GCN-only oracle: input proj, two graph convolutions, residual, head.
  auto linear = [](const Tensor& x, const Tensor& w, const Tensor& b) {
    Tensor y({x.rows(), w.rows()});
    for (std::int64_t t = 0; t < x.rows(); ++t) {
      for (std::int64_t o = 0; o < w.rows(); ++o) {
        double acc = b[o];
        for (std::int64_t i = 0; i < x.cols(); ++i) acc += w(o, i) * x(t, i);
        y(t, o) = acc;
      }
    }
    return y;
  };
  auto apply_graph = [&](const Tensor& x) {
    Tensor s({x.rows(), x.cols()});
    for (std::size_t e = 0; e < graph.from.size(); ++e) {
      for (std::int64_t c = 0; c < x.cols(); ++c) {
        s(graph.from[e], c) += graph.weight[e] * x(graph.to[e], c);
      }
    }
    return s;
  };

  Tensor feats({3, cfg.input_dim()});
  for (int j = 0; j < 3; ++j) {
    int c = 0;
    for (int d = 0; d < 3; ++d) feats(j, c++) = in.h_k[3 * j + d] * 1e-3;  // mm -> m
    for (double v : in.f_2d) feats(j, c++) = v;
    for (double v : in.f_his) feats(j, c++) = v;
    for (double v : in.k_emb) feats(j, c++) = v;
  }
  Tensor x0 = linear(feats, params.at("denoiser/in/w"), params.at("denoiser/in/b"));
  Tensor h1 = linear(apply_graph(x0), params.at("denoiser/block0/gcn1/w"),
                     params.at("denoiser/block0/gcn1/b"));
  for (auto& v : h1.data) v = std::tanh(v);
  Tensor h2 = linear(apply_graph(h1), params.at("denoiser/block0/gcn2/w"),
                     params.at("denoiser/block0/gcn2/b"));
  for (auto& v : h2.data) v = std::tanh(v);
  Tensor z = x0;
  for (std::int64_t i = 0; i < z.size(); ++i) z[i] += h2[i];
  Tensor expect = linear(z, params.at("denoiser/out/w"), params.at("denoiser/out/b"));
  for (auto& v : expect.data) v *= 1e3;  // head emits millimetres

  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(out[i] == doctest::Approx(expect[static_cast<std::int64_t>(i)]).epsilon(1e-12));
  }
}

TEST_CASE("backward parameter gradients match finite differences at tiny dims") {
  const SkeletonTopology topo = chain3();
  const auto graph = skeleton_graph(topo);
  const DenoiserConfig cfg = tiny_cfg();
  ParamTable params = denoiser_init(cfg, 13);
  Rng rng(3);
  const TinyInputs in = tiny_inputs(rng);
  std::vector<double> upstream(9);
  for (auto& v : upstream) v = rng.uniform(-1.0, 1.0);

  auto eval = [&]() {
    const auto out = denoiser_forward(params, cfg, graph, in.h_k, in.f_2d, in.f_his, in.k_emb);
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += upstream[i] * out[i];
    return s;
  };

  DenoiserTape tape;
  denoiser_forward(params, cfg, graph, in.h_k, in.f_2d, in.f_his, in.k_emb, &tape);
  ParamTable grads = zeros_like(params);
  std::vector<double> d_hk, d_fhis;
  denoiser_backward(params, cfg, graph, tape, upstream, grads, &d_hk, &d_fhis);

  const ParamTable fd = oracles::finite_diff_params(eval, params, 1e-6);
  CHECK(oracles::param_grads_rel_error(grads, fd) <= 1e-4);

  // Input gradient for the pose.
  const auto fd_hk = oracles::finite_diff(
      [&](const std::vector<double>& h) {
        const auto out = denoiser_forward(params, cfg, graph, h, in.f_2d, in.f_his, in.k_emb);
        double s = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) s += upstream[i] * out[i];
        return s;
      },
      in.h_k, 1e-6);
  CHECK(oracles::gradient_rel_error(d_hk, fd_hk) <= 1e-4);

  // Condition gradient for the history vector.
  const auto fd_fhis = oracles::finite_diff(
      [&](const std::vector<double>& fh) {
        const auto out = denoiser_forward(params, cfg, graph, in.h_k, in.f_2d, fh, in.k_emb);
        double s = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) s += upstream[i] * out[i];
        return s;
      },
      in.f_his, 1e-6);
  CHECK(oracles::gradient_rel_error(d_fhis, fd_fhis) <= 1e-4);
}

TEST_CASE("zero upstream gives zero gradients; two identical examples double them") {
  const SkeletonTopology topo = chain3();
  const auto graph = skeleton_graph(topo);
  const DenoiserConfig cfg = tiny_cfg();
  ParamTable params = denoiser_init(cfg, 17);
  Rng rng(4);
  const TinyInputs in = tiny_inputs(rng);

  DenoiserTape tape;
  denoiser_forward(params, cfg, graph, in.h_k, in.f_2d, in.f_his, in.k_emb, &tape);

  ParamTable grads = zeros_like(params);
  denoiser_backward(params, cfg, graph, tape, std::vector<double>(9, 0.0), grads);
  for (const auto& [name, g] : grads) {
    for (double v : g.data) CHECK(v == 0.0);
  }

  // A batch gradient is the sum of per-example gradients; two identical
  // examples give exactly twice the single-example gradient.
  std::vector<double> upstream(9);
  for (auto& v : upstream) v = rng.uniform(-1.0, 1.0);
  ParamTable once = zeros_like(params);
  denoiser_backward(params, cfg, graph, tape, upstream, once);
  ParamTable second = zeros_like(params);
  denoiser_backward(params, cfg, graph, tape, upstream, second);
  ParamTable batch = zeros_like(params);
  accumulate(batch, once);
  accumulate(batch, second);
  for (const auto& [name, g] : once) {
    const Tensor& g2 = batch.at(name);
    for (std::int64_t i = 0; i < g.size(); ++i) CHECK(g2[i] == 2.0 * g[i]);
  }
}

TEST_CASE("attention probability rows sum to one inside blocks") {
  const SkeletonTopology topo = default_topology_17();
  const auto graph = skeleton_graph(topo);
  DenoiserConfig cfg;
  ParamTable params = denoiser_init(cfg, 23);
  Rng rng(5);
  std::vector<double> h(51), f2d(32), fhis(32), kemb(32);
  for (auto& v : h) v = rng.uniform(-100.0, 100.0);
  for (auto& v : f2d) v = rng.uniform(-1.0, 1.0);
  for (auto& v : fhis) v = rng.uniform(-1.0, 1.0);
  for (auto& v : kemb) v = rng.uniform(-1.0, 1.0);

  DenoiserTape tape;
  denoiser_forward(params, cfg, graph, h, f2d, fhis, kemb, &tape);
  for (const auto& block : tape.blocks) {
    const Tensor& probs = block.attn.probs;
    const std::int64_t T = 17;
    for (std::int64_t hd = 0; hd < probs.rows(); ++hd) {
      for (std::int64_t t = 0; t < T; ++t) {
        double sum = 0.0;
        for (std::int64_t t2 = 0; t2 < T; ++t2) sum += probs.row(hd)[t * T + t2];
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }
}
