#include "starpose/nn.hpp"

#include <cmath>

#include "starpose/rng.hpp"

namespace starpose::nn {

NormalizedGraph normalize_graph(int nodes, const std::vector<std::pair<int, int>>& edges) {
  std::vector<double> degree(nodes, 1.0);  // self-loop contributes 1
  for (const auto& [a, b] : edges) {
    degree[a] += 1.0;
    degree[b] += 1.0;
  }
  NormalizedGraph g;
  g.nodes = nodes;
  const std::size_t entries = 2 * edges.size() + static_cast<std::size_t>(nodes);
  g.from.reserve(entries);
  g.to.reserve(entries);
  g.weight.reserve(entries);
  for (int v = 0; v < nodes; ++v) {
    g.from.push_back(v);
    g.to.push_back(v);
    g.weight.push_back(1.0 / degree[v]);
  }
  for (const auto& [a, b] : edges) {
    const double w = 1.0 / std::sqrt(degree[a] * degree[b]);
    g.from.push_back(a);
    g.to.push_back(b);
    g.weight.push_back(w);
    g.from.push_back(b);
    g.to.push_back(a);
    g.weight.push_back(w);
  }
  return g;
}

void graph_apply(const NormalizedGraph& g, const Tensor& x, Tensor& out) {
  const std::int64_t cols = x.cols();
  out = Tensor({x.rows(), cols});
  for (std::size_t e = 0; e < g.from.size(); ++e) {
    double* dst = out.row(g.from[e]);
    const double* src = x.row(g.to[e]);
    const double w = g.weight[e];
    for (std::int64_t c = 0; c < cols; ++c) dst[c] += w * src[c];
  }
}

void linear_forward(const Tensor& x, const Tensor& w, const Tensor* b, Tensor& y) {
  const std::int64_t rows = x.rows(), in = x.cols(), out = w.rows();
  if (w.cols() != in) throw ShapeMismatch("linear: input dim mismatch");
  y = Tensor({rows, out});
  for (std::int64_t t = 0; t < rows; ++t) {
    const double* xr = x.row(t);
    double* yr = y.row(t);
    for (std::int64_t o = 0; o < out; ++o) {
      const double* wr = w.row(o);
      double acc = b ? b->data[o] : 0.0;
      for (std::int64_t i = 0; i < in; ++i) acc += wr[i] * xr[i];
      yr[o] = acc;
    }
  }
}

void linear_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Tensor& dw,
                     Tensor* db, Tensor* dx) {
  const std::int64_t rows = x.rows(), in = x.cols(), out = w.rows();
  for (std::int64_t t = 0; t < rows; ++t) {
    const double* xr = x.row(t);
    const double* dyr = dy.row(t);
    for (std::int64_t o = 0; o < out; ++o) {
      const double g = dyr[o];
      if (db) db->data[o] += g;
      double* dwr = dw.row(o);
      for (std::int64_t i = 0; i < in; ++i) dwr[i] += g * xr[i];
    }
    if (dx) {
      double* dxr = dx->row(t);
      for (std::int64_t o = 0; o < out; ++o) {
        const double g = dyr[o];
        const double* wr = w.row(o);
        for (std::int64_t i = 0; i < in; ++i) dxr[i] += g * wr[i];
      }
    }
  }
}

void tanh_inplace(Tensor& x) {
  for (auto& v : x.data) v = std::tanh(v);
}

void tanh_backward(const Tensor& y, const Tensor& dy, Tensor& dx) {
  for (std::int64_t i = 0; i < y.size(); ++i) dx[i] += dy[i] * (1.0 - y[i] * y[i]);
}

void attention_declare(ParamTable& params, const std::string& prefix, int dim) {
  params.emplace(prefix + "/wq", Tensor({dim, dim}));
  params.emplace(prefix + "/wk", Tensor({dim, dim}));
  params.emplace(prefix + "/wv", Tensor({dim, dim}));
  params.emplace(prefix + "/wo", Tensor({dim, dim}));
  params.emplace(prefix + "/bo", Tensor({dim}));
}

void attention_forward(const Tensor& x, const ParamTable& params, const std::string& prefix,
                       int heads, Tensor& y, AttentionTape* tape) {
  const std::int64_t T = x.rows(), C = x.cols();
  if (C % heads != 0) throw ShapeMismatch("attention: head count must divide dim");
  const std::int64_t dh = C / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor q, k, v;
  linear_forward(x, param(params, prefix + "/wq"), nullptr, q);
  linear_forward(x, param(params, prefix + "/wk"), nullptr, k);
  linear_forward(x, param(params, prefix + "/wv"), nullptr, v);

  Tensor probs({heads, T * T});
  Tensor ctx({T, C});
  std::vector<double> row(T);
  for (int h = 0; h < heads; ++h) {
    const std::int64_t off = h * dh;
    double* p_head = probs.row(h);
    for (std::int64_t t1 = 0; t1 < T; ++t1) {
      double best = -1e300;
      for (std::int64_t t2 = 0; t2 < T; ++t2) {
        const double* qr = q.row(t1) + off;
        const double* kr = k.row(t2) + off;
        double s = 0.0;
        for (std::int64_t d = 0; d < dh; ++d) s += qr[d] * kr[d];
        s *= scale;
        row[t2] = s;
        if (s > best) best = s;
      }
      double denom = 0.0;
      for (std::int64_t t2 = 0; t2 < T; ++t2) {
        row[t2] = std::exp(row[t2] - best);
        denom += row[t2];
      }
      double* ctx_r = ctx.row(t1) + off;
      for (std::int64_t t2 = 0; t2 < T; ++t2) {
        const double p = row[t2] / denom;
        p_head[t1 * T + t2] = p;
        const double* vr = v.row(t2) + off;
        for (std::int64_t d = 0; d < dh; ++d) ctx_r[d] += p * vr[d];
      }
    }
  }
  linear_forward(ctx, param(params, prefix + "/wo"), &param(params, prefix + "/bo"), y);

  if (tape) {
    tape->x = x;
    tape->q = std::move(q);
    tape->k = std::move(k);
    tape->v = std::move(v);
    tape->probs = std::move(probs);
    tape->ctx = std::move(ctx);
  }
}

void attention_backward(const AttentionTape& tape, const ParamTable& params,
                        const std::string& prefix, int heads, const Tensor& dy,
                        ParamTable& grads, Tensor* dx) {
  const std::int64_t T = tape.x.rows(), C = tape.x.cols();
  const std::int64_t dh = C / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor dctx({T, C});
  linear_backward(tape.ctx, param(params, prefix + "/wo"), dy,
                  param_mut(grads, prefix + "/wo"), &param_mut(grads, prefix + "/bo"), &dctx);

  Tensor dq({T, C}), dk({T, C}), dv({T, C});
  std::vector<double> dp(T), ds(T);
  for (int h = 0; h < heads; ++h) {
    const std::int64_t off = h * dh;
    const double* p_head = tape.probs.row(h);
    for (std::int64_t t1 = 0; t1 < T; ++t1) {
      const double* dctx_r = dctx.row(t1) + off;
      // dP and the softmax jacobian, one attention row at a time.
      double dot = 0.0;
      for (std::int64_t t2 = 0; t2 < T; ++t2) {
        const double* vr = tape.v.row(t2) + off;
        double acc = 0.0;
        for (std::int64_t d = 0; d < dh; ++d) acc += dctx_r[d] * vr[d];
        dp[t2] = acc;
        dot += acc * p_head[t1 * T + t2];
      }
      for (std::int64_t t2 = 0; t2 < T; ++t2) {
        const double p = p_head[t1 * T + t2];
        ds[t2] = p * (dp[t2] - dot);
        double* dv_r = dv.row(t2) + off;
        for (std::int64_t d = 0; d < dh; ++d) dv_r[d] += p * dctx_r[d];
      }
      double* dq_r = dq.row(t1) + off;
      const double* q_r = tape.q.row(t1) + off;
      for (std::int64_t t2 = 0; t2 < T; ++t2) {
        const double g = ds[t2] * scale;
        if (g == 0.0) continue;
        const double* k_r = tape.k.row(t2) + off;
        double* dk_r = dk.row(t2) + off;
        for (std::int64_t d = 0; d < dh; ++d) {
          dq_r[d] += g * k_r[d];
          dk_r[d] += g * q_r[d];
        }
      }
    }
  }

  linear_backward(tape.x, param(params, prefix + "/wq"), dq,
                  param_mut(grads, prefix + "/wq"), nullptr, dx);
  linear_backward(tape.x, param(params, prefix + "/wk"), dk,
                  param_mut(grads, prefix + "/wk"), nullptr, dx);
  linear_backward(tape.x, param(params, prefix + "/wv"), dv,
                  param_mut(grads, prefix + "/wv"), nullptr, dx);
}

void init_fan_in_uniform(ParamTable& params, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& [name, t] : params) {
    if (t.dims.size() < 2) continue;  // bias-like tensors stay zero
    const double bound = std::sqrt(6.0 / static_cast<double>(t.dims.back()));
    for (auto& v : t.data) v = rng.uniform(-bound, bound);
  }
}

}  // namespace starpose::nn
