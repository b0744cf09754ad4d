#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "starpose/nn.hpp"
#include "starpose/rng.hpp"

using namespace starpose;

namespace {

Tensor random_tensor(std::vector<std::int64_t> dims, Rng& rng, double scale) {
  Tensor t(std::move(dims));
  for (auto& v : t.data) v = rng.uniform(-scale, scale);
  return t;
}

}  // namespace

TEST_CASE("linear forward/backward against finite differences") {
  Rng rng(1);
  const Tensor x = random_tensor({3, 4}, rng, 1.0);
  Tensor w = random_tensor({2, 4}, rng, 1.0);
  Tensor b = random_tensor({2}, rng, 0.5);
  const Tensor u = random_tensor({3, 2}, rng, 1.0);  // fixed upstream

  auto eval = [&]() {
    Tensor y;
    nn::linear_forward(x, w, &b, y);
    double s = 0.0;
    for (std::int64_t i = 0; i < y.size(); ++i) s += u[i] * y[i];
    return s;
  };

  Tensor y;
  nn::linear_forward(x, w, &b, y);
  Tensor dw({2, 4}), db({2}), dx({3, 4});
  nn::linear_backward(x, w, u, dw, &db, &dx);

  ParamTable p;
  p.emplace("w", w);
  ParamTable fd = oracles::finite_diff_params(
      [&]() {
        Tensor y2;
        nn::linear_forward(x, p.at("w"), &b, y2);
        double s = 0.0;
        for (std::int64_t i = 0; i < y2.size(); ++i) s += u[i] * y2[i];
        return s;
      },
      p, 1e-6);
  CHECK(oracles::gradient_rel_error(dw.data, fd.at("w").data) <= 1e-7);

  const auto fdx = oracles::finite_diff(
      [&](const std::vector<double>& flat) {
        Tensor x2({3, 4});
        x2.data = flat;
        Tensor y2;
        nn::linear_forward(x2, w, &b, y2);
        double s = 0.0;
        for (std::int64_t i = 0; i < y2.size(); ++i) s += u[i] * y2[i];
        return s;
      },
      x.data, 1e-6);
  CHECK(oracles::gradient_rel_error(dx.data, fdx) <= 1e-7);
}

TEST_CASE("normalized graph: rows of A_hat sum to 1 on a regular graph") {
  // Cycle of 4 nodes: every node has degree 2 (+1 self loop).
  const auto g = nn::normalize_graph(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}});
  Tensor ones({4, 1});
  ones.fill(1.0);
  Tensor out;
  nn::graph_apply(g, ones, out);
  for (int i = 0; i < 4; ++i) CHECK(out[i] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("graph_apply is symmetric: <Ax, y> == <x, Ay>") {
  Rng rng(2);
  const auto g = nn::normalize_graph(5, {{0, 1}, {0, 2}, {2, 3}, {3, 4}, {1, 4}});
  const Tensor x = random_tensor({5, 3}, rng, 1.0);
  const Tensor y = random_tensor({5, 3}, rng, 1.0);
  Tensor ax, ay;
  nn::graph_apply(g, x, ax);
  nn::graph_apply(g, y, ay);
  double lhs = 0.0, rhs = 0.0;
  for (std::int64_t i = 0; i < x.size(); ++i) {
    lhs += ax[i] * y[i];
    rhs += x[i] * ay[i];
  }
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("attention rows sum to one") {
  Rng rng(3);
  ParamTable p;
  nn::attention_declare(p, "attn", 8);
  nn::init_fan_in_uniform(p, 7);
  const Tensor x = random_tensor({5, 8}, rng, 1.0);
  Tensor y;
  nn::AttentionTape tape;
  nn::attention_forward(x, p, "attn", 2, y, &tape);
  const std::int64_t T = 5;
  for (int h = 0; h < 2; ++h) {
    for (std::int64_t t = 0; t < T; ++t) {
      double row_sum = 0.0;
      for (std::int64_t t2 = 0; t2 < T; ++t2) row_sum += tape.probs.row(h)[t * T + t2];
      CHECK(row_sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("attention backward matches finite differences") {
  Rng rng(4);
  ParamTable p;
  nn::attention_declare(p, "attn", 6);
  nn::init_fan_in_uniform(p, 11);
  const Tensor x = random_tensor({4, 6}, rng, 0.8);
  const Tensor u = random_tensor({4, 6}, rng, 1.0);

  auto eval = [&]() {
    Tensor y;
    nn::attention_forward(x, p, "attn", 3, y, nullptr);
    double s = 0.0;
    for (std::int64_t i = 0; i < y.size(); ++i) s += u[i] * y[i];
    return s;
  };

  Tensor y;
  nn::AttentionTape tape;
  nn::attention_forward(x, p, "attn", 3, y, &tape);
  ParamTable grads = zeros_like(p);
  Tensor dx({4, 6});
  nn::attention_backward(tape, p, "attn", 3, u, grads, &dx);

  const ParamTable fd = oracles::finite_diff_params(eval, p, 1e-6);
  CHECK(oracles::param_grads_rel_error(grads, fd) <= 1e-6);

  const auto fdx = oracles::finite_diff(
      [&](const std::vector<double>& flat) {
        Tensor x2({4, 6});
        x2.data = flat;
        Tensor y2;
        nn::attention_forward(x2, p, "attn", 3, y2, nullptr);
        double s = 0.0;
        for (std::int64_t i = 0; i < y2.size(); ++i) s += u[i] * y2[i];
        return s;
      },
      x.data, 1e-6);
  CHECK(oracles::gradient_rel_error(dx.data, fdx) <= 1e-6);
}

TEST_CASE("fan-in uniform init bounds and determinism") {
  ParamTable a, b;
  a.emplace("m/w", Tensor({8, 32}));
  a.emplace("m/b", Tensor({8}));
  b.emplace("m/w", Tensor({8, 32}));
  b.emplace("m/b", Tensor({8}));
  nn::init_fan_in_uniform(a, 5);
  nn::init_fan_in_uniform(b, 5);
  CHECK(a.at("m/w").data == b.at("m/w").data);

  const double bound = std::sqrt(6.0 / 32.0);
  bool nonzero = false;
  for (double v : a.at("m/w").data) {
    CHECK(std::abs(v) <= bound);
    if (v != 0.0) nonzero = true;
  }
  CHECK(nonzero);
  for (double v : a.at("m/b").data) CHECK(v == 0.0);

  ParamTable c;
  c.emplace("m/w", Tensor({8, 32}));
  nn::init_fan_in_uniform(c, 6);
  CHECK(c.at("m/w").data != a.at("m/w").data);
}
