#pragma once

#include <cstdint>
#include <initializer_list>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "starpose/errors.hpp"

namespace starpose {

// Dense row-major tensor of doubles. Rank 1 and 2 cover everything here;
// higher ranks are allowed for the checkpoint container.
struct Tensor {
  std::vector<std::int64_t> dims;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::int64_t> d) : dims(std::move(d)) {
    data.assign(static_cast<std::size_t>(element_count(dims)), 0.0);
  }

  static Tensor zeros(std::initializer_list<std::int64_t> d) {
    return Tensor(std::vector<std::int64_t>(d));
  }

  static std::int64_t element_count(const std::vector<std::int64_t>& d) {
    std::int64_t n = 1;
    for (auto v : d) n *= v;
    return n;
  }

  std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
  std::int64_t rows() const { return dims.at(0); }
  std::int64_t cols() const { return dims.at(1); }

  double& operator()(std::int64_t r, std::int64_t c) { return data[r * dims[1] + c]; }
  double operator()(std::int64_t r, std::int64_t c) const { return data[r * dims[1] + c]; }
  double& operator[](std::int64_t i) { return data[i]; }
  double operator[](std::int64_t i) const { return data[i]; }

  double* row(std::int64_t r) { return data.data() + r * dims[1]; }
  const double* row(std::int64_t r) const { return data.data() + r * dims[1]; }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  bool same_shape(const Tensor& o) const { return dims == o.dims; }
};

// Named parameter set. std::map keeps iteration order stable, which makes
// optimizer sweeps and serialization deterministic.
using ParamTable = std::map<std::string, Tensor>;

inline ParamTable zeros_like(const ParamTable& params) {
  ParamTable out;
  for (const auto& [name, t] : params) out.emplace(name, Tensor(t.dims));
  return out;
}

inline void accumulate(ParamTable& into, const ParamTable& from) {
  for (const auto& [name, t] : from) {
    auto it = into.find(name);
    if (it == into.end()) {
      into.emplace(name, t);
      continue;
    }
    if (!it->second.same_shape(t)) throw ShapeMismatch("accumulate: shape mismatch for " + name);
    for (std::int64_t i = 0; i < t.size(); ++i) it->second[i] += t[i];
  }
}

inline const Tensor& param(const ParamTable& p, const std::string& name) {
  auto it = p.find(name);
  if (it == p.end()) throw ShapeMismatch("missing parameter tensor: " + name);
  return it->second;
}

inline Tensor& param_mut(ParamTable& p, const std::string& name) {
  auto it = p.find(name);
  if (it == p.end()) throw ShapeMismatch("missing parameter tensor: " + name);
  return it->second;
}

}  // namespace starpose
