#include "gradflip/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "gradflip/error.hpp"
#include "gradflip/ops.hpp"

namespace gradflip {

std::string_view to_string(PoolKind k) {
  switch (k) {
    case PoolKind::sum: return "sum";
    case PoolKind::max: return "max";
    case PoolKind::logsumexp: return "logsumexp";
  }
  return "?";
}

PoolKind parse_pool_kind(std::string_view s) {
  if (s == "sum") return PoolKind::sum;
  if (s == "max") return PoolKind::max;
  if (s == "logsumexp") return PoolKind::logsumexp;
  throw ValueError("unknown pooling kind '" + std::string(s) + "'");
}

void LayerSpec::validate() const {
  if (in_channels == 0 || out_channels == 0) throw ValueError("layer: channel counts must be positive");
  if (kind == LayerKind::gated_conv && kernel_width % 2 == 0) {
    throw ValueError(fmt::format("layer: kernel width {} must be odd", kernel_width));
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ValueError(fmt::format("layer: dropout rate {} outside [0,1)", dropout_rate));
  }
}

namespace layers {

Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.dim() != 2) throw ShapeError("conv1d: input must be [T, C_in], got " + shape_str(x.shape()));
  if (weight.dim() != 3 || weight.shape()[1] != x.shape()[1] || weight.shape()[2] % 2 == 0 ||
      bias.shape() != Shape{weight.shape()[0]}) {
    throw ShapeError(fmt::format("conv1d: shape mismatch x {} weight {} bias {}",
                                 shape_str(x.shape()), shape_str(weight.shape()),
                                 shape_str(bias.shape())));
  }
  const std::size_t T = x.shape()[0], C = x.shape()[1];
  const std::size_t O = weight.shape()[0], K = weight.shape()[2];
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(K / 2);

  // Repack weights as [K][O][C] so the inner loop runs over contiguous C.
  auto wv = weight.data();
  std::vector<double> wk(K * O * C);
  for (std::size_t o = 0; o < O; ++o)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t k = 0; k < K; ++k) wk[(k * O + o) * C + c] = wv[(o * C + c) * K + k];

  auto xv = x.data();
  auto bv = bias.data();
  std::vector<double> out(T * O);
  for (std::size_t t = 0; t < T; ++t) {
    double* row = &out[t * O];
    std::copy(bv.begin(), bv.end(), row);
    for (std::size_t k = 0; k < K; ++k) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) - pad;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
      const double* xr = &xv[static_cast<std::size_t>(src) * C];
      for (std::size_t o = 0; o < O; ++o) {
        const double* wr = &wk[(k * O + o) * C];
        double acc = 0.0;
        for (std::size_t c = 0; c < C; ++c) acc += wr[c] * xr[c];
        row[o] += acc;
      }
    }
  }
  return Tensor::make_result(
      "conv1d", {T, O}, std::move(out), {x, weight, bias},
      [x, wk = std::move(wk), T, C, O, K, pad](std::span<const double> g,
                                               std::span<std::vector<double>> in) {
        auto xv = x.data();
        std::vector<double> dwk;
        if (!in[1].empty()) dwk.assign(K * O * C, 0.0);
        for (std::size_t t = 0; t < T; ++t) {
          const double* gr = &g[t * O];
          for (std::size_t k = 0; k < K; ++k) {
            const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) - pad;
            if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
            const std::size_t s = static_cast<std::size_t>(src);
            for (std::size_t o = 0; o < O; ++o) {
              const double go = gr[o];
              if (!in[0].empty()) {
                const double* wr = &wk[(k * O + o) * C];
                double* dx = &in[0][s * C];
                for (std::size_t c = 0; c < C; ++c) dx[c] += go * wr[c];
              }
              if (!dwk.empty()) {
                const double* xr = &xv[s * C];
                double* dw = &dwk[(k * O + o) * C];
                for (std::size_t c = 0; c < C; ++c) dw[c] += go * xr[c];
              }
            }
          }
        }
        if (!dwk.empty()) {
          for (std::size_t o = 0; o < O; ++o)
            for (std::size_t c = 0; c < C; ++c)
              for (std::size_t k = 0; k < K; ++k) in[1][(o * C + c) * K + k] += dwk[(k * O + o) * C + c];
        }
        if (!in[2].empty()) {
          for (std::size_t t = 0; t < T; ++t)
            for (std::size_t o = 0; o < O; ++o) in[2][o] += g[t * O + o];
        }
      });
}

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor glu(const Tensor& x) {
  if (x.dim() != 2 || x.shape()[1] % 2 != 0) {
    throw ShapeError("glu: expected [T, 2C] with even channel count, got " + shape_str(x.shape()));
  }
  const std::size_t T = x.shape()[0], C = x.shape()[1] / 2;
  auto xv = x.data();
  std::vector<double> gate(T * C), out(T * C);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t c = 0; c < C; ++c) {
      gate[t * C + c] = sigmoid(xv[t * 2 * C + C + c]);
      out[t * C + c] = xv[t * 2 * C + c] * gate[t * C + c];
    }
  return Tensor::make_result(
      "glu", {T, C}, std::move(out), {x},
      [x, gate = std::move(gate), T, C](std::span<const double> g, std::span<std::vector<double>> in) {
        auto xv = x.data();
        for (std::size_t t = 0; t < T; ++t)
          for (std::size_t c = 0; c < C; ++c) {
            const double s = gate[t * C + c];
            const double gi = g[t * C + c];
            in[0][t * 2 * C + c] += gi * s;
            in[0][t * 2 * C + C + c] += gi * xv[t * 2 * C + c] * s * (1.0 - s);
          }
      });
}

Tensor weight_norm(const Tensor& v, const Tensor& g) {
  if (v.dim() < 1 || g.shape() != Shape{v.shape()[0]}) {
    throw ShapeError(fmt::format("weight_norm: shape mismatch v {} g {}", shape_str(v.shape()),
                                 shape_str(g.shape())));
  }
  const std::size_t O = v.shape()[0];
  const std::size_t R = v.numel() / O;
  auto vv = v.data();
  auto gv = g.data();
  std::vector<double> norms(O), out(v.numel());
  for (std::size_t o = 0; o < O; ++o) {
    double sq = 0.0;
    for (std::size_t r = 0; r < R; ++r) sq += vv[o * R + r] * vv[o * R + r];
    if (!(sq > 0.0)) throw ValueError(fmt::format("weight_norm: zero-norm direction for unit {}", o));
    norms[o] = std::sqrt(sq);
    const double f = gv[o] / norms[o];
    for (std::size_t r = 0; r < R; ++r) out[o * R + r] = f * vv[o * R + r];
  }
  return Tensor::make_result(
      "weight_norm", v.shape(), std::move(out), {v, g},
      [v, g, norms = std::move(norms), O, R](std::span<const double> up,
                                            std::span<std::vector<double>> in) {
        auto vv = v.data();
        auto gv = g.data();
        for (std::size_t o = 0; o < O; ++o) {
          double dot = 0.0;
          for (std::size_t r = 0; r < R; ++r) dot += up[o * R + r] * vv[o * R + r];
          const double n = norms[o];
          if (!in[1].empty()) in[1][o] += dot / n;
          if (!in[0].empty()) {
            const double a = gv[o] / n;
            const double b = gv[o] * dot / (n * n * n);
            for (std::size_t r = 0; r < R; ++r) in[0][o * R + r] += a * up[o * R + r] - b * vv[o * R + r];
          }
        }
      });
}

Tensor dropout(const Tensor& x, double rate, Mode mode, RngStream& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ValueError(fmt::format("dropout: rate {} outside [0,1)", rate));
  if (mode == Mode::eval || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.numel());
  for (double& m : mask) m = rng.uniform() < rate ? 0.0 : keep_scale;
  return ops::mul(x, Tensor::from(x.shape(), std::move(mask)));
}

Tensor pool(const Tensor& r, const PoolingConfig& cfg) {
  if (r.dim() != 2) throw ShapeError("pool: expected [L, C], got " + shape_str(r.shape()));
  switch (cfg.kind) {
    case PoolKind::sum: return ops::sum(r, 0);
    case PoolKind::max: return ops::max(r, 0);
    case PoolKind::logsumexp: break;
  }
  const double tau = cfg.tau;
  if (!(tau > 0.0)) throw ValueError(fmt::format("pool: tau must be positive, got {}", tau));
  const std::size_t L = r.shape()[0], C = r.shape()[1];
  auto rv = r.data();
  // s = m + log(mean_t exp(tau (r_t - m))) / tau, with m the per-channel max.
  std::vector<double> out(C), weights(L * C);
  for (std::size_t c = 0; c < C; ++c) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < L; ++t) m = std::max(m, rv[t * C + c]);
    double acc = 0.0;
    for (std::size_t t = 0; t < L; ++t) {
      weights[t * C + c] = std::exp(tau * (rv[t * C + c] - m));
      acc += weights[t * C + c];
    }
    for (std::size_t t = 0; t < L; ++t) weights[t * C + c] /= acc;
    out[c] = m + std::log(acc / static_cast<double>(L)) / tau;
  }
  return Tensor::make_result(
      "pool_logsumexp", {C}, std::move(out), {r},
      [weights = std::move(weights), L, C](std::span<const double> g,
                                           std::span<std::vector<double>> in) {
        for (std::size_t t = 0; t < L; ++t)
          for (std::size_t c = 0; c < C; ++c) in[0][t * C + c] += g[c] * weights[t * C + c];
      });
}

Tensor grad_scale(const Tensor& x, double factor) {
  return Tensor::make_result("grad_scale", x.shape(), x.to_vector(), {x},
                             [factor](std::span<const double> g, std::span<std::vector<double>> in) {
                               for (std::size_t i = 0; i < g.size(); ++i) in[0][i] += factor * g[i];
                             });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (weight.dim() != 2 || x.dim() < 1 || x.shape().back() != weight.shape()[1]) {
    throw ShapeError(fmt::format("linear: shape mismatch x {} weight {}", shape_str(x.shape()),
                                 shape_str(weight.shape())));
  }
  const std::size_t in_ch = weight.shape()[1];
  const std::size_t rows = x.numel() / in_ch;
  Tensor flat = x.dim() == 2 ? x : ops::reshape(x, {rows, in_ch});
  Tensor y = ops::add(ops::matmul(flat, ops::transpose(weight)), bias);
  if (x.dim() == 2) return y;
  Shape out_shape = x.shape();
  out_shape.back() = weight.shape()[0];
  return ops::reshape(y, out_shape);
}

Tensor log_softmax(const Tensor& logits) {
  if (logits.dim() != 1) throw ShapeError("log_softmax: expected 1-D logits, got " + shape_str(logits.shape()));
  return ops::sub(logits, ops::logsumexp(logits, 0));
}

Tensor nll(const Tensor& logits, std::size_t label) {
  if (logits.dim() != 1 || label >= logits.shape()[0]) {
    throw ShapeError(fmt::format("nll: label {} invalid for logits {}", label, shape_str(logits.shape())));
  }
  Tensor picked = ops::reshape(ops::slice(logits, 0, label, label + 1), {});
  return ops::sub(ops::logsumexp(logits, 0), picked);
}

}  // namespace layers

WeightNormParams WeightNormParams::create(ParamStore& store, const std::string& name, Shape v_shape,
                                          std::size_t fan_in, std::size_t kernel_width,
                                          ParamGroup group, std::uint64_t seed) {
  const std::size_t out = v_shape.at(0);
  const std::size_t n = numel(v_shape);
  const std::size_t per_unit = n / out;
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in * kernel_width));
  RngStream rng(seed, "init/" + name + ".v");
  std::vector<double> v(n);
  for (double& e : v) e = rng.uniform(-bound, bound);
  std::vector<double> g(out);
  for (std::size_t o = 0; o < out; ++o) {
    double sq = 0.0;
    for (std::size_t r = 0; r < per_unit; ++r) sq += v[o * per_unit + r] * v[o * per_unit + r];
    if (!(sq > 0.0)) throw ValueError("weight init: zero-norm direction for '" + name + "'");
    g[o] = std::sqrt(sq);
  }
  WeightNormParams p;
  p.v = store.add(name + ".v", std::move(v_shape), std::move(v), group);
  p.g = store.add(name + ".g", {out}, std::move(g), group);
  p.b = store.add(name + ".b", {out}, std::vector<double>(out, 0.0), group);
  return p;
}

GatedConvLayer::GatedConvLayer(ParamStore& store, std::string name, const LayerSpec& spec,
                               ParamGroup group, std::uint64_t seed)
    : name_(std::move(name)), spec_(spec) {
  spec_.kind = LayerKind::gated_conv;
  spec_.validate();
  p_ = WeightNormParams::create(store, name_,
                                {2 * spec_.out_channels, spec_.in_channels, spec_.kernel_width},
                                spec_.in_channels, spec_.kernel_width, group, seed);
}

Tensor GatedConvLayer::forward(const Tensor& x, Mode mode, const RngStream* dropout_rng) const {
  Tensor h = layers::glu(layers::conv1d(x, p_.weight(), p_.b));
  if (mode == Mode::eval || spec_.dropout_rate == 0.0) return h;
  if (dropout_rng == nullptr) throw ValueError("gated conv '" + name_ + "': train mode needs an RNG");
  RngStream rng = dropout_rng->fork(name_);
  return layers::dropout(h, spec_.dropout_rate, mode, rng);
}

std::size_t GatedConvLayer::param_count() const { return p_.v.numel() + p_.g.numel() + p_.b.numel(); }

LinearLayer::LinearLayer(ParamStore& store, std::string name, const LayerSpec& spec,
                         ParamGroup group, std::uint64_t seed)
    : name_(std::move(name)), spec_(spec) {
  spec_.kind = LayerKind::linear;
  spec_.kernel_width = 1;
  spec_.validate();
  p_ = WeightNormParams::create(store, name_, {spec_.out_channels, spec_.in_channels},
                                spec_.in_channels, 1, group, seed);
}

Tensor LinearLayer::forward(const Tensor& x) const { return layers::linear(x, p_.weight(), p_.b); }

std::size_t LinearLayer::param_count() const { return p_.v.numel() + p_.g.numel() + p_.b.numel(); }

}  // namespace gradflip
