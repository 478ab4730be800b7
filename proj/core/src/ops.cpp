#include "gradflip/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "gradflip/error.hpp"

namespace gradflip::ops {
namespace {

struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw ShapeError(fmt::format("{}: axis {} out of range for {}", op, axis, shape_str(shape)));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Shape without_axis(const Shape& shape, std::size_t axis) {
  Shape out = shape;
  out.erase(out.begin() + static_cast<std::ptrdiff_t>(axis));
  return out;
}

void check_broadcast(const Tensor& a, const Tensor& b, const char* op) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  const bool suffix = bs.size() <= as.size() && std::equal(bs.rbegin(), bs.rend(), as.rbegin());
  if (!suffix) {
    throw ShapeError(fmt::format("{}: shape mismatch {} vs {}", op, shape_str(as), shape_str(bs)));
  }
}

template <typename Fwd, typename DA, typename DB>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, Fwd fwd, DA da, DB db) {
  check_broadcast(a, b, op);
  const std::size_t n = a.numel();
  const std::size_t m = b.numel();
  auto av = a.data();
  auto bv = b.data();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(av[i], bv[i % m]);
  return Tensor::make_result(
      op, a.shape(), std::move(out), {a, b},
      [a, b, n, m, da, db](std::span<const double> g, std::span<std::vector<double>> in) {
        auto av = a.data();
        auto bv = b.data();
        if (!in[0].empty()) {
          for (std::size_t i = 0; i < n; ++i) in[0][i] += g[i] * da(av[i], bv[i % m]);
        }
        if (!in[1].empty()) {
          for (std::size_t i = 0; i < n; ++i) in[1][i % m] += g[i] * db(av[i], bv[i % m]);
        }
      });
}

template <typename Fwd, typename Deriv>
Tensor unary(const char* op, const Tensor& a, Fwd fwd, Deriv deriv) {
  auto av = a.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  // deriv(x, y) gets the input and the output value.
  std::vector<double> y = out;
  return Tensor::make_result(
      op, a.shape(), std::move(out), {a},
      [a, y = std::move(y), deriv](std::span<const double> g, std::span<std::vector<double>> in) {
        auto av = a.data();
        for (std::size_t i = 0; i < g.size(); ++i) in[0][i] += g[i] * deriv(av[i], y[i]);
      });
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      "scale", a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double c) {
  return unary(
      "add_scalar", a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary("sigmoid", a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& a) {
  return unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary(
      "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.dim() != 2 || b.dim() != 2 || a.shape()[1] != b.shape()[0]) {
    throw ShapeError(
        fmt::format("matmul: shape mismatch {} x {}", shape_str(a.shape()), shape_str(b.shape())));
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  auto av = a.data();
  auto bv = b.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aip * bv[p * n + j];
    }
  }
  return Tensor::make_result(
      "matmul", {m, n}, std::move(out), {a, b},
      [a, b, m, k, n](std::span<const double> g, std::span<std::vector<double>> in) {
        auto av = a.data();
        auto bv = b.data();
        if (!in[0].empty()) {
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              double acc = 0.0;
              for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bv[p * n + j];
              in[0][i * k + p] += acc;
            }
        }
        if (!in[1].empty()) {
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              const double aip = av[i * k + p];
              for (std::size_t j = 0; j < n; ++j) in[1][p * n + j] += aip * g[i * n + j];
            }
        }
      });
}

Tensor transpose(const Tensor& a) {
  if (a.dim() != 2) throw ShapeError("transpose: expected 2-D, got " + shape_str(a.shape()));
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  auto av = a.data();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  return Tensor::make_result("transpose", {c, r}, std::move(out), {a},
                             [r, c](std::span<const double> g, std::span<std::vector<double>> in) {
                               for (std::size_t i = 0; i < r; ++i)
                                 for (std::size_t j = 0; j < c; ++j)
                                   in[0][i * c + j] += g[j * r + i];
                             });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.numel()) {
    throw ShapeError(
        fmt::format("reshape: cannot view {} as {}", shape_str(a.shape()), shape_str(shape)));
  }
  return Tensor::make_result("reshape", std::move(shape), a.to_vector(), {a},
                             [](std::span<const double> g, std::span<std::vector<double>> in) {
                               for (std::size_t i = 0; i < g.size(); ++i) in[0][i] += g[i];
                             });
}

Tensor sum(const Tensor& a, std::size_t axis) {
  const AxisSplit s = split_at(a.shape(), axis, "sum");
  auto av = a.data();
  std::vector<double> out(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t e = 0; e < s.extent; ++e)
      for (std::size_t i = 0; i < s.inner; ++i)
        out[o * s.inner + i] += av[(o * s.extent + e) * s.inner + i];
  return Tensor::make_result("sum", without_axis(a.shape(), axis), std::move(out), {a},
                             [s](std::span<const double> g, std::span<std::vector<double>> in) {
                               for (std::size_t o = 0; o < s.outer; ++o)
                                 for (std::size_t e = 0; e < s.extent; ++e)
                                   for (std::size_t i = 0; i < s.inner; ++i)
                                     in[0][(o * s.extent + e) * s.inner + i] += g[o * s.inner + i];
                             });
}

Tensor max(const Tensor& a, std::size_t axis) {
  const AxisSplit s = split_at(a.shape(), axis, "max");
  auto av = a.data();
  std::vector<double> out(s.outer * s.inner);
  std::vector<std::size_t> arg(s.outer * s.inner, 0);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.inner; ++i) {
      std::size_t best = 0;
      double best_v = av[o * s.extent * s.inner + i];
      for (std::size_t e = 1; e < s.extent; ++e) {
        const double v = av[(o * s.extent + e) * s.inner + i];
        if (v > best_v) {
          best_v = v;
          best = e;
        }
      }
      out[o * s.inner + i] = best_v;
      arg[o * s.inner + i] = best;
    }
  return Tensor::make_result(
      "max", without_axis(a.shape(), axis), std::move(out), {a},
      [s, arg = std::move(arg)](std::span<const double> g, std::span<std::vector<double>> in) {
        for (std::size_t o = 0; o < s.outer; ++o)
          for (std::size_t i = 0; i < s.inner; ++i) {
            const std::size_t k = o * s.inner + i;
            in[0][(o * s.extent + arg[k]) * s.inner + i] += g[k];
          }
      });
}

Tensor logsumexp(const Tensor& a, std::size_t axis) {
  const AxisSplit s = split_at(a.shape(), axis, "logsumexp");
  auto av = a.data();
  std::vector<double> out(s.outer * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.inner; ++i) {
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t e = 0; e < s.extent; ++e) m = std::max(m, av[(o * s.extent + e) * s.inner + i]);
      double acc = 0.0;
      for (std::size_t e = 0; e < s.extent; ++e) acc += std::exp(av[(o * s.extent + e) * s.inner + i] - m);
      out[o * s.inner + i] = m + std::log(acc);
    }
  std::vector<double> y = out;
  return Tensor::make_result(
      "logsumexp", without_axis(a.shape(), axis), std::move(out), {a},
      [a, s, y = std::move(y)](std::span<const double> g, std::span<std::vector<double>> in) {
        auto av = a.data();
        for (std::size_t o = 0; o < s.outer; ++o)
          for (std::size_t i = 0; i < s.inner; ++i) {
            const std::size_t k = o * s.inner + i;
            for (std::size_t e = 0; e < s.extent; ++e) {
              const std::size_t idx = (o * s.extent + e) * s.inner + i;
              in[0][idx] += g[k] * std::exp(av[idx] - y[k]);
            }
          }
      });
}

Tensor sum_all(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  return Tensor::make_result("sum_all", {}, {acc}, {a},
                             [](std::span<const double> g, std::span<std::vector<double>> in) {
                               for (double& v : in[0]) v += g[0];
                             });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
  const AxisSplit s = split_at(a.shape(), axis, "slice");
  if (begin >= end || end > s.extent) {
    throw ShapeError(fmt::format("slice: range [{},{}) invalid for axis {} of {}", begin, end, axis,
                                 shape_str(a.shape())));
  }
  const std::size_t len = end - begin;
  Shape shape = a.shape();
  shape[axis] = len;
  auto av = a.data();
  std::vector<double> out(s.outer * len * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t e = 0; e < len; ++e)
      for (std::size_t i = 0; i < s.inner; ++i)
        out[(o * len + e) * s.inner + i] = av[(o * s.extent + begin + e) * s.inner + i];
  return Tensor::make_result(
      "slice", std::move(shape), std::move(out), {a},
      [s, begin, len](std::span<const double> g, std::span<std::vector<double>> in) {
        for (std::size_t o = 0; o < s.outer; ++o)
          for (std::size_t e = 0; e < len; ++e)
            for (std::size_t i = 0; i < s.inner; ++i)
              in[0][(o * s.extent + begin + e) * s.inner + i] += g[(o * len + e) * s.inner + i];
      });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts.front().shape();
  const AxisSplit s0 = split_at(first, axis, "concat");
  std::vector<std::size_t> extents;
  std::size_t total = 0;
  for (const auto& p : parts) {
    Shape a = p.shape(), b = first;
    if (a.size() != b.size() || axis >= a.size()) {
      throw ShapeError(fmt::format("concat: shape mismatch {} vs {}", shape_str(first), shape_str(a)));
    }
    a[axis] = b[axis] = 0;
    if (a != b) {
      throw ShapeError(
          fmt::format("concat: shape mismatch {} vs {}", shape_str(first), shape_str(p.shape())));
    }
    extents.push_back(p.shape()[axis]);
    total += p.shape()[axis];
  }
  Shape shape = first;
  shape[axis] = total;
  std::vector<double> out(s0.outer * total * s0.inner);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto pv = parts[k].data();
    for (std::size_t o = 0; o < s0.outer; ++o)
      for (std::size_t e = 0; e < extents[k]; ++e)
        for (std::size_t i = 0; i < s0.inner; ++i)
          out[(o * total + offset + e) * s0.inner + i] = pv[(o * extents[k] + e) * s0.inner + i];
    offset += extents[k];
  }
  return Tensor::make_result(
      "concat", std::move(shape), std::move(out), parts,
      [s0, total, extents](std::span<const double> g, std::span<std::vector<double>> in) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < extents.size(); ++k) {
          if (!in[k].empty()) {
            for (std::size_t o = 0; o < s0.outer; ++o)
              for (std::size_t e = 0; e < extents[k]; ++e)
                for (std::size_t i = 0; i < s0.inner; ++i)
                  in[k][(o * extents[k] + e) * s0.inner + i] +=
                      g[(o * total + offset + e) * s0.inner + i];
          }
          offset += extents[k];
        }
      });
}

}  // namespace gradflip::ops
