#include "gradflip/asg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "gradflip/error.hpp"

namespace gradflip::asg {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double logadd(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

void check_shapes(const Tensor& em, const Tensor& tr) {
  if (em.dim() != 2 || tr.dim() != 2 || tr.shape()[0] != tr.shape()[1] ||
      tr.shape()[0] != em.shape()[1]) {
    throw ShapeError(fmt::format("asg: emissions {} and transitions {} do not match",
                                 shape_str(em.shape()), shape_str(tr.shape())));
  }
}

// Matrices in [T][*] row-major layout.
struct Lattice {
  std::size_t T = 0, K = 0;
  std::vector<double> alpha, beta;
  double logz = 0.0;
};

Lattice full_graph(std::span<const double> f, std::span<const double> g, std::size_t T,
                   std::size_t K, bool with_beta) {
  Lattice l{T, K, std::vector<double>(T * K), {}, 0.0};
  std::vector<double> terms(K);
  for (std::size_t i = 0; i < K; ++i) l.alpha[i] = f[i];
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t i = 0; i < K; ++i) {
      double m = kNegInf;
      for (std::size_t j = 0; j < K; ++j) {
        terms[j] = l.alpha[(t - 1) * K + j] + g[j * K + i];
        m = std::max(m, terms[j]);
      }
      double acc = 0.0;
      for (std::size_t j = 0; j < K; ++j) acc += std::exp(terms[j] - m);
      l.alpha[t * K + i] = f[t * K + i] + m + std::log(acc);
    }
  }
  double m = kNegInf;
  for (std::size_t i = 0; i < K; ++i) m = std::max(m, l.alpha[(T - 1) * K + i]);
  double acc = 0.0;
  for (std::size_t i = 0; i < K; ++i) acc += std::exp(l.alpha[(T - 1) * K + i] - m);
  l.logz = m + std::log(acc);
  if (!with_beta) return l;

  l.beta.assign(T * K, 0.0);
  for (std::size_t t = T - 1; t-- > 0;) {
    for (std::size_t j = 0; j < K; ++j) {
      double mm = kNegInf;
      for (std::size_t i = 0; i < K; ++i) {
        terms[i] = g[j * K + i] + f[(t + 1) * K + i] + l.beta[(t + 1) * K + i];
        mm = std::max(mm, terms[i]);
      }
      double s = 0.0;
      for (std::size_t i = 0; i < K; ++i) s += std::exp(terms[i] - mm);
      l.beta[t * K + j] = mm + std::log(s);
    }
  }
  return l;
}

Lattice constrained_graph(std::span<const double> f, std::span<const double> g, std::size_t T,
                          std::size_t K, std::span<const int> y, bool with_beta) {
  const std::size_t N = y.size();
  Lattice l{T, N, std::vector<double>(T * N, kNegInf), {}, 0.0};
  auto emit = [&](std::size_t t, std::size_t n) { return f[t * K + static_cast<std::size_t>(y[n])]; };
  auto trans = [&](std::size_t a, std::size_t b) {
    return g[static_cast<std::size_t>(y[a]) * K + static_cast<std::size_t>(y[b])];
  };
  l.alpha[0] = emit(0, 0);
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t n = 0; n < N; ++n) {
      double v = l.alpha[(t - 1) * N + n];
      v = v == kNegInf ? kNegInf : v + trans(n, n);
      if (n > 0) {
        const double prev = l.alpha[(t - 1) * N + n - 1];
        if (prev != kNegInf) v = logadd(v, prev + trans(n - 1, n));
      }
      l.alpha[t * N + n] = v == kNegInf ? kNegInf : v + emit(t, n);
    }
  }
  l.logz = l.alpha[(T - 1) * N + N - 1];
  if (!with_beta) return l;

  l.beta.assign(T * N, kNegInf);
  l.beta[(T - 1) * N + N - 1] = 0.0;
  for (std::size_t t = T - 1; t-- > 0;) {
    for (std::size_t n = 0; n < N; ++n) {
      double v = l.beta[(t + 1) * N + n];
      v = v == kNegInf ? kNegInf : v + trans(n, n) + emit(t + 1, n);
      if (n + 1 < N) {
        const double next = l.beta[(t + 1) * N + n + 1];
        if (next != kNegInf) v = logadd(v, next + trans(n, n + 1) + emit(t + 1, n + 1));
      }
      l.beta[t * N + n] = v;
    }
  }
  return l;
}

}  // namespace

void validate_target(std::span<const int> target, std::size_t frames, std::size_t vocab) {
  if (target.empty()) throw ValueError("asg: empty target");
  if (target.size() > frames) {
    throw ValueError(fmt::format("asg: target length {} exceeds {} frames", target.size(), frames));
  }
  for (std::size_t n = 0; n < target.size(); ++n) {
    if (target[n] < 0 || static_cast<std::size_t>(target[n]) >= vocab) {
      throw ValueError(fmt::format("asg: token {} at position {} outside vocabulary of {}", target[n], n,
                                   vocab));
    }
    if (n > 0 && target[n] == target[n - 1]) {
      throw ValueError(fmt::format("asg: adjacent duplicate token {} at position {}", target[n], n));
    }
  }
}

double full_logadd(const Tensor& emissions, const Tensor& transitions) {
  check_shapes(emissions, transitions);
  return full_graph(emissions.data(), transitions.data(), emissions.shape()[0], emissions.shape()[1],
                    false)
      .logz;
}

double constrained_logadd(const Tensor& emissions, const Tensor& transitions,
                          std::span<const int> target) {
  check_shapes(emissions, transitions);
  validate_target(target, emissions.shape()[0], emissions.shape()[1]);
  return constrained_graph(emissions.data(), transitions.data(), emissions.shape()[0],
                           emissions.shape()[1], target, false)
      .logz;
}

Tensor asg_loss(const Tensor& emissions, const Tensor& transitions, std::span<const int> target) {
  check_shapes(emissions, transitions);
  const std::size_t T = emissions.shape()[0], K = emissions.shape()[1];
  validate_target(target, T, K);
  const bool need_grad = emissions.tracked() || transitions.tracked();
  auto f = emissions.data();
  auto g = transitions.data();
  Lattice full = full_graph(f, g, T, K, need_grad);
  Lattice cons = constrained_graph(f, g, T, K, target, need_grad);
  const double loss = full.logz - cons.logz;

  TokenSeq y(target.begin(), target.end());
  return Tensor::make_result(
      "asg_loss", {}, {loss}, {emissions, transitions},
      [emissions, transitions, full = std::move(full), cons = std::move(cons), y = std::move(y)](
          std::span<const double> up, std::span<std::vector<double>> in) {
        const double scale = up[0];
        auto f = emissions.data();
        auto g = transitions.data();
        const std::size_t T = full.T, K = full.K, N = y.size();
        auto& df = in[0];
        auto& dg = in[1];
        // Full graph contributes +posterior, constrained graph -posterior.
        for (std::size_t t = 0; t < T; ++t) {
          for (std::size_t i = 0; i < K; ++i) {
            const double p = std::exp(full.alpha[t * K + i] + full.beta[t * K + i] - full.logz);
            if (!df.empty()) df[t * K + i] += scale * p;
            if (!dg.empty() && t > 0) {
              const double tail = f[t * K + i] + full.beta[t * K + i] - full.logz;
              for (std::size_t j = 0; j < K; ++j) {
                dg[j * K + i] += scale * std::exp(full.alpha[(t - 1) * K + j] + g[j * K + i] + tail);
              }
            }
          }
        }
        for (std::size_t t = 0; t < T; ++t) {
          for (std::size_t n = 0; n < N; ++n) {
            const double a = cons.alpha[t * N + n], b = cons.beta[t * N + n];
            if (a == kNegInf || b == kNegInf) continue;
            const std::size_t yn = static_cast<std::size_t>(y[n]);
            if (!df.empty()) df[t * K + yn] -= scale * std::exp(a + b - cons.logz);
            if (dg.empty() || t == 0) continue;
            const double tail = f[t * K + yn] + b - cons.logz;
            const double stay = cons.alpha[(t - 1) * N + n];
            if (stay != kNegInf) dg[yn * K + yn] -= scale * std::exp(stay + g[yn * K + yn] + tail);
            if (n > 0) {
              const double move = cons.alpha[(t - 1) * N + n - 1];
              const std::size_t yp = static_cast<std::size_t>(y[n - 1]);
              if (move != kNegInf) dg[yp * K + yn] -= scale * std::exp(move + g[yp * K + yn] + tail);
            }
          }
        }
      });
}

TokenSeq viterbi_decode(const Tensor& emissions, const Tensor& transitions) {
  check_shapes(emissions, transitions);
  const std::size_t T = emissions.shape()[0], K = emissions.shape()[1];
  auto f = emissions.data();
  auto g = transitions.data();
  // best[t][i]: best score of frames t..T-1 given token i at frame t. Tracing
  // forward with lowest-index tie-breaking yields the lexicographically
  // smallest optimal path.
  std::vector<double> best(T * K);
  for (std::size_t i = 0; i < K; ++i) best[(T - 1) * K + i] = f[(T - 1) * K + i];
  for (std::size_t t = T - 1; t-- > 0;) {
    for (std::size_t i = 0; i < K; ++i) {
      double m = kNegInf;
      for (std::size_t j = 0; j < K; ++j) m = std::max(m, g[i * K + j] + best[(t + 1) * K + j]);
      best[t * K + i] = f[t * K + i] + m;
    }
  }
  TokenSeq path(T);
  std::size_t cur = 0;
  for (std::size_t i = 1; i < K; ++i)
    if (best[i] > best[cur]) cur = i;
  path[0] = static_cast<int>(cur);
  for (std::size_t t = 1; t < T; ++t) {
    std::size_t arg = 0;
    double m = g[cur * K] + best[t * K];
    for (std::size_t j = 1; j < K; ++j) {
      const double v = g[cur * K + j] + best[t * K + j];
      if (v > m) {
        m = v;
        arg = j;
      }
    }
    cur = arg;
    path[t] = static_cast<int>(cur);
  }
  return path;
}

double path_score(const Tensor& emissions, const Tensor& transitions, std::span<const int> path) {
  check_shapes(emissions, transitions);
  const std::size_t T = emissions.shape()[0], K = emissions.shape()[1];
  if (path.size() != T) throw ShapeError("path_score: path length does not match frame count");
  double s = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    s += emissions.at(t, static_cast<std::size_t>(path[t]));
    if (t > 0) s += transitions.data()[static_cast<std::size_t>(path[t - 1]) * K + static_cast<std::size_t>(path[t])];
  }
  return s;
}

TokenSeq collapse(std::span<const int> path) {
  TokenSeq out;
  for (int tok : path)
    if (out.empty() || out.back() != tok) out.push_back(tok);
  return out;
}

}  // namespace gradflip::asg
