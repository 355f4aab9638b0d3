#pragma once

#include "ppap/nn/graph.h"

#include <cstdint>
#include <random>
#include <span>
#include <vector>

// Differentiable ops over Graph<T>. Layouts are channels-last throughout:
// images are [B, H, W, C], sequences are [B, N, D].
namespace ppap::nn {

enum class Padding { same, valid };

// x [B,H,W,Cin], kernel [kh,kw,Cin,Cout], bias [Cout].
template <typename T>
Var<T> conv2d(Var<T> x, Var<T> kernel, Var<T> bias, Padding padding);

// Per-channel normalisation over every axis but the last. In training the
// batch statistics are used and, when `updated_mean`/`updated_var` are given,
// (1 - momentum) * running + momentum * batch is written to them (they may
// alias the running tensors). In eval the running statistics are used.
// Throws if the running statistics do not cover the channel count.
template <typename T>
Var<T> batch_norm(Var<T> x, Var<T> scale, Var<T> shift, const Tensor<T> & running_mean, const Tensor<T> & running_var,
                  bool training, double momentum = 0.1, double eps = 1e-5, Tensor<T> * updated_mean = nullptr,
                  Tensor<T> * updated_var = nullptr);

// Inverted dropout; identity when !training or rate == 0.
template <typename T>
Var<T> dropout(Var<T> x, double rate, bool training, std::mt19937_64 & rng);

template <typename T>
Var<T> swish(Var<T> x);

template <typename T>
Var<T> tanh(Var<T> x);

// 2x2 stride-2 mean over axes 1 and 2 of [B,H,W,C]; trailing odd rows or
// columns are dropped.
template <typename T>
Var<T> avg_pool2d(Var<T> x);

template <typename T>
Var<T> reshape(Var<T> x, Shape shape);

// Affine map over the last axis: x [..., Din], w [Din, Dout], b [Dout].
template <typename T>
Var<T> dense(Var<T> x, Var<T> w, Var<T> b);

template <typename T>
Var<T> add(Var<T> a, Var<T> b);

// x [B, N, D] + y [B, D] broadcast over N.
template <typename T>
Var<T> add_over_time(Var<T> x, Var<T> y);

// y[b, ...] = s[b] * x[b, ...] for constant s.
template <typename T>
Var<T> scale_rows(Var<T> x, std::span<const T> s);

template <typename T>
Var<T> scale(Var<T> x, T factor);

// Concatenate along the last axis.
template <typename T>
Var<T> concat_last(Var<T> a, Var<T> b);

// Stack k equal-shaped tensors along a new trailing axis.
template <typename T>
Var<T> stack_last(const std::vector<Var<T>> & parts);

// y[..., d] = sum_s x[..., d, s] * w[d, s] + b[d]; x [..., D, S], w [D, S], b [D].
template <typename T>
Var<T> stack_conv(Var<T> x, Var<T> w, Var<T> b);

// Mean over axis 1 of [B, N, D] -> [B, D].
template <typename T>
Var<T> mean_time(Var<T> x);

// s[b, h, t] = factor * <q[b, head h], k[b, t, head h]> for q [B,D], k [B,N,D].
template <typename T>
Var<T> attention_scores(Var<T> q, Var<T> k, std::size_t heads, T factor);

template <typename T>
Var<T> softmax_last(Var<T> x);

// z[b, d] = sum_t alpha[b, head(d), t] * v[b, t, d]; alpha [B,H,N], v [B,N,D].
template <typename T>
Var<T> attention_combine(Var<T> alpha, Var<T> v);

// Column j of [B, K] -> [B].
template <typename T>
Var<T> select_column(Var<T> x, std::size_t j);

// Gradient passes only where lo < x < hi.
template <typename T>
Var<T> clamp(Var<T> x, T lo, T hi);

template <typename T>
Var<T> sum(Var<T> x);

// mean_b [ 0.5 ((y_b - mu_b) / sigma_b)^2 + log sigma_b ] with sigma = exp(log_sigma).
template <typename T>
Var<T> gaussian_nll(Var<T> mu, Var<T> log_sigma, std::span<const T> labels);

} // namespace ppap::nn
