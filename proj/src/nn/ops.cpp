#include "ppap/nn/ops.h"

#include "ppap/common/error.h"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

namespace ppap::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

[[noreturn]] void shape_error(const char * op, const std::string & detail) {
    throw UsageError(std::string(op) + ": " + detail);
}

Shape with_last(Shape s, std::size_t last) {
    s.back() = last;
    return s;
}

struct ConvGeometry {
    std::size_t batch, height, width, cin;
    std::size_t kh, kw, cout;
    std::size_t out_h, out_w;
    std::size_t pad_h, pad_w;

    std::size_t patch() const { return kh * kw * cin; }
    std::size_t rows() const { return out_h * out_w; }
};

template <typename T>
void im2col(const T * image, const ConvGeometry & g, T * col) {
    const std::size_t K = g.patch();
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            T * row = col + (oy * g.out_w + ox) * K;
            for (std::size_t dy = 0; dy < g.kh; ++dy) {
                const long iy = static_cast<long>(oy + dy) - static_cast<long>(g.pad_h);
                for (std::size_t dx = 0; dx < g.kw; ++dx) {
                    const long ix = static_cast<long>(ox + dx) - static_cast<long>(g.pad_w);
                    T * dst = row + (dy * g.kw + dx) * g.cin;
                    if (iy < 0 || ix < 0 || iy >= static_cast<long>(g.height) || ix >= static_cast<long>(g.width)) {
                        std::fill(dst, dst + g.cin, T(0));
                    } else {
                        std::memcpy(dst, image + (static_cast<std::size_t>(iy) * g.width + static_cast<std::size_t>(ix)) * g.cin,
                                    sizeof(T) * g.cin);
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const T * col, const ConvGeometry & g, T * image) {
    const std::size_t K = g.patch();
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const T * row = col + (oy * g.out_w + ox) * K;
            for (std::size_t dy = 0; dy < g.kh; ++dy) {
                const long iy = static_cast<long>(oy + dy) - static_cast<long>(g.pad_h);
                if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
                for (std::size_t dx = 0; dx < g.kw; ++dx) {
                    const long ix = static_cast<long>(ox + dx) - static_cast<long>(g.pad_w);
                    if (ix < 0 || ix >= static_cast<long>(g.width)) continue;
                    const T * src = row + (dy * g.kw + dx) * g.cin;
                    T * dst = image + (static_cast<std::size_t>(iy) * g.width + static_cast<std::size_t>(ix)) * g.cin;
                    for (std::size_t c = 0; c < g.cin; ++c) dst[c] += src[c];
                }
            }
        }
    }
}

template <typename T>
void accumulate(Tensor<T> & dst, const Tensor<T> & src) {
    T * d = dst.data();
    const T * s = src.data();
    for (std::size_t i = 0; i < src.size(); ++i) d[i] += s[i];
}

template <typename T>
T sigmoid(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

} // namespace

template <typename T>
Var<T> conv2d(Var<T> x, Var<T> kernel, Var<T> bias, Padding padding) {
    const Shape & xs = x.shape();
    const Shape & ks = kernel.shape();
    if (xs.size() != 4) shape_error("conv2d", "input must be [B,H,W,C], got " + shape_string(xs));
    if (ks.size() != 4) shape_error("conv2d", "kernel must be [kh,kw,Cin,Cout], got " + shape_string(ks));
    if (ks[2] != xs[3]) {
        shape_error("conv2d", "channel mismatch: input has " + std::to_string(xs[3]) + ", kernel expects " +
                                  std::to_string(ks[2]));
    }
    if (bias.value().size() != ks[3]) shape_error("conv2d", "bias width differs from output channels");

    ConvGeometry g{xs[0], xs[1], xs[2], xs[3], ks[0], ks[1], ks[3], 0, 0, 0, 0};
    if (padding == Padding::same) {
        if (g.kh % 2 == 0 || g.kw % 2 == 0) shape_error("conv2d", "same padding needs an odd-sized kernel");
        g.pad_h = (g.kh - 1) / 2;
        g.pad_w = (g.kw - 1) / 2;
        g.out_h = g.height;
        g.out_w = g.width;
    } else {
        if (g.height < g.kh || g.width < g.kw) shape_error("conv2d", "input smaller than kernel for valid padding");
        g.out_h = g.height - g.kh + 1;
        g.out_w = g.width - g.kw + 1;
    }

    const std::size_t K = g.patch();
    const std::size_t R = g.rows();
    Tensor<T> out({g.batch, g.out_h, g.out_w, g.cout});
    std::vector<T> col(R * K);
    ConstMatMap<T> kmat(kernel.value().data(), K, g.cout);
    Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bvec(bias.value().data(), g.cout);
    const std::size_t in_stride = g.height * g.width * g.cin;
    for (std::size_t b = 0; b < g.batch; ++b) {
        im2col(x.value().data() + b * in_stride, g, col.data());
        MatMap<T> y(out.data() + b * R * g.cout, R, g.cout);
        y.noalias() = ConstMatMap<T>(col.data(), R, K) * kmat;
        y.rowwise() += bvec;
    }

    Graph<T> & graph = x.graph();
    return graph.emit(std::move(out), {x, kernel, bias}, [&graph, x, kernel, bias, g](const Tensor<T> & dy) {
        const std::size_t K = g.patch();
        const std::size_t R = g.rows();
        const std::size_t in_stride = g.height * g.width * g.cin;
        const bool need_x = graph.needs_grad(x);
        const bool need_k = graph.needs_grad(kernel);
        const bool need_b = graph.needs_grad(bias);
        std::vector<T> col(R * K);
        ConstMatMap<T> kmat(kernel.value().data(), K, g.cout);
        for (std::size_t b = 0; b < g.batch; ++b) {
            ConstMatMap<T> dyb(dy.data() + b * R * g.cout, R, g.cout);
            if (need_k) {
                im2col(x.value().data() + b * in_stride, g, col.data());
                MatMap<T> dk(graph.grad(kernel).data(), K, g.cout);
                dk.noalias() += ConstMatMap<T>(col.data(), R, K).transpose() * dyb;
            }
            if (need_b) {
                Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> db(graph.grad(bias).data(), g.cout);
                db += dyb.colwise().sum();
            }
            if (need_x) {
                MatMap<T> dcol(col.data(), R, K);
                dcol.noalias() = dyb * kmat.transpose();
                col2im_add(col.data(), g, graph.grad(x).data() + b * in_stride);
            }
        }
    });
}

template <typename T>
Var<T> batch_norm(Var<T> x, Var<T> scale, Var<T> shift, const Tensor<T> & running_mean, const Tensor<T> & running_var,
                  bool training, double momentum, double eps, Tensor<T> * updated_mean, Tensor<T> * updated_var) {
    const Shape & xs = x.shape();
    if (xs.empty()) shape_error("batch_norm", "input must have a channel axis");
    const std::size_t C = xs.back();
    const std::size_t M = x.value().size() / C;
    if (scale.value().size() != C || shift.value().size() != C) {
        shape_error("batch_norm", "scale/shift width differs from channel count " + std::to_string(C));
    }
    if (running_mean.size() != C || running_var.size() != C) {
        throw UsageError("batch_norm: running statistics are not initialised for " + std::to_string(C) + " channels");
    }
    if (M == 0) shape_error("batch_norm", "empty input");

    const T * xv = x.value().data();
    std::vector<T> mean(C), inv_std(C);
    if (training) {
        std::vector<double> acc(C, 0.0), acc2(C, 0.0);
        for (std::size_t i = 0; i < M; ++i) {
            for (std::size_t c = 0; c < C; ++c) acc[c] += xv[i * C + c];
        }
        for (std::size_t c = 0; c < C; ++c) acc[c] /= static_cast<double>(M);
        for (std::size_t i = 0; i < M; ++i) {
            for (std::size_t c = 0; c < C; ++c) {
                const double d = xv[i * C + c] - acc[c];
                acc2[c] += d * d;
            }
        }
        for (std::size_t c = 0; c < C; ++c) {
            const double var = acc2[c] / static_cast<double>(M);
            mean[c] = static_cast<T>(acc[c]);
            inv_std[c] = static_cast<T>(1.0 / std::sqrt(var + eps));
            if (updated_mean) (*updated_mean)[c] = static_cast<T>((1.0 - momentum) * running_mean[c] + momentum * acc[c]);
            if (updated_var) (*updated_var)[c] = static_cast<T>((1.0 - momentum) * running_var[c] + momentum * var);
        }
    } else {
        for (std::size_t c = 0; c < C; ++c) {
            mean[c] = running_mean[c];
            inv_std[c] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var[c]) + eps));
        }
    }

    Tensor<T> out(xs);
    const T * sc = scale.value().data();
    const T * sh = shift.value().data();
    T * yv = out.data();
    for (std::size_t i = 0; i < M; ++i) {
        for (std::size_t c = 0; c < C; ++c) yv[i * C + c] = sc[c] * (xv[i * C + c] - mean[c]) * inv_std[c] + sh[c];
    }

    Graph<T> & graph = x.graph();
    return graph.emit(std::move(out), {x, scale, shift},
                      [&graph, x, scale, shift, mean = std::move(mean), inv_std = std::move(inv_std), training, C,
                       M](const Tensor<T> & dy) {
                          const T * xv = x.value().data();
                          const T * sc = scale.value().data();
                          const T * g = dy.data();
                          std::vector<T> sum_dy(C, T(0)), sum_dy_xhat(C, T(0));
                          for (std::size_t i = 0; i < M; ++i) {
                              for (std::size_t c = 0; c < C; ++c) {
                                  const T xhat = (xv[i * C + c] - mean[c]) * inv_std[c];
                                  sum_dy[c] += g[i * C + c];
                                  sum_dy_xhat[c] += g[i * C + c] * xhat;
                              }
                          }
                          if (graph.needs_grad(scale)) {
                              T * d = graph.grad(scale).data();
                              for (std::size_t c = 0; c < C; ++c) d[c] += sum_dy_xhat[c];
                          }
                          if (graph.needs_grad(shift)) {
                              T * d = graph.grad(shift).data();
                              for (std::size_t c = 0; c < C; ++c) d[c] += sum_dy[c];
                          }
                          if (!graph.needs_grad(x)) return;
                          T * dx = graph.grad(x).data();
                          if (training) {
                              const T inv_m = T(1) / static_cast<T>(M);
                              for (std::size_t i = 0; i < M; ++i) {
                                  for (std::size_t c = 0; c < C; ++c) {
                                      const T xhat = (xv[i * C + c] - mean[c]) * inv_std[c];
                                      dx[i * C + c] += sc[c] * inv_std[c] * inv_m *
                                                       (static_cast<T>(M) * g[i * C + c] - sum_dy[c] - xhat * sum_dy_xhat[c]);
                                  }
                              }
                          } else {
                              for (std::size_t i = 0; i < M; ++i) {
                                  for (std::size_t c = 0; c < C; ++c) dx[i * C + c] += g[i * C + c] * sc[c] * inv_std[c];
                              }
                          }
                      });
}

template <typename T>
Var<T> dropout(Var<T> x, double rate, bool training, std::mt19937_64 & rng) {
    if (!(rate >= 0.0 && rate < 1.0)) throw UsageError("dropout rate must be in [0, 1)");
    if (!training || rate == 0.0) return x;
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::vector<T> mask(x.value().size());
    Tensor<T> out(x.shape());
    const T * xv = x.value().data();
    for (std::size_t i = 0; i < mask.size(); ++i) {
        mask[i] = uniform(rng) < rate ? T(0) : keep_scale;
        out[i] = xv[i] * mask[i];
    }
    Graph<T> & graph = x.graph();
    return graph.emit(std::move(out), {x}, [&graph, x, mask = std::move(mask)](const Tensor<T> & dy) {
        T * dx = graph.grad(x).data();
        for (std::size_t i = 0; i < mask.size(); ++i) dx[i] += dy[i] * mask[i];
    });
}

template <typename T>
Var<T> swish(Var<T> x) {
    Tensor<T> out(x.shape());
    const T * xv = x.value().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * sigmoid(xv[i]);
    Graph<T> & graph = x.graph();
    return graph.emit(std::move(out), {x}, [&graph, x](const Tensor<T> & dy) {
        const T * xv = x.value().data();
        T * dx = graph.grad(x).data();
        for (std::size_t i = 0; i < dy.size(); ++i) {
            const T s = sigmoid(xv[i]);
            dx[i] += dy[i] * (s + xv[i] * s * (T(1) - s));
        }
    });
}

template <typename T>
Var<T> tanh(Var<T> x) {
    Tensor<T> out(x.shape());
    const T * xv = x.value().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(xv[i]);
    Graph<T> & graph = x.graph();
    const std::size_t out_id = graph.node_count();
    return graph.emit(std::move(out), {x}, [&graph, x, out_id](const Tensor<T> & dy) {
        const T * yv = graph.value(Var<T>(&graph, out_id)).data();
        T * dx = graph.grad(x).data();
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * (T(1) - yv[i] * yv[i]);
    });
}

template <typename T>
Var<T> avg_pool2d(Var<T> x) {
    const Shape & xs = x.shape();
    if (xs.size() != 4) shape_error("avg_pool2d", "input must be [B,H,W,C], got " + shape_string(xs));
    const std::size_t B = xs[0], H = xs[1], W = xs[2], C = xs[3];
    if (H < 2 || W < 2) shape_error("avg_pool2d", "pooled axes must be >= 2, got " + shape_string(xs));
    const std::size_t Ho = H / 2, Wo = W / 2;
    Tensor<T> out({B, Ho, Wo, C});
    const T * xv = x.value().data();
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t i = 0; i < Ho; ++i) {
            for (std::size_t j = 0; j < Wo; ++j) {
                T * y = out.data() + ((b * Ho + i) * Wo + j) * C;
                const T * p00 = xv + ((b * H + 2 * i) * W + 2 * j) * C;
                const T * p01 = p00 + C;
                const T * p10 = p00 + W * C;
                const T * p11 = p10 + C;
                for (std::size_t c = 0; c < C; ++c) y[c] = T(0.25) * (p00[c] + p01[c] + p10[c] + p11[c]);
            }
        }
    }
    Graph<T> & graph = x.graph();
    return graph.emit(std::move(out), {x}, [&graph, x, B, H, W, C, Ho, Wo](const Tensor<T> & dy) {
        T * dx = graph.grad(x).data();
        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t i = 0; i < Ho; ++i) {
                for (std::size_t j = 0; j < Wo; ++j) {
                    const T * g = dy.data() + ((b * Ho + i) * Wo + j) * C;
                    T * p00 = dx + ((b * H + 2 * i) * W + 2 * j) * C;
                    T * p01 = p00 + C;
                    T * p10 = p00 + W * C;
                    T * p11 = p10 + C;
                    for (std::size_t c = 0; c < C; ++c) {
                        const T q = T(0.25) * g[c];
                        p00[c] += q;
                        p01[c] += q;
                        p10[c] += q;
                        p11[c] += q;
                    }
                }
            }
        }
    });
}

template <typename T>
Var<T> reshape(Var<T> x, Shape shape) {
    Tensor<T> out = x.value().reshaped(std::move(shape));
    Graph<T> & graph = x.graph();
    return graph.emit(std::move(out), {x}, [&graph, x](const Tensor<T> & dy) {
        T * dx = graph.grad(x).data();
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
    });
}

template <typename T>
Var<T> dense(Var<T> x, Var<T> w, Var<T> b) {
    const Shape & xs = x.shape();
    const Shape & ws = w.shape();
    if (xs.empty() || ws.size() != 2 || xs.back() != ws[0]) {
        shape_error("dense", "input " + shape_string(xs) + " incompatible with weights " + shape_string(ws));
    }
    if (b.value().size() != ws[1]) shape_error("dense", "bias width differs from output units");
    const std::size_t Din = ws[0], Dout = ws[1];
    const std::size_t M = x.value().size() / Din;
    Tensor<T> out(with_last(xs, Dout));
    MatMap<T> y(out.data(), M, Dout);
    y.noalias() = ConstMatMap<T>(x.value().data(), M, Din) * ConstMatMap<T>(w.value().data(), Din, Dout);
    y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(b.value().data(), Dout);

    Graph<T> & graph = x.graph();
    return graph.emit(std::move(out), {x, w, b}, [&graph, x, w, b, M, Din, Dout](const Tensor<T> & dy) {
        ConstMatMap<T> g(dy.data(), M, Dout);
        if (graph.needs_grad(w)) {
            MatMap<T> dw(graph.grad(w).data(), Din, Dout);
            dw.noalias() += ConstMatMap<T>(x.value().data(), M, Din).transpose() * g;
        }
        if (graph.needs_grad(b)) {
            Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> db(graph.grad(b).data(), Dout);
            db += g.colwise().sum();
        }
        if (graph.needs_grad(x)) {
            MatMap<T> dx(graph.grad(x).data(), M, Din);
            dx.noalias() += g * ConstMatMap<T>(w.value().data(), Din, Dout).transpose();
        }
    });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
    if (a.shape() != b.shape()) shape_error("add", shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
    Graph<T> & graph = a.graph();
    return graph.emit(std::move(out), {a, b}, [&graph, a, b](const Tensor<T> & dy) {
        if (graph.needs_grad(a)) accumulate(graph.grad(a), dy);
        if (graph.needs_grad(b)) accumulate(graph.grad(b), dy);
    });
}

template <typename T>
Var<T> add_over_time(Var<T> x, Var<T> y) {
    const Shape & xs = x.shape();
    const Shape & ys = y.shape();
    if (xs.size() != 3 || ys.size() != 2 || xs[0] != ys[0] || xs[2] != ys[1]) {
        shape_error("add_over_time", shape_string(xs) + " vs " + shape_string(ys));
    }
    const std::size_t B = xs[0], N = xs[1], D = xs[2];
    Tensor<T> out(xs);
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t t = 0; t < N; ++t) {
            for (std::size_t d = 0; d < D; ++d) {
                out[(b * N + t) * D + d] = x.value()[(b * N + t) * D + d] + y.value()[b * D + d];
            }
        }
    }
    Graph<T> & graph = x.graph();
    return graph.emit(std::move(out), {x, y}, [&graph, x, y, B, N, D](const Tensor<T> & dy) {
        if (graph.needs_grad(x)) accumulate(graph.grad(x), dy);
        if (graph.needs_grad(y)) {
            T * d = graph.grad(y).data();
            for (std::size_t b = 0; b < B; ++b) {
                for (std::size_t t = 0; t < N; ++t) {
                    for (std::size_t k = 0; k < D; ++k) d[b * D + k] += dy[(b * N + t) * D + k];
                }
            }
        }
    });
}

template <typename T>
Var<T> scale_rows(Var<T> x, std::span<const T> s) {
    const Shape & xs = x.shape();
    if (xs.empty() || xs[0] != s.size()) shape_error("scale_rows", "row scale count differs from leading dimension");
    const std::size_t per = x.value().size() / s.size();
    std::vector<T> factors(s.begin(), s.end());
    Tensor<T> out(xs);
    for (std::size_t b = 0; b < factors.size(); ++b) {
        for (std::size_t i = 0; i < per; ++i) out[b * per + i] = factors[b] * x.value()[b * per + i];
    }
    Graph<T> & graph = x.graph();
    return graph.emit(std::move(out), {x}, [&graph, x, factors = std::move(factors), per](const Tensor<T> & dy) {
        T * dx = graph.grad(x).data();
        for (std::size_t b = 0; b < factors.size(); ++b) {
            for (std::size_t i = 0; i < per; ++i) dx[b * per + i] += factors[b] * dy[b * per + i];
        }
    });
}

template <typename T>
Var<T> scale(Var<T> x, T factor) {
    Tensor<T> out(x.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = factor * x.value()[i];
    Graph<T> & graph = x.graph();
    return graph.emit(std::move(out), {x}, [&graph, x, factor](const Tensor<T> & dy) {
        T * dx = graph.grad(x).data();
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += factor * dy[i];
    });
}

template <typename T>
Var<T> concat_last(Var<T> a, Var<T> b) {
    const Shape & as = a.shape();
    const Shape & bs = b.shape();
    if (as.size() != bs.size() || as.empty() || !std::equal(as.begin(), as.end() - 1, bs.begin())) {
        shape_error("concat_last", shape_string(as) + " vs " + shape_string(bs));
    }
    const std::size_t Da = as.back(), Db = bs.back(), Do = Da + Db;
    const std::size_t rows = a.value().size() / Da;
    Tensor<T> out(with_last(as, Do));
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(a.value().data() + r * Da, Da, out.data() + r * Do);
        std::copy_n(b.value().data() + r * Db, Db, out.data() + r * Do + Da);
    }
    Graph<T> & graph = a.graph();
    return graph.emit(std::move(out), {a, b}, [&graph, a, b, rows, Da, Db, Do](const Tensor<T> & dy) {
        if (graph.needs_grad(a)) {
            T * d = graph.grad(a).data();
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t i = 0; i < Da; ++i) d[r * Da + i] += dy[r * Do + i];
            }
        }
        if (graph.needs_grad(b)) {
            T * d = graph.grad(b).data();
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t i = 0; i < Db; ++i) d[r * Db + i] += dy[r * Do + Da + i];
            }
        }
    });
}

template <typename T>
Var<T> stack_last(const std::vector<Var<T>> & parts) {
    if (parts.empty()) shape_error("stack_last", "nothing to stack");
    const Shape & s0 = parts.front().shape();
    for (const auto & p : parts) {
        if (p.shape() != s0) shape_error("stack_last", "parts differ in shape");
    }
    const std::size_t S = parts.size();
    const std::size_t n = parts.front().value().size();
    Shape os = s0;
    os.push_back(S);
    Tensor<T> out(os);
    for (std::size_t s = 0; s < S; ++s) {
        const T * src = parts[s].value().data();
        for (std::size_t i = 0; i < n; ++i) out[i * S + s] = src[i];
    }
    Graph<T> & graph = parts.front().graph();
    return graph.emit(std::move(out), std::span<const Var<T>>(parts), [&graph, parts, S, n](const Tensor<T> & dy) {
        for (std::size_t s = 0; s < S; ++s) {
            if (!graph.needs_grad(parts[s])) continue;
            T * d = graph.grad(parts[s]).data();
            for (std::size_t i = 0; i < n; ++i) d[i] += dy[i * S + s];
        }
    });
}

template <typename T>
Var<T> stack_conv(Var<T> x, Var<T> w, Var<T> b) {
    const Shape & xs = x.shape();
    const Shape & ws = w.shape();
    if (xs.size() < 2 || ws.size() != 2 || xs[xs.size() - 2] != ws[0] || xs.back() != ws[1]) {
        shape_error("stack_conv", "input " + shape_string(xs) + " incompatible with kernel " + shape_string(ws));
    }
    if (b.value().size() != ws[0]) shape_error("stack_conv", "bias width differs from feature count");
    const std::size_t D = ws[0], S = ws[1];
    const std::size_t rows = x.value().size() / (D * S);
    Shape os(xs.begin(), xs.end() - 1);
    Tensor<T> out(os);
    const T * xv = x.value().data();
    const T * wv = w.value().data();
    const T * bv = b.value().data();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t d = 0; d < D; ++d) {
            T acc = bv[d];
            for (std::size_t s = 0; s < S; ++s) acc += xv[(r * D + d) * S + s] * wv[d * S + s];
            out[r * D + d] = acc;
        }
    }
    Graph<T> & graph = x.graph();
    return graph.emit(std::move(out), {x, w, b}, [&graph, x, w, b, rows, D, S](const Tensor<T> & dy) {
        const T * xv = x.value().data();
        const T * wv = w.value().data();
        T * dx = graph.needs_grad(x) ? graph.grad(x).data() : nullptr;
        T * dw = graph.needs_grad(w) ? graph.grad(w).data() : nullptr;
        T * db = graph.needs_grad(b) ? graph.grad(b).data() : nullptr;
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t d = 0; d < D; ++d) {
                const T g = dy[r * D + d];
                if (db) db[d] += g;
                for (std::size_t s = 0; s < S; ++s) {
                    if (dw) dw[d * S + s] += g * xv[(r * D + d) * S + s];
                    if (dx) dx[(r * D + d) * S + s] += g * wv[d * S + s];
                }
            }
        }
    });
}

template <typename T>
Var<T> mean_time(Var<T> x) {
    const Shape & xs = x.shape();
    if (xs.size() != 3 || xs[1] == 0) shape_error("mean_time", "input must be [B,N,D] with N > 0");
    const std::size_t B = xs[0], N = xs[1], D = xs[2];
    Tensor<T> out({B, D});
    const T inv = T(1) / static_cast<T>(N);
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t t = 0; t < N; ++t) {
            for (std::size_t d = 0; d < D; ++d) out[b * D + d] += x.value()[(b * N + t) * D + d];
        }
        for (std::size_t d = 0; d < D; ++d) out[b * D + d] *= inv;
    }
    Graph<T> & graph = x.graph();
    return graph.emit(std::move(out), {x}, [&graph, x, B, N, D, inv](const Tensor<T> & dy) {
        T * dx = graph.grad(x).data();
        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t t = 0; t < N; ++t) {
                for (std::size_t d = 0; d < D; ++d) dx[(b * N + t) * D + d] += inv * dy[b * D + d];
            }
        }
    });
}

template <typename T>
Var<T> attention_scores(Var<T> q, Var<T> k, std::size_t heads, T factor) {
    const Shape & qs = q.shape();
    const Shape & ks = k.shape();
    if (qs.size() != 2 || ks.size() != 3 || qs[0] != ks[0] || qs[1] != ks[2]) {
        shape_error("attention_scores", "query " + shape_string(qs) + " incompatible with keys " + shape_string(ks));
    }
    if (heads == 0 || qs[1] % heads != 0) shape_error("attention_scores", "embedding width not divisible by head count");
    const std::size_t B = ks[0], N = ks[1], D = ks[2], H = heads, dh = D / H;
    Tensor<T> out({B, H, N});
    const T * qv = q.value().data();
    const T * kv = k.value().data();
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t h = 0; h < H; ++h) {
            for (std::size_t t = 0; t < N; ++t) {
                T acc = 0;
                for (std::size_t i = 0; i < dh; ++i) acc += qv[b * D + h * dh + i] * kv[(b * N + t) * D + h * dh + i];
                out[(b * H + h) * N + t] = factor * acc;
            }
        }
    }
    Graph<T> & graph = q.graph();
    return graph.emit(std::move(out), {q, k}, [&graph, q, k, B, N, D, H, dh, factor](const Tensor<T> & dy) {
        const T * qv = q.value().data();
        const T * kv = k.value().data();
        T * dq = graph.needs_grad(q) ? graph.grad(q).data() : nullptr;
        T * dk = graph.needs_grad(k) ? graph.grad(k).data() : nullptr;
        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t h = 0; h < H; ++h) {
                for (std::size_t t = 0; t < N; ++t) {
                    const T g = factor * dy[(b * H + h) * N + t];
                    for (std::size_t i = 0; i < dh; ++i) {
                        const std::size_t qi = b * D + h * dh + i;
                        const std::size_t ki = (b * N + t) * D + h * dh + i;
                        if (dq) dq[qi] += g * kv[ki];
                        if (dk) dk[ki] += g * qv[qi];
                    }
                }
            }
        }
    });
}

template <typename T>
Var<T> softmax_last(Var<T> x) {
    const Shape & xs = x.shape();
    if (xs.empty() || xs.back() == 0) shape_error("softmax_last", "empty last axis");
    const std::size_t N = xs.back();
    const std::size_t rows = x.value().size() / N;
    Tensor<T> out(xs);
    for (std::size_t r = 0; r < rows; ++r) {
        const T * in = x.value().data() + r * N;
        T * y = out.data() + r * N;
        const T mx = *std::max_element(in, in + N);
        T total = 0;
        for (std::size_t i = 0; i < N; ++i) {
            y[i] = std::exp(in[i] - mx);
            total += y[i];
        }
        for (std::size_t i = 0; i < N; ++i) y[i] /= total;
    }
    Graph<T> & graph = x.graph();
    const std::size_t out_id = graph.node_count();
    return graph.emit(std::move(out), {x}, [&graph, x, out_id, rows, N](const Tensor<T> & dy) {
        const T * yv = graph.value(Var<T>(&graph, out_id)).data();
        T * dx = graph.grad(x).data();
        for (std::size_t r = 0; r < rows; ++r) {
            T dot = 0;
            for (std::size_t i = 0; i < N; ++i) dot += dy[r * N + i] * yv[r * N + i];
            for (std::size_t i = 0; i < N; ++i) dx[r * N + i] += yv[r * N + i] * (dy[r * N + i] - dot);
        }
    });
}

template <typename T>
Var<T> attention_combine(Var<T> alpha, Var<T> v) {
    const Shape & as = alpha.shape();
    const Shape & vs = v.shape();
    if (as.size() != 3 || vs.size() != 3 || as[0] != vs[0] || as[2] != vs[1] || as[1] == 0 || vs[2] % as[1] != 0) {
        shape_error("attention_combine", "weights " + shape_string(as) + " incompatible with values " + shape_string(vs));
    }
    const std::size_t B = vs[0], N = vs[1], D = vs[2], H = as[1], dh = D / H;
    Tensor<T> out({B, D});
    const T * av = alpha.value().data();
    const T * vv = v.value().data();
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t t = 0; t < N; ++t) {
            for (std::size_t d = 0; d < D; ++d) out[b * D + d] += av[(b * H + d / dh) * N + t] * vv[(b * N + t) * D + d];
        }
    }
    Graph<T> & graph = alpha.graph();
    return graph.emit(std::move(out), {alpha, v}, [&graph, alpha, v, B, N, D, H, dh](const Tensor<T> & dy) {
        const T * av = alpha.value().data();
        const T * vv = v.value().data();
        T * da = graph.needs_grad(alpha) ? graph.grad(alpha).data() : nullptr;
        T * dv = graph.needs_grad(v) ? graph.grad(v).data() : nullptr;
        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t t = 0; t < N; ++t) {
                for (std::size_t d = 0; d < D; ++d) {
                    const std::size_t ai = (b * H + d / dh) * N + t;
                    const std::size_t vi = (b * N + t) * D + d;
                    if (da) da[ai] += dy[b * D + d] * vv[vi];
                    if (dv) dv[vi] += dy[b * D + d] * av[ai];
                }
            }
        }
    });
}

template <typename T>
Var<T> select_column(Var<T> x, std::size_t j) {
    const Shape & xs = x.shape();
    if (xs.size() != 2 || j >= xs[1]) shape_error("select_column", "column out of range for " + shape_string(xs));
    const std::size_t B = xs[0], K = xs[1];
    Tensor<T> out({B});
    for (std::size_t b = 0; b < B; ++b) out[b] = x.value()[b * K + j];
    Graph<T> & graph = x.graph();
    return graph.emit(std::move(out), {x}, [&graph, x, B, K, j](const Tensor<T> & dy) {
        T * dx = graph.grad(x).data();
        for (std::size_t b = 0; b < B; ++b) dx[b * K + j] += dy[b];
    });
}

template <typename T>
Var<T> clamp(Var<T> x, T lo, T hi) {
    Tensor<T> out(x.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(x.value()[i], lo, hi);
    Graph<T> & graph = x.graph();
    return graph.emit(std::move(out), {x}, [&graph, x, lo, hi](const Tensor<T> & dy) {
        const T * xv = x.value().data();
        T * dx = graph.grad(x).data();
        for (std::size_t i = 0; i < dy.size(); ++i) {
            if (xv[i] > lo && xv[i] < hi) dx[i] += dy[i];
        }
    });
}

template <typename T>
Var<T> sum(Var<T> x) {
    T total = 0;
    for (T v : x.value().values()) total += v;
    Graph<T> & graph = x.graph();
    return graph.emit(Tensor<T>({1}, total), {x}, [&graph, x](const Tensor<T> & dy) {
        T * dx = graph.grad(x).data();
        for (std::size_t i = 0; i < x.value().size(); ++i) dx[i] += dy[0];
    });
}

template <typename T>
Var<T> gaussian_nll(Var<T> mu, Var<T> log_sigma, std::span<const T> labels) {
    const std::size_t B = labels.size();
    if (B == 0) throw UsageError("gaussian_nll: empty batch");
    if (mu.value().size() != B || log_sigma.value().size() != B) {
        shape_error("gaussian_nll", "prediction count differs from label count");
    }
    std::vector<T> y(labels.begin(), labels.end());
    T total = 0;
    for (std::size_t b = 0; b < B; ++b) {
        const T r = (y[b] - mu.value()[b]) * std::exp(-log_sigma.value()[b]);
        total += T(0.5) * r * r + log_sigma.value()[b];
    }
    Graph<T> & graph = mu.graph();
    return graph.emit(Tensor<T>({1}, total / static_cast<T>(B)), {mu, log_sigma},
                      [&graph, mu, log_sigma, y = std::move(y), B](const Tensor<T> & dy) {
                          const T scale = dy[0] / static_cast<T>(B);
                          T * dmu = graph.needs_grad(mu) ? graph.grad(mu).data() : nullptr;
                          T * dls = graph.needs_grad(log_sigma) ? graph.grad(log_sigma).data() : nullptr;
                          for (std::size_t b = 0; b < B; ++b) {
                              const T inv_var = std::exp(T(-2) * log_sigma.value()[b]);
                              const T resid = y[b] - mu.value()[b];
                              if (dmu) dmu[b] += -scale * resid * inv_var;
                              if (dls) dls[b] += scale * (T(1) - resid * resid * inv_var);
                          }
                      });
}

#define PPAP_INSTANTIATE_OPS(T)                                                                                    \
    template Var<T> conv2d<T>(Var<T>, Var<T>, Var<T>, Padding);                                                   \
    template Var<T> batch_norm<T>(Var<T>, Var<T>, Var<T>, const Tensor<T> &, const Tensor<T> &, bool, double, double, \
                                   Tensor<T> *, Tensor<T> *);                                                      \
    template Var<T> dropout<T>(Var<T>, double, bool, std::mt19937_64 &);                                          \
    template Var<T> swish<T>(Var<T>);                                                                             \
    template Var<T> tanh<T>(Var<T>);                                                                              \
    template Var<T> avg_pool2d<T>(Var<T>);                                                                        \
    template Var<T> reshape<T>(Var<T>, Shape);                                                                    \
    template Var<T> dense<T>(Var<T>, Var<T>, Var<T>);                                                             \
    template Var<T> add<T>(Var<T>, Var<T>);                                                                       \
    template Var<T> add_over_time<T>(Var<T>, Var<T>);                                                             \
    template Var<T> scale_rows<T>(Var<T>, std::span<const T>);                                                    \
    template Var<T> scale<T>(Var<T>, T);                                                                          \
    template Var<T> concat_last<T>(Var<T>, Var<T>);                                                               \
    template Var<T> stack_last<T>(const std::vector<Var<T>> &);                                                   \
    template Var<T> stack_conv<T>(Var<T>, Var<T>, Var<T>);                                                        \
    template Var<T> mean_time<T>(Var<T>);                                                                         \
    template Var<T> attention_scores<T>(Var<T>, Var<T>, std::size_t, T);                                          \
    template Var<T> softmax_last<T>(Var<T>);                                                                      \
    template Var<T> attention_combine<T>(Var<T>, Var<T>);                                                         \
    template Var<T> select_column<T>(Var<T>, std::size_t);                                                        \
    template Var<T> clamp<T>(Var<T>, T, T);                                                                       \
    template Var<T> sum<T>(Var<T>);                                                                               \
    template Var<T> gaussian_nll<T>(Var<T>, Var<T>, std::span<const T>);

PPAP_INSTANTIATE_OPS(float)
PPAP_INSTANTIATE_OPS(double)

#undef PPAP_INSTANTIATE_OPS

} // namespace ppap::nn
