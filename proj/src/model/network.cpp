#include "ppap/model/network.h"

#include "ppap/common/error.h"
#include "ppap/nn/ops.h"

#include <cmath>

namespace ppap::model {

using nn::Shape;
using nn::Tensor;
using nn::Var;

std::string branch_prefix(Branch branch) { return branch == Branch::soundscape ? "fs" : "fm"; }

namespace {

template <typename T>
Tensor<T> uniform_tensor(Shape shape, std::size_t fan_in, std::mt19937_64 & rng) {
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor<T> t(std::move(shape));
    for (auto & v : t.values()) v = static_cast<T>(dist(rng));
    return t;
}

template <typename T>
void add_dense(nn::ParameterSet<T> & ps, const std::string & prefix, std::size_t din, std::size_t dout,
               std::mt19937_64 & rng) {
    ps.add(prefix + ".weight", uniform_tensor<T>({din, dout}, din, rng));
    ps.add(prefix + ".bias", uniform_tensor<T>({dout}, din, rng));
}

} // namespace

template <typename T>
Network<T>::Network(ModelConfig config) : config_(std::move(config)) {
    config_.validate();
}

template <typename T>
nn::ParameterSet<T> Network<T>::init_parameters(std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    nn::ParameterSet<T> ps;
    ps.seed = seed;
    const std::size_t D = config_.embed_dim;

    for (Branch branch : {Branch::soundscape, Branch::masker}) {
        std::size_t cin = branch == Branch::soundscape ? config_.soundscape_channels : 1;
        for (std::size_t i = 0; i < config_.conv_channels.size(); ++i) {
            const std::size_t cout = config_.conv_channels[i];
            const std::string p = branch_prefix(branch) + ".block" + std::to_string(i + 1);
            const std::size_t fan_in = 9 * cin;
            ps.add(p + ".conv.kernel", uniform_tensor<T>({3, 3, cin, cout}, fan_in, rng));
            ps.add(p + ".conv.bias", uniform_tensor<T>({cout}, fan_in, rng));
            ps.add(p + ".bn.scale", Tensor<T>({cout}, T(1)));
            ps.add(p + ".bn.shift", Tensor<T>({cout}, T(0)));
            ps.add(p + ".bn.running_mean", Tensor<T>({cout}, T(0)), false);
            ps.add(p + ".bn.running_var", Tensor<T>({cout}, T(1)), false);
            cin = cout;
        }
    }

    switch (config_.augmentation) {
    case Augmentation::cat:
        add_dense(ps, "aug.dense1", 2 * D + 1, D, rng);
        add_dense(ps, "aug.dense2", D, D, rng);
        break;
    case Augmentation::add:
        add_dense(ps, "aug.dense1", D, D, rng);
        add_dense(ps, "aug.dense2", D, D, rng);
        break;
    case Augmentation::conv:
        ps.add("aug.conv.kernel", uniform_tensor<T>({D, 3}, 3, rng));
        ps.add("aug.conv.bias", uniform_tensor<T>({D}, 3, rng));
        add_dense(ps, "aug.dense", D, D, rng);
        break;
    }

    switch (config_.fusion) {
    case Fusion::additive:
        add_dense(ps, "att.query", D, D, rng);
        add_dense(ps, "att.key", D, D, rng);
        add_dense(ps, "att.score", D, 1, rng);
        break;
    case Fusion::multi_head:
        add_dense(ps, "att.q_proj", D, D, rng);
        add_dense(ps, "att.k_proj", D, D, rng);
        add_dense(ps, "att.v_proj", D, D, rng);
        add_dense(ps, "att.out_proj", D, D, rng);
        break;
    case Fusion::dot_product:
    case Fusion::pass_through:
        break;
    }

    add_dense(ps, "head", D, 2, rng);
    return ps;
}

template <typename T>
Var<T> Network<T>::param(const ForwardContext<T> & ctx, const std::string & name) const {
    Tensor<T> * sink = nullptr;
    if (ctx.trainable && ctx.graph.recording() && ctx.params.trainable(name)) sink = &ctx.trainable->grad(name);
    return ctx.graph.parameter(ctx.params.value(name), sink);
}

template <typename T>
Var<T> Network<T>::dense_layer(const ForwardContext<T> & ctx, const std::string & prefix, Var<T> x) const {
    return nn::dense(x, param(ctx, prefix + ".weight"), param(ctx, prefix + ".bias"));
}

template <typename T>
Var<T> Network<T>::extract(const ForwardContext<T> & ctx, Branch branch, Var<T> x) const {
    const Shape & xs = x.shape();
    const std::size_t channels = branch == Branch::soundscape ? config_.soundscape_channels : 1;
    if (xs.size() != 4 || xs[1] != config_.time_frames || xs[2] != config_.mel_bins() || xs[3] != channels) {
        throw DataError(std::string(branch == Branch::soundscape ? "soundscape" : "masker") + " spectrogram batch " +
                        nn::shape_string(xs) + " does not match config [B," + std::to_string(config_.time_frames) +
                        "," + std::to_string(config_.mel_bins()) + "," + std::to_string(channels) + "]");
    }
    const bool training = ctx.mode == Mode::train;
    if (training && !ctx.trainable) throw UsageError("train-mode forward needs mutable parameters");
    if (training && config_.dropout > 0.0 && !ctx.rng) throw UsageError("train-mode forward needs an rng");

    for (std::size_t i = 0; i < config_.conv_channels.size(); ++i) {
        const std::string p = branch_prefix(branch) + ".block" + std::to_string(i + 1);
        x = nn::conv2d(x, param(ctx, p + ".conv.kernel"), param(ctx, p + ".conv.bias"), nn::Padding::same);
        Tensor<T> * new_mean = training ? &ctx.trainable->value(p + ".bn.running_mean") : nullptr;
        Tensor<T> * new_var = training ? &ctx.trainable->value(p + ".bn.running_var") : nullptr;
        x = nn::batch_norm(x, param(ctx, p + ".bn.scale"), param(ctx, p + ".bn.shift"),
                           ctx.params.value(p + ".bn.running_mean"), ctx.params.value(p + ".bn.running_var"), training,
                           config_.bn_momentum, 1e-5, new_mean, new_var);
        if (training && config_.dropout > 0.0) x = nn::dropout(x, config_.dropout, true, *ctx.rng);
        x = nn::swish(x);
        x = nn::avg_pool2d(x);
    }
    // [B, N, F', C'] -> [B, N, F' * C']
    const Shape & s = x.shape();
    return nn::reshape(x, Shape{s[0], s[1], s[2] * s[3]});
}

template <typename T>
Var<T> Network<T>::augment(const ForwardContext<T> & ctx, Var<T> k, Var<T> q, std::span<const T> gammas) const {
    const Shape & ks = k.shape();
    if (ks != q.shape() || ks.size() != 3 || ks[2] != config_.embed_dim) {
        throw DataError("augment: keys " + nn::shape_string(ks) + " and queries " + nn::shape_string(q.shape()) +
                        " must both be [B,N,D]");
    }
    const std::size_t B = ks[0], N = ks[1], D = ks[2];
    if (gammas.size() != B) throw DataError("augment: one gamma per batch row required");
    for (T g : gammas) {
        if (!std::isfinite(g)) throw DataError("augment: gamma must be finite");
    }

    switch (config_.augmentation) {
    case Augmentation::cat: {
        Tensor<T> column({B, N, 1});
        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t t = 0; t < N; ++t) column[b * N + t] = gammas[b];
        }
        Var<T> x = nn::concat_last(nn::concat_last(k, q), ctx.graph.constant(std::move(column)));
        x = nn::swish(dense_layer(ctx, "aug.dense1", x));
        return dense_layer(ctx, "aug.dense2", x);
    }
    case Augmentation::add: {
        Var<T> x = nn::add(k, nn::scale_rows(q, gammas));
        x = nn::swish(dense_layer(ctx, "aug.dense1", x));
        return dense_layer(ctx, "aug.dense2", x);
    }
    case Augmentation::conv: {
        Tensor<T> plane({B, N, D});
        for (std::size_t b = 0; b < B; ++b) {
            std::fill_n(plane.data() + b * N * D, N * D, gammas[b]);
        }
        Var<T> stacked = nn::stack_last<T>({k, q, ctx.graph.constant(std::move(plane))});
        Var<T> x = nn::stack_conv(stacked, param(ctx, "aug.conv.kernel"), param(ctx, "aug.conv.bias"));
        return dense_layer(ctx, "aug.dense", nn::swish(x));
    }
    }
    throw UsageError("augment: unknown variant");
}

template <typename T>
FusionOutput<T> Network<T>::fuse(const ForwardContext<T> & ctx, Var<T> q, Var<T> k, Var<T> v) const {
    const Shape & qs = q.shape();
    if (qs.size() != 3 || k.shape() != qs || v.shape() != qs) {
        throw DataError("fuse: q, k and v must share one [B,N,D] shape");
    }
    const std::size_t B = qs[0], D = qs[2];
    switch (config_.fusion) {
    case Fusion::dot_product: {
        Var<T> qbar = nn::mean_time(q);
        Var<T> alpha = nn::softmax_last(nn::attention_scores(qbar, k, 1, static_cast<T>(1.0 / std::sqrt(double(D)))));
        return {nn::attention_combine(alpha, v), alpha};
    }
    case Fusion::additive: {
        Var<T> qbar = dense_layer(ctx, "att.query", nn::mean_time(q));
        Var<T> keys = dense_layer(ctx, "att.key", k);
        Var<T> e = dense_layer(ctx, "att.score", nn::tanh(nn::add_over_time(keys, qbar)));
        Var<T> alpha = nn::softmax_last(nn::reshape(e, Shape{B, 1, qs[1]}));
        return {nn::attention_combine(alpha, v), alpha};
    }
    case Fusion::multi_head: {
        const std::size_t H = config_.attention_heads;
        if (H == 0 || D % H != 0) throw UsageError("fuse: embedding width not divisible by head count");
        Var<T> Q = dense_layer(ctx, "att.q_proj", nn::mean_time(q));
        Var<T> K = dense_layer(ctx, "att.k_proj", k);
        Var<T> V = dense_layer(ctx, "att.v_proj", v);
        const T factor = static_cast<T>(1.0 / std::sqrt(double(D / H)));
        Var<T> alpha = nn::softmax_last(nn::attention_scores(Q, K, H, factor));
        return {dense_layer(ctx, "att.out_proj", nn::attention_combine(alpha, V)), alpha};
    }
    case Fusion::pass_through:
        return {nn::mean_time(v), Var<T>{}};
    }
    throw UsageError("fuse: unknown variant");
}

template <typename T>
HeadOutput<T> Network<T>::head(const ForwardContext<T> & ctx, Var<T> z) const {
    Var<T> out = dense_layer(ctx, "head", z);
    Var<T> mu = nn::select_column(out, 0);
    Var<T> log_sigma = nn::clamp(nn::select_column(out, 1), static_cast<T>(config_.log_sigma_min),
                                 static_cast<T>(config_.log_sigma_max));
    return {mu, log_sigma};
}

template <typename T>
HeadOutput<T> Network<T>::gain_stage(const ForwardContext<T> & ctx, Var<T> keys, Var<T> queries,
                                     std::span<const T> gammas) const {
    Var<T> values = augment(ctx, keys, queries, gammas);
    return head(ctx, fuse(ctx, queries, keys, values).z);
}

template <typename T>
HeadOutput<T> Network<T>::forward(const ForwardContext<T> & ctx, Var<T> soundscapes, Var<T> maskers,
                                  std::span<const T> gammas) const {
    Var<T> k = extract(ctx, Branch::soundscape, soundscapes);
    Var<T> q = extract(ctx, Branch::masker, maskers);
    return gain_stage(ctx, k, q, gammas);
}

template class Network<float>;
template class Network<double>;

} // namespace ppap::model
