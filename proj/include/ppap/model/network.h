#pragma once

#include "ppap/model/config.h"
#include "ppap/nn/graph.h"
#include "ppap/nn/params.h"

#include <cstdint>
#include <random>
#include <span>
#include <string>

namespace ppap::model {

enum class Mode { train, eval };
enum class Branch { soundscape, masker };

// What a forward pass may read and write. `trainable` is null for frozen
// weights; when set, recorded graphs send gradients into it and train-mode
// batch norm writes its running statistics back to it.
template <typename T>
struct ForwardContext {
    nn::Graph<T> & graph;
    const nn::ParameterSet<T> & params;
    nn::ParameterSet<T> * trainable = nullptr;
    Mode mode = Mode::eval;
    std::mt19937_64 * rng = nullptr;
};

template <typename T>
struct FusionOutput {
    nn::Var<T> z;        // [B, D]
    nn::Var<T> weights;  // [B, H, N] softmax weights; invalid for pass-through
};

template <typename T>
struct HeadOutput {
    nn::Var<T> mu;         // [B]
    nn::Var<T> log_sigma;  // [B], clamped
};

// The PPAP layer stack over batched inputs. Stateless apart from the config;
// all weights come through the ForwardContext.
template <typename T>
class Network {
public:
    explicit Network(ModelConfig config);

    const ModelConfig & config() const { return config_; }

    // Every parameter and batch-norm buffer the config needs, initialised
    // uniformly in +-sqrt(1/fan_in) from `seed`.
    nn::ParameterSet<T> init_parameters(std::uint64_t seed) const;

    // f_s / f_m: [B, T, F, C] -> [B, N, D].
    nn::Var<T> extract(const ForwardContext<T> & ctx, Branch branch, nn::Var<T> spectrograms) const;

    // f_g: keys and queries [B, N, D], one gamma per batch row -> values [B, N, D].
    nn::Var<T> augment(const ForwardContext<T> & ctx, nn::Var<T> keys, nn::Var<T> queries,
                       std::span<const T> gammas) const;

    // f_a: (q, k, v) -> z [B, D].
    FusionOutput<T> fuse(const ForwardContext<T> & ctx, nn::Var<T> queries, nn::Var<T> keys, nn::Var<T> values) const;

    // f_o: z [B, D] -> (mu, clamped log sigma).
    HeadOutput<T> head(const ForwardContext<T> & ctx, nn::Var<T> z) const;

    // f_o . f_a . f_g, the per-(masker, gain) stage.
    HeadOutput<T> gain_stage(const ForwardContext<T> & ctx, nn::Var<T> keys, nn::Var<T> queries,
                             std::span<const T> gammas) const;

    HeadOutput<T> forward(const ForwardContext<T> & ctx, nn::Var<T> soundscapes, nn::Var<T> maskers,
                          std::span<const T> gammas) const;

private:
    nn::Var<T> param(const ForwardContext<T> & ctx, const std::string & name) const;
    nn::Var<T> dense_layer(const ForwardContext<T> & ctx, const std::string & prefix, nn::Var<T> x) const;

    ModelConfig config_;
};

extern template class Network<float>;
extern template class Network<double>;

std::string branch_prefix(Branch branch);

} // namespace ppap::model
