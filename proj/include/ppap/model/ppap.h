#pragma once

#include "ppap/dsp/spectrogram.h"
#include "ppap/model/network.h"

#include <cmath>
#include <random>
#include <span>
#include <vector>

namespace ppap::model {

enum class EmbeddingRole { key, query, value };

// N x D feature sequence for one item.
struct Embedding {
    EmbeddingRole role = EmbeddingRole::key;
    nn::Tensor<float> values;  // [N, D]

    std::size_t frames() const { return values.dim(0); }
    std::size_t dim() const { return values.dim(1); }
};

// Gaussian response model over pleasantness.
struct PredictedDistribution {
    double mu = 0.0;
    double log_sigma = 0.0;

    double sigma() const { return std::exp(log_sigma); }
};

struct GainSpec {
    double gain = 1.0;  // linear digital multiplier
    bool silent = false;

    double gamma() const { return std::log10(gain); }
    static GainSpec from_gamma(double gamma) { return {std::pow(10.0, gamma), false}; }
};

// Mean and population std of log10 gains over non-silent training records.
struct GammaStats {
    double mean = 0.0;
    double stddev = 1.0;
};

// Throws DataError with fewer than two values or zero spread.
GammaStats gamma_stats_from_log_gains(std::span<const double> log_gains);

// One draw of gamma ~ N(mean, stddev^2) for a silent-masker training sample.
double sample_silent_gamma(const GammaStats & stats, std::mt19937_64 & rng);

// mean over the batch of 0.5 ((y - mu) / sigma)^2 + log sigma.
double nll_loss(std::span<const PredictedDistribution> predictions, std::span<const double> labels);

// Copies spectrograms into a [B, T, F, C] batch tensor.
template <typename T>
nn::Tensor<T> batch_tensor(std::span<const dsp::Spectrogram * const> items);

template <typename T>
nn::Tensor<T> batch_tensor(const dsp::Spectrogram & item) {
    const dsp::Spectrogram * p = &item;
    return batch_tensor<T>(std::span<const dsp::Spectrogram * const>(&p, 1));
}

// Single-item conveniences over Network<float>. `params` must be mutable only
// in train mode.
Embedding extract_soundscape_features(const Network<float> & net, const dsp::Spectrogram & spec,
                                      nn::ParameterSet<float> & params, Mode mode = Mode::eval,
                                      std::mt19937_64 * rng = nullptr);
Embedding extract_masker_features(const Network<float> & net, const dsp::Spectrogram & spec,
                                  nn::ParameterSet<float> & params, Mode mode = Mode::eval,
                                  std::mt19937_64 * rng = nullptr);

// f_o . f_a . f_g for one (k, q) pair over a list of gammas, eval mode.
std::vector<PredictedDistribution> predict_from_embeddings(const Network<float> & net,
                                                           const nn::ParameterSet<float> & params, const Embedding & keys,
                                                           const Embedding & queries, std::span<const double> gammas);

// Full eval-mode forward for one (soundscape, masker, gamma).
PredictedDistribution predict(const Network<float> & net, const nn::ParameterSet<float> & params,
                              const dsp::Spectrogram & soundscape, const dsp::Spectrogram & masker, double gamma);

} // namespace ppap::model
