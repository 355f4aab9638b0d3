#pragma once

#include "ppap/dsp/spectrogram.h"
#include "ppap/model/config.h"
#include "ppap/model/network.h"
#include "ppap/model/ppap.h"
#include "ppap/nn/params.h"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace ppap::model {

// One labelled (soundscape, masker, gain) record. Spectrograms are shared by
// index; a missing masker index marks a silent record whose gamma is ignored.
struct TrainSample {
    std::size_t soundscape = 0;
    std::optional<std::size_t> masker;
    double gamma = 0.0;
    double label = 0.0;
    int fold = 0;

    bool silent() const { return !masker.has_value(); }
};

struct TrainingSet {
    std::vector<dsp::Spectrogram> soundscapes;  // T x F x C
    std::vector<dsp::Spectrogram> maskers;      // T x F x 1
    std::vector<TrainSample> samples;
};

struct EpochMetrics {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double train_mse = 0.0;  // on train-mode mu
    double val_nll = 0.0;
    double val_mse = 0.0;
    double val_mae = 0.0;
};

struct TrainOptions {
    ModelConfig model;
    nn::AdamConfig adam;
    std::size_t max_epochs = 100;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    // Records in this fold are held out. -1 trains on everything and keeps
    // the final weights.
    int validation_fold = 0;
    std::function<void(const EpochMetrics &)> on_epoch;
};

struct TrainResult {
    nn::ParameterSet<float> params;  // best-validation weights
    GammaStats gamma_stats;
    std::vector<EpochMetrics> history;
    std::size_t best_epoch = 0;
};

struct EvalMetrics {
    double nll = 0.0;
    double mse = 0.0;
    double mae = 0.0;
    std::vector<PredictedDistribution> predictions;
};

// Throws DataError when the split leaves no training records or too few
// non-silent ones for gamma statistics; NumericalError on a non-finite loss.
TrainResult train(const TrainingSet & data, const TrainOptions & options);

// Eval-mode metrics on `indices`. Silent records are queried at gamma = mean.
EvalMetrics evaluate(const Network<float> & net, const nn::ParameterSet<float> & params, const TrainingSet & data,
                     const std::vector<std::size_t> & indices, const GammaStats & gamma_stats,
                     std::size_t batch_size = 32);

} // namespace ppap::model
