#include "ppap/infer/predictor.h"

#include "ppap/common/file_io.h"

#include <chrono>

namespace ppap::infer {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

} // namespace

Predictor::Predictor(model::ModelConfig config, nn::ParameterSet<float> params, std::string weight_hash,
                     std::optional<model::GammaStats> gamma_stats)
    : net_(std::move(config)), params_(std::move(params)), weight_hash_(std::move(weight_hash)),
      gamma_stats_(gamma_stats) {}

Predictor Predictor::from_weights(model::WeightFile wf) {
    return Predictor(std::move(wf.config), std::move(wf.params), std::move(wf.hash), wf.gamma_stats);
}

Predictor Predictor::from_file(const std::filesystem::path & weights) {
    return from_weights(model::load_weights(weights));
}

model::Embedding Predictor::soundscape_features(const dsp::Spectrogram & soundscape) {
    const auto t0 = Clock::now();
    model::Embedding e = model::extract_soundscape_features(net_, soundscape, params_);
    times_.soundscape += seconds_since(t0);
    ++counts_.soundscape;
    return e;
}

model::Embedding Predictor::masker_features(const dsp::Spectrogram & masker) {
    const auto t0 = Clock::now();
    model::Embedding e = model::extract_masker_features(net_, masker, params_);
    times_.masker += seconds_since(t0);
    ++counts_.masker;
    return e;
}

std::vector<model::PredictedDistribution> Predictor::gain_stage(const model::Embedding & keys,
                                                                const model::Embedding & queries,
                                                                std::span<const double> gammas) {
    const auto t0 = Clock::now();
    auto out = model::predict_from_embeddings(net_, params_, keys, queries, gammas);
    times_.head += seconds_since(t0);
    counts_.head += gammas.size();
    return out;
}

void Predictor::reset_counters() {
    counts_ = {};
    times_ = {};
}

std::string spectrogram_hash(const dsp::Spectrogram & s) {
    const std::string dims = std::to_string(s.frames) + "x" + std::to_string(s.mel_bins) + "x" + std::to_string(s.channels);
    const auto * p = reinterpret_cast<const std::uint8_t *>(s.values.data());
    return hex64(fnv1a64(std::span<const std::uint8_t>(p, s.values.size() * sizeof(double)), fnv1a64(dims)));
}

} // namespace ppap::infer
