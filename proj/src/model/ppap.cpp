#include "ppap/model/ppap.h"

#include "ppap/common/error.h"

#include <algorithm>

namespace ppap::model {

GammaStats gamma_stats_from_log_gains(std::span<const double> log_gains) {
    if (log_gains.size() < 2) throw DataError("gamma statistics need at least two non-silent training records");
    double mean = 0.0;
    for (double g : log_gains) mean += g;
    mean /= static_cast<double>(log_gains.size());
    double var = 0.0;
    for (double g : log_gains) var += (g - mean) * (g - mean);
    var /= static_cast<double>(log_gains.size());
    const double sd = std::sqrt(var);
    if (!(sd > 0.0)) throw DataError("log-gain standard deviation is zero; cannot randomise silent-masker gains");
    return {mean, sd};
}

double sample_silent_gamma(const GammaStats & stats, std::mt19937_64 & rng) {
    if (!(stats.stddev > 0.0)) throw UsageError("silent gamma sampling needs stddev > 0");
    std::normal_distribution<double> dist(stats.mean, stats.stddev);
    return dist(rng);
}

double nll_loss(std::span<const PredictedDistribution> predictions, std::span<const double> labels) {
    if (predictions.empty()) throw UsageError("nll_loss: empty batch");
    if (predictions.size() != labels.size()) throw UsageError("nll_loss: prediction and label counts differ");
    double total = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double r = (labels[i] - predictions[i].mu) / predictions[i].sigma();
        total += 0.5 * r * r + predictions[i].log_sigma;
    }
    return total / static_cast<double>(predictions.size());
}

template <typename T>
nn::Tensor<T> batch_tensor(std::span<const dsp::Spectrogram * const> items) {
    if (items.empty()) throw UsageError("batch_tensor: empty batch");
    const dsp::Spectrogram & first = *items.front();
    nn::Tensor<T> out({items.size(), first.frames, first.mel_bins, first.channels});
    const std::size_t stride = first.values.size();
    for (std::size_t b = 0; b < items.size(); ++b) {
        const dsp::Spectrogram & s = *items[b];
        if (s.frames != first.frames || s.mel_bins != first.mel_bins || s.channels != first.channels) {
            throw DataError("batch_tensor: spectrogram shapes differ within a batch");
        }
        std::transform(s.values.begin(), s.values.end(), out.data() + b * stride,
                       [](double v) { return static_cast<T>(v); });
    }
    return out;
}

template nn::Tensor<float> batch_tensor<float>(std::span<const dsp::Spectrogram * const>);
template nn::Tensor<double> batch_tensor<double>(std::span<const dsp::Spectrogram * const>);

namespace {

Embedding extract_one(const Network<float> & net, const dsp::Spectrogram & spec, nn::ParameterSet<float> & params,
                      Mode mode, std::mt19937_64 * rng, Branch branch) {
    nn::Graph<float> graph(false);
    ForwardContext<float> ctx{graph, params, mode == Mode::train ? &params : nullptr, mode, rng};
    nn::Var<float> out = net.extract(ctx, branch, graph.constant(batch_tensor<float>(spec)));
    const auto & v = out.value();
    Embedding e;
    e.role = branch == Branch::soundscape ? EmbeddingRole::key : EmbeddingRole::query;
    e.values = v.reshaped({v.dim(1), v.dim(2)});
    return e;
}

nn::Tensor<float> tile(const Embedding & e, std::size_t copies) {
    const std::size_t n = e.values.size();
    nn::Tensor<float> out({copies, e.frames(), e.dim()});
    for (std::size_t b = 0; b < copies; ++b) std::copy_n(e.values.data(), n, out.data() + b * n);
    return out;
}

} // namespace

Embedding extract_soundscape_features(const Network<float> & net, const dsp::Spectrogram & spec,
                                      nn::ParameterSet<float> & params, Mode mode, std::mt19937_64 * rng) {
    return extract_one(net, spec, params, mode, rng, Branch::soundscape);
}

Embedding extract_masker_features(const Network<float> & net, const dsp::Spectrogram & spec,
                                  nn::ParameterSet<float> & params, Mode mode, std::mt19937_64 * rng) {
    return extract_one(net, spec, params, mode, rng, Branch::masker);
}

std::vector<PredictedDistribution> predict_from_embeddings(const Network<float> & net,
                                                           const nn::ParameterSet<float> & params, const Embedding & keys,
                                                           const Embedding & queries, std::span<const double> gammas) {
    if (gammas.empty()) return {};
    nn::Graph<float> graph(false);
    ForwardContext<float> ctx{graph, params, nullptr, Mode::eval, nullptr};
    std::vector<float> g(gammas.begin(), gammas.end());
    HeadOutput<float> out = net.gain_stage(ctx, graph.constant(tile(keys, g.size())),
                                           graph.constant(tile(queries, g.size())), g);
    std::vector<PredictedDistribution> result(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        result[i] = {out.mu.value()[i], out.log_sigma.value()[i]};
    }
    return result;
}

PredictedDistribution predict(const Network<float> & net, const nn::ParameterSet<float> & params,
                              const dsp::Spectrogram & soundscape, const dsp::Spectrogram & masker, double gamma) {
    nn::Graph<float> graph(false);
    ForwardContext<float> ctx{graph, params, nullptr, Mode::eval, nullptr};
    const float g = static_cast<float>(gamma);
    HeadOutput<float> out = net.forward(ctx, graph.constant(batch_tensor<float>(soundscape)),
                                        graph.constant(batch_tensor<float>(masker)), std::span<const float>(&g, 1));
    return {out.mu.value()[0], out.log_sigma.value()[0]};
}

} // namespace ppap::model
