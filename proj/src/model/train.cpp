#include "ppap/model/train.h"

#include "ppap/common/error.h"
#include "ppap/common/log.h"
#include "ppap/nn/ops.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace ppap::model {

namespace {

void check_shapes(const TrainingSet & data, const ModelConfig & cfg) {
    auto mismatch = [&](const dsp::Spectrogram & s, std::size_t channels) {
        return s.frames != cfg.time_frames || s.mel_bins != cfg.mel_bins() || s.channels != channels;
    };
    for (const auto & s : data.soundscapes) {
        if (mismatch(s, cfg.soundscape_channels)) throw DataError("soundscape spectrogram shape does not match the model config");
    }
    for (const auto & m : data.maskers) {
        if (mismatch(m, 1)) throw DataError("masker spectrogram shape does not match the model config");
    }
    for (const auto & r : data.samples) {
        if (r.soundscape >= data.soundscapes.size() || (r.masker && *r.masker >= data.maskers.size())) {
            throw DataError("training record refers to a missing spectrogram");
        }
        if (!std::isfinite(r.label)) throw DataError("training record has a non-finite label");
        if (!r.silent() && !std::isfinite(r.gamma)) throw DataError("non-silent training record has a non-finite gamma");
    }
}

struct Batch {
    std::vector<const dsp::Spectrogram *> soundscapes;
    std::vector<const dsp::Spectrogram *> maskers;
    std::vector<float> gammas;
    std::vector<double> labels;
};

} // namespace

EvalMetrics evaluate(const Network<float> & net, const nn::ParameterSet<float> & params, const TrainingSet & data,
                     const std::vector<std::size_t> & indices, const GammaStats & gamma_stats,
                     std::size_t batch_size) {
    EvalMetrics m;
    if (indices.empty()) return m;
    const ModelConfig & cfg = net.config();
    const dsp::Spectrogram silent = dsp::Spectrogram::silent(cfg.time_frames, cfg.mel_bins(), 1);
    batch_size = std::max<std::size_t>(batch_size, 1);
    std::vector<double> labels;
    for (std::size_t start = 0; start < indices.size(); start += batch_size) {
        const std::size_t end = std::min(indices.size(), start + batch_size);
        Batch b;
        for (std::size_t i = start; i < end; ++i) {
            const TrainSample & r = data.samples[indices[i]];
            b.soundscapes.push_back(&data.soundscapes[r.soundscape]);
            b.maskers.push_back(r.silent() ? &silent : &data.maskers[*r.masker]);
            b.gammas.push_back(static_cast<float>(r.silent() ? gamma_stats.mean : r.gamma));
            labels.push_back(r.label);
        }
        nn::Graph<float> graph(false);
        ForwardContext<float> ctx{graph, params, nullptr, Mode::eval, nullptr};
        HeadOutput<float> out = net.forward(ctx, graph.constant(batch_tensor<float>(b.soundscapes)),
                                            graph.constant(batch_tensor<float>(b.maskers)), b.gammas);
        for (std::size_t i = 0; i < b.gammas.size(); ++i) {
            m.predictions.push_back({out.mu.value()[i], out.log_sigma.value()[i]});
        }
    }
    m.nll = nll_loss(m.predictions, labels);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double e = m.predictions[i].mu - labels[i];
        m.mse += e * e;
        m.mae += std::abs(e);
    }
    m.mse /= static_cast<double>(labels.size());
    m.mae /= static_cast<double>(labels.size());
    return m;
}

TrainResult train(const TrainingSet & data, const TrainOptions & options) {
    const ModelConfig & cfg = options.model;
    Network<float> net(cfg);
    check_shapes(data, cfg);
    if (options.batch_size == 0) throw UsageError("batch size must be >= 1");

    std::vector<std::size_t> train_idx, val_idx;
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        (data.samples[i].fold == options.validation_fold ? val_idx : train_idx).push_back(i);
    }
    if (train_idx.empty()) {
        throw DataError("validation fold " + std::to_string(options.validation_fold) + " leaves no training records");
    }

    std::vector<double> log_gains;
    for (std::size_t i : train_idx) {
        if (!data.samples[i].silent()) log_gains.push_back(data.samples[i].gamma);
    }
    TrainResult result;
    result.gamma_stats = gamma_stats_from_log_gains(log_gains);

    nn::ParameterSet<float> params = net.init_parameters(options.seed);
    nn::Adam<float> adam(options.adam);
    std::mt19937_64 rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
    const dsp::Spectrogram silent = dsp::Spectrogram::silent(cfg.time_frames, cfg.mel_bins(), 1);

    double best = std::numeric_limits<double>::infinity();
    result.params = params;
    std::vector<std::size_t> order = train_idx;
    for (std::size_t epoch = 1; epoch <= options.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0, sq_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
            const std::size_t end = std::min(order.size(), start + options.batch_size);
            Batch b;
            for (std::size_t i = start; i < end; ++i) {
                const TrainSample & r = data.samples[order[i]];
                b.soundscapes.push_back(&data.soundscapes[r.soundscape]);
                if (r.silent()) {
                    b.maskers.push_back(&silent);
                    b.gammas.push_back(static_cast<float>(sample_silent_gamma(result.gamma_stats, rng)));
                } else {
                    b.maskers.push_back(&data.maskers[*r.masker]);
                    b.gammas.push_back(static_cast<float>(r.gamma));
                }
                b.labels.push_back(r.label);
            }
            params.zero_grad();
            nn::Graph<float> graph(true);
            ForwardContext<float> ctx{graph, params, &params, Mode::train, &rng};
            HeadOutput<float> out = net.forward(ctx, graph.constant(batch_tensor<float>(b.soundscapes)),
                                                graph.constant(batch_tensor<float>(b.maskers)), b.gammas);
            const std::vector<float> labels(b.labels.begin(), b.labels.end());
            nn::Var<float> loss = nn::gaussian_nll(out.mu, out.log_sigma, std::span<const float>(labels));
            const double value = loss.value()[0];
            if (!std::isfinite(value)) {
                throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch));
            }
            graph.backward(loss);
            adam.step(params);
            const double n = static_cast<double>(b.labels.size());
            loss_sum += value * n;
            for (std::size_t i = 0; i < b.labels.size(); ++i) {
                const double e = out.mu.value()[i] - b.labels[i];
                sq_sum += e * e;
            }
        }

        EpochMetrics row;
        row.epoch = epoch;
        row.train_loss = loss_sum / static_cast<double>(order.size());
        row.train_mse = sq_sum / static_cast<double>(order.size());
        if (!val_idx.empty()) {
            EvalMetrics ev = evaluate(net, params, data, val_idx, result.gamma_stats, options.batch_size);
            row.val_nll = ev.nll;
            row.val_mse = ev.mse;
            row.val_mae = ev.mae;
            if (!std::isfinite(ev.nll)) throw NumericalError("non-finite validation loss at epoch " + std::to_string(epoch));
            if (ev.nll < best) {
                best = ev.nll;
                result.params = params;
                result.best_epoch = epoch;
            }
        } else {
            row.val_nll = row.val_mse = row.val_mae = std::numeric_limits<double>::quiet_NaN();
            result.params = params;
            result.best_epoch = epoch;
        }
        result.history.push_back(row);
        log::info("epoch " + std::to_string(epoch) + " train_loss " + std::to_string(row.train_loss) + " val_mse " +
                  std::to_string(row.val_mse));
        if (options.on_epoch) options.on_epoch(row);
    }
    return result;
}

} // namespace ppap::model
