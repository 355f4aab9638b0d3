#include "ppap/model/gradcheck.h"

#include "ppap/model/network.h"
#include "ppap/model/ppap.h"
#include "ppap/nn/ops.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

namespace ppap::model {

namespace {

std::string group_of(const std::string & name) {
    const auto pos = name.rfind('.');
    return pos == std::string::npos ? name : name.substr(0, pos);
}

struct Problem {
    nn::Tensor<double> soundscapes;
    nn::Tensor<double> maskers;
    std::vector<double> gammas;
    std::vector<double> labels;
};

Problem make_problem(const ModelConfig & cfg, std::size_t batch, std::mt19937_64 & rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Problem p;
    p.soundscapes = nn::Tensor<double>({batch, cfg.time_frames, cfg.mel_bins(), cfg.soundscape_channels});
    p.maskers = nn::Tensor<double>({batch, cfg.time_frames, cfg.mel_bins(), 1});
    for (auto & v : p.soundscapes.values()) v = normal(rng);
    for (auto & v : p.maskers.values()) v = normal(rng);
    for (std::size_t b = 0; b < batch; ++b) {
        p.gammas.push_back(2.0 * uni(rng));
        p.labels.push_back(uni(rng));
    }
    return p;
}

double loss_of(const Network<double> & net, nn::ParameterSet<double> & params, const Problem & p,
               std::uint64_t dropout_seed, bool record) {
    std::mt19937_64 rng(dropout_seed);
    nn::Graph<double> graph(record);
    ForwardContext<double> ctx{graph, params, &params, Mode::train, &rng};
    HeadOutput<double> out = net.forward(ctx, graph.constant(p.soundscapes), graph.constant(p.maskers), p.gammas);
    nn::Var<double> loss = nn::gaussian_nll(out.mu, out.log_sigma, std::span<const double>(p.labels));
    if (record) graph.backward(loss);
    return loss.value()[0];
}

} // namespace

GradcheckReport gradient_check(const GradcheckOptions & options) {
    Network<double> net(options.config);
    nn::ParameterSet<double> params = net.init_parameters(options.seed);
    std::mt19937_64 rng(options.seed + 1);
    const Problem problem = make_problem(options.config, std::max<std::size_t>(options.batch, 1), rng);
    const std::uint64_t dropout_seed = options.seed + 2;

    params.zero_grad();
    loss_of(net, params, problem, dropout_seed, true);
    std::map<std::string, std::vector<double>> analytic;
    for (const auto & name : params.names()) {
        if (!params.trainable(name)) continue;
        const auto & g = params.grad(name).values();
        std::vector<double> copy(g.begin(), g.end());
        if (group_of(name) == options.corrupt_group) {
            for (auto & v : copy) v *= 1.01;
        }
        analytic[name] = std::move(copy);
    }

    GradcheckReport report;
    std::map<std::string, std::size_t> group_index;
    for (const auto & name : params.names()) {
        if (!params.trainable(name)) continue;
        const std::string group = group_of(name);
        if (!group_index.count(group)) {
            group_index[group] = report.groups.size();
            report.groups.push_back({group, 0, 0.0, true});
        }
        GroupReport & gr = report.groups[group_index[group]];
        auto & w = params.value(name);
        const auto & a = analytic[name];
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double orig = w[i];
            w[i] = orig + options.step;
            const double up = loss_of(net, params, problem, dropout_seed, false);
            w[i] = orig - options.step;
            const double down = loss_of(net, params, problem, dropout_seed, false);
            w[i] = orig;
            const double numeric = (up - down) / (2.0 * options.step);
            const double denom = std::max({std::abs(a[i]), std::abs(numeric), options.floor});
            const double rel = std::abs(a[i] - numeric) / denom;
            gr.max_rel_error = std::max(gr.max_rel_error, rel);
            ++gr.checked;
        }
    }
    for (auto & gr : report.groups) {
        gr.pass = gr.max_rel_error < options.tolerance;
        report.max_rel_error = std::max(report.max_rel_error, gr.max_rel_error);
        report.pass = report.pass && gr.pass;
    }
    return report;
}

} // namespace ppap::model
