#include "ppap/common/error.h"
#include "ppap/model/gradcheck.h"
#include "ppap/model/ppap.h"
#include "ppap/model/train.h"
#include "ppap/model/weights_io.h"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

using namespace ppap;
using namespace ppap::model;

namespace {

dsp::Spectrogram random_spec(std::size_t T, std::size_t F, std::size_t C, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    dsp::Spectrogram s{T, F, C, std::vector<double>(T * F * C)};
    for (auto & v : s.values) v = n(rng);
    return s;
}

dsp::Spectrogram constant_spec(std::size_t T, std::size_t F, std::size_t C, double v) {
    return dsp::Spectrogram{T, F, C, std::vector<double>(T * F * C, v)};
}

Embedding embedding_of(const nn::Tensor<float> & t, std::size_t b) {
    const std::size_t N = t.dim(1), D = t.dim(2);
    Embedding e;
    e.values = nn::Tensor<float>({N, D}, std::vector<float>(t.data() + b * N * D, t.data() + (b + 1) * N * D));
    return e;
}

bool same_values(const nn::Tensor<float> & a, const nn::Tensor<float> & b) {
    if (a.shape() != b.shape()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] != b[i]) return false;
    }
    return true;
}

} // namespace

TEST_CASE("presets are self-consistent") {
    for (const char * name : {"standard", "compact", "tiny"}) {
        ModelConfig c = ModelConfig::preset(name);
        CHECK_NOTHROW(c.validate());
        CHECK(c.derived_embed_frames() == c.embed_frames);
        CHECK(c.derived_embed_dim() == c.embed_dim);
        CHECK(dsp::frame_count(c.clip_samples(), c.dsp.window_size, c.dsp.hop) == c.time_frames);
    }
    ModelConfig s = ModelConfig::standard();
    CHECK(s.embed_frames == 20);
    CHECK(s.embed_dim == 128);
    CHECK(s.conv_channels.size() == 5);
    CHECK_THROWS_AS(ModelConfig::preset("huge"), UsageError);

    ModelConfig bad = s;
    bad.embed_dim = 100;
    CHECK_THROWS_AS(bad.validate(), UsageError);
    bad = s;
    bad.fusion = Fusion::multi_head;
    bad.attention_heads = 3;
    CHECK_THROWS_AS(bad.validate(), UsageError);
}

TEST_CASE("variant names round trip") {
    for (auto a : {Augmentation::cat, Augmentation::add, Augmentation::conv}) CHECK(parse_augmentation(to_string(a)) == a);
    for (auto f : {Fusion::additive, Fusion::dot_product, Fusion::multi_head, Fusion::pass_through})
        CHECK(parse_fusion(to_string(f)) == f);
    CHECK_THROWS_AS(parse_fusion("XYZ"), UsageError);
}

TEST_CASE("standard extractor shapes") {
    ModelConfig c = ModelConfig::standard();
    Network<float> net(c);
    auto params = net.init_parameters(1);
    Embedding k = extract_soundscape_features(net, random_spec(644, 64, 2, 1), params);
    CHECK(k.frames() == 20);
    CHECK(k.dim() == 128);
    CHECK(k.values.all_finite());
    Embedding q = extract_masker_features(net, random_spec(644, 64, 1, 2), params);
    CHECK(q.frames() == 20);
    CHECK(q.dim() == 128);

    Embedding z = extract_soundscape_features(net, constant_spec(644, 64, 2, 0.0), params);
    CHECK(z.values.all_finite());

    CHECK_THROWS(extract_soundscape_features(net, random_spec(644, 64, 1, 3), params));
    CHECK_THROWS(extract_masker_features(net, random_spec(600, 64, 1, 3), params));
}

TEST_CASE("soundscape channels are not interchangeable") {
    ModelConfig c = ModelConfig::tiny();
    Network<float> net(c);
    auto params = net.init_parameters(2);
    dsp::Spectrogram s = random_spec(c.time_frames, c.mel_bins(), 2, 4);
    dsp::Spectrogram swapped = s;
    for (std::size_t i = 0; i < s.values.size(); i += 2) std::swap(swapped.values[i], swapped.values[i + 1]);
    CHECK_FALSE(same_values(extract_soundscape_features(net, s, params).values,
                            extract_soundscape_features(net, swapped, params).values));
}

TEST_CASE("masker and soundscape branches have separate weights") {
    ModelConfig c = ModelConfig::tiny();
    Network<float> net(c);
    auto params = net.init_parameters(3);
    dsp::Spectrogram m = random_spec(c.time_frames, c.mel_bins(), 1, 5);
    dsp::Spectrogram padded = constant_spec(c.time_frames, c.mel_bins(), 2, 0.0);
    for (std::size_t i = 0; i < m.values.size(); ++i) padded.values[2 * i] = m.values[i];
    CHECK_FALSE(same_values(extract_masker_features(net, m, params).values,
                            extract_soundscape_features(net, padded, params).values));
    for (const auto & name : params.names()) {
        if (name.rfind("fs.", 0) == 0) CHECK(params.contains("fm." + name.substr(3)));
    }
    CHECK(params.value("fs.block1.conv.kernel").dim(2) == 2);
    CHECK(params.value("fm.block1.conv.kernel").dim(2) == 1);
}

TEST_CASE("augmentation variants") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n;
    for (auto aug : {Augmentation::cat, Augmentation::add, Augmentation::conv}) {
        ModelConfig c = ModelConfig::tiny();
        c.augmentation = aug;
        Network<double> net(c);
        auto params = net.init_parameters(1);
        nn::Tensor<double> k({2, c.embed_frames, c.embed_dim}), q({2, c.embed_frames, c.embed_dim});
        for (auto & v : k.values()) v = n(rng);
        for (auto & v : q.values()) v = n(rng);
        nn::Graph<double> g(false);
        ForwardContext<double> ctx{g, params};
        const std::vector<double> gammas{0.0, 1.5};
        nn::Var<double> v = net.augment(ctx, g.constant(k), g.constant(q), gammas);
        CHECK(v.shape() == nn::Shape{2, c.embed_frames, c.embed_dim});
        CHECK_THROWS_AS(net.augment(ctx, g.constant(k), g.constant(q), std::vector<double>{0.0}), DataError);

        if (aug == Augmentation::add) {
            nn::Tensor<double> q2 = q;
            for (auto & x : q2.values()) x += 5.0;
            nn::Var<double> v2 = net.augment(ctx, g.constant(k), g.constant(q2), gammas);
            const std::size_t row = c.embed_frames * c.embed_dim;
            for (std::size_t i = 0; i < row; ++i) CHECK(v2.value()[i] == doctest::Approx(v.value()[i]));
        }
    }
    ModelConfig c = ModelConfig::tiny();
    c.augmentation = Augmentation::cat;
    auto params = Network<double>(c).init_parameters(0);
    CHECK(params.value("aug.dense1.weight").dim(0) == 2 * c.embed_dim + 1);
    CHECK(ModelConfig::standard().embed_dim * 2 + 1 == 257);

    c.augmentation = Augmentation::conv;
    params = Network<double>(c).init_parameters(0);
    CHECK(params.value("aug.conv.kernel").shape() == nn::Shape{c.embed_dim, 3});
}

TEST_CASE("fusion variants") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n;
    for (auto fus : {Fusion::additive, Fusion::dot_product, Fusion::multi_head, Fusion::pass_through}) {
        ModelConfig c = ModelConfig::tiny();
        c.fusion = fus;
        c.attention_heads = 2;
        Network<double> net(c);
        auto params = net.init_parameters(1);
        const std::size_t N = c.embed_frames, D = c.embed_dim;
        nn::Tensor<double> q({2, N, D}), k({2, N, D}), v({2, N, D});
        for (auto * t : {&q, &k, &v})
            for (auto & x : t->values()) x = n(rng);
        nn::Graph<double> g(false);
        ForwardContext<double> ctx{g, params};
        FusionOutput<double> out = net.fuse(ctx, g.constant(q), g.constant(k), g.constant(v));
        CHECK(out.z.shape() == nn::Shape{2, D});
        if (fus == Fusion::pass_through) {
            for (std::size_t b = 0; b < 2; ++b)
                for (std::size_t d = 0; d < D; ++d) {
                    double m = 0;
                    for (std::size_t t = 0; t < N; ++t) m += v[(b * N + t) * D + d];
                    CHECK(out.z.value()[b * D + d] == doctest::Approx(m / N));
                }
            continue;
        }
        const std::size_t H = out.weights.shape()[1];
        for (std::size_t r = 0; r < 2 * H; ++r) {
            double total = 0;
            for (std::size_t t = 0; t < N; ++t) total += out.weights.value()[r * N + t];
            CHECK(total == doctest::Approx(1.0));
        }
    }

    ModelConfig c = ModelConfig::tiny();
    c.fusion = Fusion::dot_product;
    Network<double> net(c);
    auto params = net.init_parameters(1);
    const std::size_t N = c.embed_frames, D = c.embed_dim;
    nn::Tensor<double> q({1, N, D}, 0.3), k({1, N, D}, -0.2), v({1, N, D});
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = double(i);
    nn::Graph<double> g(false);
    ForwardContext<double> ctx{g, params};
    FusionOutput<double> out = net.fuse(ctx, g.constant(q), g.constant(k), g.constant(v));
    for (double a : out.weights.value().values()) CHECK(a == doctest::Approx(1.0 / N));
}

TEST_CASE("output head") {
    ModelConfig c = ModelConfig::tiny();
    Network<double> net(c);
    auto params = net.init_parameters(1);
    params.value("head.weight").fill(0.0);
    params.value("head.bias")[0] = 1.5;
    params.value("head.bias")[1] = 0.25;
    nn::Graph<double> g(false);
    ForwardContext<double> ctx{g, params};
    HeadOutput<double> h = net.head(ctx, g.constant(nn::Tensor<double>({2, c.embed_dim}, 3.0)));
    CHECK(h.mu.value()[0] == 1.5);
    CHECK(h.log_sigma.value()[1] == 0.25);

    params.value("head.bias")[1] = 50.0;
    h = net.head(ctx, g.constant(nn::Tensor<double>({1, c.embed_dim})));
    CHECK(h.log_sigma.value()[0] == c.log_sigma_max);
    params.value("head.bias")[1] = -50.0;
    h = net.head(ctx, g.constant(nn::Tensor<double>({1, c.embed_dim})));
    CHECK(h.log_sigma.value()[0] == c.log_sigma_min);
}

TEST_CASE("gaussian nll values") {
    const std::vector<double> y0{0.0};
    const std::vector<PredictedDistribution> p0{{0.0, 0.0}};
    CHECK(nll_loss(p0, y0) == 0.0);
    const std::vector<double> y1{1.0};
    CHECK(nll_loss(p0, y1) == doctest::Approx(0.5));
    const std::vector<PredictedDistribution> p2{{0.0, std::log(0.5)}};
    const std::vector<double> y2{0.5};
    CHECK(nll_loss(p2, y2) == doctest::Approx(0.5 + std::log(0.5)));
    CHECK(nll_loss(p2, y2) == doctest::Approx(-0.19314718).epsilon(1e-7));

    double best = 1e9, best_mu = 0;
    for (int i = -100; i <= 100; ++i) {
        const std::vector<PredictedDistribution> p{{i / 100.0, -1.0}};
        const std::vector<double> y{0.37};
        const double l = nll_loss(p, y);
        if (l < best) best = l, best_mu = i / 100.0;
    }
    CHECK(best_mu == doctest::Approx(0.37));
    CHECK_THROWS_AS(nll_loss(std::vector<PredictedDistribution>{}, std::vector<double>{}), UsageError);
    CHECK_THROWS_AS(nll_loss(p0, std::vector<double>{1.0, 2.0}), UsageError);
}

TEST_CASE("gamma statistics and silent sampling") {
    const std::vector<double> g{0.1, 10.0};
    std::vector<double> logs;
    for (double x : g) logs.push_back(std::log10(x));
    GammaStats s = gamma_stats_from_log_gains(logs);
    CHECK(s.mean == doctest::Approx(0.0));
    CHECK(s.stddev == doctest::Approx(1.0));
    CHECK_THROWS_AS(gamma_stats_from_log_gains(std::vector<double>{1.0}), DataError);
    CHECK_THROWS_AS(gamma_stats_from_log_gains(std::vector<double>{2.0, 2.0}), DataError);

    std::mt19937_64 rng(11);
    CHECK_THROWS(sample_silent_gamma(GammaStats{0.3, 0.0}, rng));
    const GammaStats u{-0.2, 0.5};
    const int n = 20000;
    double sum = 0, sq = 0;
    for (int i = 0; i < n; ++i) {
        const double x = sample_silent_gamma(u, rng);
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    CHECK(std::abs(mean - u.mean) < 4.0 * u.stddev / std::sqrt(double(n)));
    CHECK(std::sqrt(sq / n - mean * mean) == doctest::Approx(0.5).epsilon(0.03));
}

TEST_CASE("eval mode is repeatable and matches the staged path") {
    ModelConfig c = ModelConfig::tiny();
    Network<float> net(c);
    auto params = net.init_parameters(4);
    dsp::Spectrogram s = random_spec(c.time_frames, c.mel_bins(), 2, 1);
    dsp::Spectrogram m = random_spec(c.time_frames, c.mel_bins(), 1, 2);
    const PredictedDistribution a = predict(net, params, s, m, 0.4);
    const PredictedDistribution b = predict(net, params, s, m, 0.4);
    CHECK(a.mu == b.mu);
    CHECK(a.log_sigma == b.log_sigma);

    Embedding k = extract_soundscape_features(net, s, params);
    Embedding q = extract_masker_features(net, m, params);
    const std::vector<double> gammas{-1.0, 0.4};
    auto staged = predict_from_embeddings(net, params, k, q, gammas);
    CHECK(staged[1].mu == doctest::Approx(a.mu).epsilon(1e-6));
    CHECK(staged[1].log_sigma == doctest::Approx(a.log_sigma).epsilon(1e-6));
    CHECK(staged[0].mu != staged[1].mu);
}

TEST_CASE("gain-conditioned mean is not affine in gamma") {
    ModelConfig c = ModelConfig::tiny();
    Network<float> net(c);
    auto params = net.init_parameters(5);
    Embedding k = extract_soundscape_features(net, random_spec(c.time_frames, c.mel_bins(), 2, 6), params);
    Embedding q = extract_masker_features(net, random_spec(c.time_frames, c.mel_bins(), 1, 7), params);
    const std::vector<double> gammas{-2.0, 0.0, 2.0};
    auto p = predict_from_embeddings(net, params, k, q, gammas);
    CHECK(std::abs(p[1].mu - 0.5 * (p[0].mu + p[2].mu)) > 1e-6);
}

TEST_CASE("gradient check passes for all twelve variants") {
    for (auto aug : {Augmentation::cat, Augmentation::add, Augmentation::conv}) {
        for (auto fus : {Fusion::additive, Fusion::dot_product, Fusion::multi_head, Fusion::pass_through}) {
            GradcheckOptions o;
            o.config.augmentation = aug;
            o.config.fusion = fus;
            o.config.attention_heads = 4;
            GradcheckReport r = gradient_check(o);
            INFO(to_string(aug) << "+" << to_string(fus) << " max " << r.max_rel_error);
            CHECK(r.pass);
            CHECK(r.max_rel_error < 1e-4);
            std::size_t checked = 0;
            for (const auto & g : r.groups) checked += g.checked;
            CHECK(checked == Network<double>(o.config).init_parameters(0).scalar_count(true));
        }
    }
}

TEST_CASE("gradient check catches a corrupted group") {
    GradcheckOptions o;
    o.corrupt_group = "head";
    GradcheckReport r = gradient_check(o);
    CHECK_FALSE(r.pass);
    for (const auto & g : r.groups) CHECK(g.pass == (g.group != "head"));
}

namespace {

TrainingSet tiny_set(std::size_t n, std::uint64_t seed) {
    ModelConfig c = ModelConfig::tiny();
    TrainingSet set;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        set.soundscapes.push_back(random_spec(c.time_frames, c.mel_bins(), 2, seed + 100 + i));
        set.maskers.push_back(random_spec(c.time_frames, c.mel_bins(), 1, seed + 200 + i));
        set.samples.push_back({i, i, u(rng), 0.5 * u(rng), int(i % 2)});
    }
    return set;
}

} // namespace

TEST_CASE("training overfits a handful of records") {
    TrainingSet set = tiny_set(8, 1);
    TrainOptions o;
    o.model = ModelConfig::tiny();
    o.model.dropout = 0.0;
    o.adam.lr = 1e-3;
    o.max_epochs = 200;
    o.batch_size = 8;
    o.validation_fold = -1;
    TrainResult r = train(set, o);
    REQUIRE(r.history.size() == 200);
    CHECK(r.history.back().train_mse < 0.01);
    CHECK(r.history.back().train_mse < r.history.front().train_mse);
}

TEST_CASE("training is deterministic for a seed") {
    TrainingSet set = tiny_set(10, 2);
    set.samples[3].masker.reset();
    TrainOptions o;
    o.model = ModelConfig::tiny();
    o.max_epochs = 3;
    o.batch_size = 4;
    o.seed = 17;
    o.validation_fold = 1;
    const TrainResult a = train(set, o), b = train(set, o);
    CHECK(encode_weights(o.model, a.params, a.gamma_stats) == encode_weights(o.model, b.params, b.gamma_stats));
    CHECK(a.best_epoch >= 1);
    CHECK(a.best_epoch <= 3);
    o.seed = 18;
    const TrainResult d = train(set, o);
    CHECK(encode_weights(o.model, a.params) != encode_weights(o.model, d.params));

    o.validation_fold = 0;
    for (auto & s : set.samples) s.fold = 0;
    CHECK_THROWS_AS(train(set, o), DataError);
}

TEST_CASE("weight file round trip") {
    ModelConfig c = ModelConfig::tiny();
    c.fusion = Fusion::additive;
    auto params = Network<float>(c).init_parameters(9);
    const GammaStats gs{0.1, 0.7};
    const auto dir = std::filesystem::temp_directory_path() / "ppap_test_weights";
    std::filesystem::create_directories(dir);
    const auto path = dir / "w.ppapw";
    const std::string hash = save_weights(path, c, params, gs);
    CHECK(hash == weights_hash(c, params, gs));
    WeightFile w = load_weights(path);
    CHECK(w.hash == hash);
    CHECK(w.config.fusion == Fusion::additive);
    REQUIRE(w.gamma_stats.has_value());
    CHECK(w.gamma_stats->stddev == 0.7);
    REQUIRE(w.params.names() == params.names());
    for (const auto & name : params.names()) {
        CHECK(same_values(w.params.value(name), params.value(name)));
        CHECK(w.params.trainable(name) == params.trainable(name));
    }

    auto bytes = encode_weights(c, params);
    CHECK(weights_hash(c, params) != hash);
    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(decode_weights(bad), DataError);
    bad = bytes;
    bad.resize(bytes.size() - 1);
    CHECK_THROWS_AS(decode_weights(bad), DataError);
    bad = bytes;
    bad.push_back(0);
    CHECK_THROWS_AS(decode_weights(bad), DataError);
    CHECK_THROWS_AS(load_weights(dir / "missing.ppapw"), DataError);
    std::filesystem::remove_all(dir);
}
