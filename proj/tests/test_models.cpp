#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "gradcheck.hpp"
#include "panama/models.hpp"

using namespace panama;

namespace {

nn::ModelSpec small_wavenet() {
    nn::ModelSpec s;
    s.arch = nn::Architecture::WaveNet;
    s.num_knobs = 3;
    s.wavenet.channels = 3;
    s.wavenet.skip_channels = 2;
    s.wavenet.kernel_size = 2;
    s.wavenet.dilations = {1, 2, 4};
    return s;
}

nn::ModelSpec small_lstm(int layers = 1) {
    nn::ModelSpec s;
    s.arch = nn::Architecture::Lstm;
    s.num_knobs = 3;
    s.lstm.hidden_size = 4;
    s.lstm.num_layers = layers;
    return s;
}

std::vector<double> run(const nn::ModelSpec& spec, const nn::ModelParams& p, const std::vector<double>& x,
                        const std::vector<double>& g) {
    ad::Graph graph;
    auto bound = nn::bind_params(graph, p, false);
    return nn::forward(spec, bound, graph.constant(ad::Array::vector(x)), graph.constant(ad::Array::vector(g)))
        .value()
        .data;
}

double sigm(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Scalar-loop WaveNet written from the layer equations.
std::vector<double> wavenet_reference(const nn::ModelSpec& spec, const nn::ModelParams& p,
                                      const std::vector<double>& x, const std::vector<double>& g) {
    const std::size_t T = x.size(), C = spec.wavenet.channels, S = spec.wavenet.skip_channels;
    const std::size_t K = spec.wavenet.kernel_size, k = g.size();
    std::vector<std::vector<double>> h(C, std::vector<double>(T));
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t t = 0; t < T; ++t) h[c][t] = p.at("input").at(c, 0) * x[t];
    std::vector<std::vector<double>> skip(S, std::vector<double>(T, 0.0));
    for (std::size_t l = 0; l < spec.wavenet.dilations.size(); ++l) {
        const std::string pre = "layer" + std::to_string(l) + ".";
        const long d = spec.wavenet.dilations[l];
        const auto& wf = p.at(pre + "w_filter");
        const auto& wg = p.at(pre + "w_gate");
        std::vector<std::vector<double>> z(C, std::vector<double>(T));
        for (std::size_t o = 0; o < C; ++o) {
            double cf = 0.0, cg = 0.0;
            for (std::size_t i = 0; i < k; ++i) {
                cf += p.at(pre + "cond_filter").at(o, i) * g[i];
                cg += p.at(pre + "cond_gate").at(o, i) * g[i];
            }
            for (std::size_t t = 0; t < T; ++t) {
                double f = cf + p.at(pre + "v_filter").at(o, 0) * x[t];
                double q = cg + p.at(pre + "v_gate").at(o, 0) * x[t];
                for (std::size_t i = 0; i < C; ++i)
                    for (std::size_t j = 0; j < K; ++j) {
                        const long src = static_cast<long>(t) - d * static_cast<long>(K - 1 - j);
                        if (src < 0) continue;
                        f += wf.data[(o * C + i) * K + j] * h[i][src];
                        q += wg.data[(o * C + i) * K + j] * h[i][src];
                    }
                z[o][t] = std::tanh(f) * sigm(q);
            }
        }
        for (std::size_t t = 0; t < T; ++t) {
            for (std::size_t o = 0; o < C; ++o) {
                double r = 0.0;
                for (std::size_t i = 0; i < C; ++i) r += p.at(pre + "residual").at(o, i) * z[i][t];
                h[o][t] += r;
            }
            for (std::size_t s = 0; s < S; ++s)
                for (std::size_t i = 0; i < C; ++i) skip[s][t] += p.at(pre + "skip").at(s, i) * z[i][t];
        }
    }
    std::vector<double> y(T, 0.0);
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t s = 0; s < S; ++s) y[t] += p.at("head").at(0, s) * skip[s][t];
    return y;
}

// Single-layer LSTM over cat(x_t, g), gate order i, f, g, o.
std::vector<double> lstm_reference(const nn::ModelSpec& spec, const nn::ModelParams& p, const std::vector<double>& x,
                                   const std::vector<double>& g) {
    const std::size_t H = spec.lstm.hidden_size, k = g.size();
    std::vector<double> h(H, 0.0), c(H, 0.0), y;
    for (double xt : x) {
        std::vector<double> pre(4 * H);
        for (std::size_t r = 0; r < 4 * H; ++r) {
            double s = p.at("lstm0.bias")[r] + p.at("lstm0.w_x").at(r, 0) * xt;
            for (std::size_t i = 0; i < k; ++i) s += p.at("lstm0.w_knobs").at(r, i) * g[i];
            for (std::size_t j = 0; j < H; ++j) s += p.at("lstm0.w_hh").at(r, j) * h[j];
            pre[r] = s;
        }
        for (std::size_t j = 0; j < H; ++j) {
            c[j] = sigm(pre[H + j]) * c[j] + sigm(pre[j]) * std::tanh(pre[2 * H + j]);
            h[j] = sigm(pre[3 * H + j]) * std::tanh(c[j]);
        }
        double out = p.at("head.b")[0];
        for (std::size_t j = 0; j < H; ++j) out += p.at("head.w").at(0, j) * h[j];
        y.push_back(out);
    }
    return y;
}

nn::ModelParams with_random_biases(nn::ModelParams p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (auto& [name, t] : p.tensors)
        if (name.find("bias") != std::string::npos || name == "head.b")
            for (double& v : t.data) v = u(rng);
    return p;
}

}  // namespace

TEST(KnobVectorTest, DefaultLabels) {
    EXPECT_EQ(nn::default_knob_labels(),
              (std::vector<std::string>{"Gain", "Bass", "Mid", "Treble", "Master", "Presence"}));
    const auto g = nn::KnobVector::with_default_labels({0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7});
    EXPECT_EQ(g.labels.back(), "knob6");
}

TEST(KnobVectorTest, Validation) {
    EXPECT_NO_THROW(nn::KnobVector::with_default_labels({0.0, 1.0}).validate());
    EXPECT_THROW(nn::KnobVector::with_default_labels({0.0, 1.5}).validate(), std::invalid_argument);
    EXPECT_THROW(nn::KnobVector::with_default_labels({}).validate(), std::invalid_argument);
    EXPECT_THROW((nn::KnobVector{{0.1, 0.2}, {"a", "a"}}.validate()), std::invalid_argument);
    EXPECT_THROW((nn::KnobVector{{0.1, 0.2}, {"a"}}.validate()), std::invalid_argument);
}

TEST(ModelSpecTest, ReceptiveField) {
    nn::ModelSpec s;
    EXPECT_EQ(s.receptive_field(), 1 + 2 * 511);
    EXPECT_EQ(small_wavenet().receptive_field(), 8);
    EXPECT_EQ(small_lstm().receptive_field(), 1);
}

TEST(ModelSpecTest, JsonRoundTrip) {
    for (const auto& s : {small_wavenet(), small_lstm(2)}) {
        const nlohmann::json j = s;
        const auto back = j.get<nn::ModelSpec>();
        EXPECT_EQ(nlohmann::json(back), j);
    }
    EXPECT_THROW(nn::architecture_from_string("gru"), std::invalid_argument);
}

TEST(Init, DeterministicInSeed) {
    const auto s = small_wavenet();
    EXPECT_EQ(nn::init_params(s, 5), nn::init_params(s, 5));
    EXPECT_GT(nn::parameter_distance(nn::init_params(s, 5), nn::init_params(s, 6)), 0.0);
}

TEST(WaveNet, MatchesScalarReference) {
    const auto spec = small_wavenet();
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 5; ++trial) {
        const auto p = nn::init_params(spec, 100 + trial);
        const auto x = testkit::random_array({40}, rng).data;
        const auto g = testkit::random_array({3}, rng, 0.0, 1.0).data;
        const auto got = run(spec, p, x, g);
        const auto want = wavenet_reference(spec, p, x, g);
        for (std::size_t t = 0; t < x.size(); ++t) EXPECT_NEAR(got[t], want[t], 1e-12);
    }
}

TEST(Lstm, MatchesScalarReference) {
    const auto spec = small_lstm();
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 5; ++trial) {
        const auto p = with_random_biases(nn::init_params(spec, 200 + trial), trial);
        const auto x = testkit::random_array({30}, rng).data;
        const auto g = testkit::random_array({3}, rng, 0.0, 1.0).data;
        const auto got = run(spec, p, x, g);
        const auto want = lstm_reference(spec, p, x, g);
        for (std::size_t t = 0; t < x.size(); ++t) EXPECT_NEAR(got[t], want[t], 1e-12);
    }
}

TEST(Models, OutputsAreCausal) {
    std::mt19937_64 rng(3);
    for (const auto& spec : {small_wavenet(), small_lstm(2)}) {
        const auto p = with_random_biases(nn::init_params(spec, 9), 9);
        auto x = testkit::random_array({32}, rng).data;
        const std::vector<double> g = {0.2, 0.5, 0.9};
        const auto base = run(spec, p, x, g);
        x[20] += 1.0;
        const auto pert = run(spec, p, x, g);
        for (std::size_t t = 0; t < 20; ++t) EXPECT_EQ(base[t], pert[t]);
        EXPECT_NE(base[20], pert[20]);
    }
}

TEST(Models, KnobsChangeTheOutput) {
    std::mt19937_64 rng(4);
    for (const auto& spec : {small_wavenet(), small_lstm()}) {
        const auto p = nn::init_params(spec, 11);
        const auto x = testkit::random_array({16}, rng).data;
        EXPECT_NE(run(spec, p, x, {0.0, 0.0, 0.0}), run(spec, p, x, {1.0, 0.0, 0.0}));
    }
}

TEST(Models, KnobCountMismatchRejected) {
    const auto spec = small_wavenet();
    const auto p = nn::init_params(spec, 1);
    try {
        run(spec, p, {0.1, 0.2}, {0.5, 0.5});
        FAIL() << "expected an error";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("k=2"), std::string::npos) << e.what();
    }
}

TEST(Models, ParameterGradientsMatchFiniteDifferences) {
    std::mt19937_64 rng(5);
    for (const auto& spec : {small_wavenet(), small_lstm(2)}) {
        const auto p = with_random_biases(nn::init_params(spec, 21), 21);
        std::vector<std::string> names;
        std::vector<ad::Array> inputs;
        for (const auto& [name, t] : p.tensors) {
            names.push_back(name);
            inputs.push_back(t);
        }
        const auto x = testkit::random_array({12}, rng).data;
        const std::vector<double> g = {0.3, 0.6, 0.1};
        const double err = testkit::gradcheck(inputs, [&](ad::Graph& graph, const std::vector<ad::Var>& v) {
            nn::BoundParams bound;
            for (std::size_t i = 0; i < names.size(); ++i) bound.emplace(names[i], v[i]);
            auto y = nn::forward(spec, bound, graph.constant(ad::Array::vector(x)), graph.constant(ad::Array::vector(g)));
            return ad::mean(ad::square(y));
        });
        EXPECT_LT(err, 1e-6) << nn::to_string(spec.arch);
    }
}

TEST(Predict, ChunkedMatchesSinglePass) {
    const auto spec = small_wavenet();
    const auto p = nn::init_params(spec, 31);
    nn::Model m{spec, p};
    std::mt19937_64 rng(6);
    const auto x = testkit::random_array({203}, rng).data;
    const auto g = nn::KnobVector::with_default_labels({0.4, 0.1, 0.8});
    const auto full = nn::predict(m, x, g, 1000);
    for (std::size_t chunk : {1u, 7u, 50u}) EXPECT_EQ(nn::predict(m, x, g, chunk), full) << chunk;
    EXPECT_EQ(full, run(spec, p, x, g.values));
}

TEST(Persistence, SaveLoadRoundTrip) {
    const auto dir = std::filesystem::temp_directory_path() / "panama_test_models";
    std::filesystem::create_directories(dir);
    for (const auto& spec : {small_wavenet(), small_lstm(2)}) {
        nn::Model m{spec, nn::init_params(spec, 41)};
        // Stored as float32, so start from float-representable values.
        for (auto& [_, t] : m.params.tensors)
            for (double& v : t.data) v = static_cast<float>(v);
        const auto path = dir / (nn::to_string(spec.arch) + ".bin");
        nn::save_model(m, path);
        const auto back = nn::load_model(path);
        EXPECT_EQ(nlohmann::json(back.spec), nlohmann::json(spec));
        EXPECT_EQ(back.params, m.params);
        const std::vector<double> x = {0.1, -0.3, 0.5, 0.0, 0.2};
        const auto g = nn::KnobVector::with_default_labels({0.5, 0.5, 0.5});
        EXPECT_EQ(nn::predict(back, x, g), nn::predict(m, x, g));
    }
}

TEST(Persistence, CorruptFilesRejected) {
    const auto dir = std::filesystem::temp_directory_path() / "panama_test_models";
    std::filesystem::create_directories(dir);
    const auto path = dir / "bad.bin";
    nn::save_model({small_lstm(), nn::init_params(small_lstm(), 1)}, path);
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
    EXPECT_THROW(nn::load_model(path), std::runtime_error);
    EXPECT_THROW(nn::load_model(dir / "missing.bin"), std::runtime_error);
}
