#pragma once

#include <string>
#include <vector>

#include "gradcheck.hpp"

namespace panama::testkit {

struct OpCase {
    std::string name;
    std::function<std::vector<ad::Array>(std::mt19937_64&)> inputs;
    ScalarFn fn;
};

/// One randomized gradient probe per differentiable op.
inline std::vector<OpCase> op_cases() {
    using ad::Array;
    using ad::Graph;
    using ad::Var;
    using V = const std::vector<Var>&;
    auto dims = [](std::mt19937_64& rng, int lo, int hi) {
        return static_cast<std::size_t>(std::uniform_int_distribution<int>(lo, hi)(rng));
    };
    auto pair = [dims](std::mt19937_64& rng) {
        ad::Shape s{dims(rng, 1, 3), dims(rng, 1, 5)};
        return std::vector<Array>{random_array(s, rng), random_array(s, rng)};
    };
    auto one = [dims](std::mt19937_64& rng) {
        return std::vector<Array>{random_array({dims(rng, 1, 3), dims(rng, 1, 5)}, rng)};
    };
    auto project = [](Graph& g, Var v) { return random_projection(g, v, 99); };

    std::vector<OpCase> c;
    c.push_back({"add", pair, [=](Graph& g, V v) { return project(g, v[0] + v[1]); }});
    c.push_back({"sub", pair, [=](Graph& g, V v) { return project(g, v[0] - v[1]); }});
    c.push_back({"mul", pair, [=](Graph& g, V v) { return project(g, v[0] * v[1]); }});
    c.push_back({"scale", one, [=](Graph& g, V v) { return project(g, ad::scale(v[0], -1.7)); }});
    c.push_back({"add_scalar", one, [=](Graph& g, V v) { return project(g, ad::add_scalar(v[0], 0.3)); }});
    c.push_back({"neg", one, [=](Graph& g, V v) { return project(g, -v[0]); }});
    c.push_back({"tanh", one, [=](Graph& g, V v) { return project(g, ad::tanh(v[0] * 2.0)); }});
    c.push_back({"sigmoid", one, [=](Graph& g, V v) { return project(g, ad::sigmoid(v[0] * 3.0)); }});
    c.push_back({"log",
                 [dims](std::mt19937_64& rng) {
                     return std::vector<Array>{random_array({dims(rng, 1, 3), dims(rng, 1, 5)}, rng, 0.2, 2.0)};
                 },
                 [=](Graph& g, V v) { return project(g, ad::log(v[0])); }});
    c.push_back({"exp", one, [=](Graph& g, V v) { return project(g, ad::exp(v[0])); }});
    c.push_back({"abs",
                 [dims](std::mt19937_64& rng) {
                     // Keep samples away from the kink at 0.
                     Array a = random_array({dims(rng, 1, 3), dims(rng, 1, 5)}, rng, 0.1, 1.0);
                     for (std::size_t i = 0; i < a.size(); i += 2) a.data[i] = -a.data[i];
                     return std::vector<Array>{a};
                 },
                 [=](Graph& g, V v) { return project(g, ad::abs(v[0])); }});
    c.push_back({"square", one, [=](Graph& g, V v) { return project(g, ad::square(v[0])); }});
    c.push_back({"clamp_floor",
                 [dims](std::mt19937_64& rng) {
                     Array a = random_array({dims(rng, 1, 3), dims(rng, 1, 5)}, rng, 0.05, 1.0);
                     for (std::size_t i = 0; i < a.size(); i += 2) a.data[i] = -a.data[i];
                     return std::vector<Array>{a};
                 },
                 [=](Graph& g, V v) { return project(g, ad::clamp_floor(v[0], 0.0)); }});
    c.push_back({"reshape", one, [=](Graph& g, V v) { return project(g, ad::reshape(v[0], {v[0].size()})); }});
    c.push_back({"broadcast_time",
                 [dims](std::mt19937_64& rng) { return std::vector<Array>{random_array({dims(rng, 1, 4)}, rng)}; },
                 [=](Graph& g, V v) { return project(g, ad::broadcast_time(v[0], 3)); }});
    c.push_back({"add_time_broadcast",
                 [dims](std::mt19937_64& rng) {
                     const std::size_t d = dims(rng, 1, 3);
                     return std::vector<Array>{random_array({d, dims(rng, 1, 5)}, rng), random_array({d}, rng)};
                 },
                 [=](Graph& g, V v) { return project(g, ad::add_time_broadcast(v[0], v[1])); }});
    c.push_back({"concat",
                 [dims](std::mt19937_64& rng) {
                     const std::size_t cols = dims(rng, 1, 4);
                     return std::vector<Array>{random_array({dims(rng, 1, 3), cols}, rng),
                                               random_array({dims(rng, 1, 3), cols}, rng)};
                 },
                 [=](Graph& g, V v) { return project(g, ad::concat({v[0], v[1]})); }});
    c.push_back({"slice",
                 [dims](std::mt19937_64& rng) { return std::vector<Array>{random_array({2, dims(rng, 3, 7)}, rng)}; },
                 [=](Graph& g, V v) { return project(g, ad::slice(v[0], 1, v[0].shape()[1] - 2)); }});
    c.push_back({"matmul",
                 [dims](std::mt19937_64& rng) {
                     const std::size_t n = dims(rng, 1, 4);
                     return std::vector<Array>{random_array({dims(rng, 1, 3), n}, rng),
                                               random_array({n, dims(rng, 1, 4)}, rng)};
                 },
                 [=](Graph& g, V v) { return project(g, ad::matmul(v[0], v[1])); }});
    c.push_back({"sum", one, [](Graph&, V v) { return ad::sum(ad::square(v[0])); }});
    c.push_back({"mean", one, [](Graph&, V v) { return ad::mean(ad::tanh(v[0])); }});
    c.push_back({"conv1d_dilated",
                 [dims](std::mt19937_64& rng) {
                     const std::size_t cin = dims(rng, 1, 2);
                     return std::vector<Array>{random_array({cin, dims(rng, 6, 10)}, rng),
                                               random_array({dims(rng, 1, 2), cin, dims(rng, 1, 3)}, rng)};
                 },
                 [=](Graph& g, V v) { return project(g, ad::conv1d_dilated(v[0], v[1], 2, true)); }});
    c.push_back({"conv1d_valid",
                 [dims](std::mt19937_64& rng) {
                     const std::size_t cin = dims(rng, 1, 2);
                     return std::vector<Array>{random_array({cin, dims(rng, 8, 10)}, rng),
                                               random_array({dims(rng, 1, 2), cin, dims(rng, 1, 3)}, rng)};
                 },
                 [=](Graph& g, V v) { return project(g, ad::conv1d_dilated(v[0], v[1], 3, false)); }});
    c.push_back({"lstm_layer",
                 [dims](std::mt19937_64& rng) {
                     const std::size_t in = dims(rng, 1, 3), h = dims(rng, 1, 3), t = dims(rng, 2, 6);
                     return std::vector<Array>{random_array({in, t}, rng), random_array({4 * h, in}, rng),
                                               random_array({4 * h, h}, rng), random_array({4 * h}, rng)};
                 },
                 [=](Graph& g, V v) { return project(g, ad::lstm_layer(v[0], v[1], v[2], v[3])); }});
    return c;
}

}  // namespace panama::testkit
