#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "panama/autodiff.hpp"

namespace panama::testkit {

/// Builds a scalar from leaves bound to the given arrays.
using ScalarFn = std::function<ad::Var(ad::Graph&, const std::vector<ad::Var>&)>;

/// Largest norm-wise relative error, over all inputs, between the analytic
/// gradient and central differences with step h.
inline double gradcheck(const std::vector<ad::Array>& inputs, const ScalarFn& f, double h = 1e-5) {
    std::vector<std::vector<double>> analytic;
    {
        ad::Graph g;
        std::vector<ad::Var> leaves;
        for (const auto& a : inputs) leaves.push_back(g.leaf(a, true));
        ad::Var out = f(g, leaves);
        g.backward(out);
        for (const auto& l : leaves) analytic.push_back(l.grad());
    }
    auto eval = [&](const std::vector<ad::Array>& at) {
        ad::Graph g;
        std::vector<ad::Var> leaves;
        for (const auto& a : at) leaves.push_back(g.constant(a));
        return f(g, leaves).item();
    };
    double worst = 0.0;
    std::vector<ad::Array> probe = inputs;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        double diff2 = 0.0, an2 = 0.0, nu2 = 0.0;
        for (std::size_t e = 0; e < inputs[i].size(); ++e) {
            const double orig = probe[i].data[e];
            probe[i].data[e] = orig + h;
            const double up = eval(probe);
            probe[i].data[e] = orig - h;
            const double down = eval(probe);
            probe[i].data[e] = orig;
            const double numeric = (up - down) / (2.0 * h);
            diff2 += (numeric - analytic[i][e]) * (numeric - analytic[i][e]);
            an2 += analytic[i][e] * analytic[i][e];
            nu2 += numeric * numeric;
        }
        const double scale = std::max({std::sqrt(an2), std::sqrt(nu2), 1e-12});
        worst = std::max(worst, std::sqrt(diff2) / scale);
    }
    return worst;
}

inline ad::Array random_array(ad::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    ad::Array a(std::move(shape));
    for (double& v : a.data) v = u(rng);
    return a;
}

/// sum(w * v) with fixed random weights w, turning any tensor into a scalar
/// whose gradient is generic.
inline ad::Var random_projection(ad::Graph& g, ad::Var v, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return ad::sum(ad::mul(v, g.constant(random_array(v.shape(), rng))));
}

}  // namespace panama::testkit
