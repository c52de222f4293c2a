#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "panama/acquisition.hpp"

namespace panama::testkit {


/// Member i outputs a_i * tanh(b_i * x + w_i . g) + c_i * x * (v_i . g), with
/// a matching plain-double evaluator for brute-force checks.
struct StubMember {
    double a, b, c;
    std::vector<double> w, v;

    std::vector<double> eval(const std::vector<double>& x, const std::vector<double>& g) const {
        double wg = 0.0, vg = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            wg += w[i] * g[i];
            vg += v[i] * g[i];
        }
        std::vector<double> y;
        for (double s : x) y.push_back(a * std::tanh(b * s + wg) + c * s * vg);
        return y;
    }

    al::CommitteeMember member() const {
        StubMember self = *this;
        return [self](ad::Graph& graph, ad::Var x, ad::Var g) {
            const std::size_t k = g.size(), T = x.size();
            ad::Var wg = ad::matmul(graph.constant(ad::Array({1, k}, self.w)), ad::reshape(g, {k, 1}));
            ad::Var vg = ad::matmul(graph.constant(ad::Array({1, k}, self.v)), ad::reshape(g, {k, 1}));
            ad::Var xr = ad::reshape(x, {1, T});
            ad::Var lin = ad::add_time_broadcast(ad::scale(xr, self.b), ad::reshape(wg, {1}));
            ad::Var gain = ad::broadcast_time(ad::reshape(vg, {1}), T);
            ad::Var y = ad::scale(ad::tanh(lin), self.a) + ad::scale(xr * gain, self.c);
            return ad::reshape(y, {T});
        };
    }
};

inline std::vector<StubMember> random_stubs(int m, std::size_t k, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<StubMember> out;
    for (int i = 0; i < m; ++i) {
        StubMember s{u(rng), 2.0 * u(rng), u(rng), {}, {}};
        for (std::size_t j = 0; j < k; ++j) {
            s.w.push_back(u(rng));
            s.v.push_back(u(rng));
        }
        out.push_back(std::move(s));
    }
    return out;
}

inline al::Committee committee_of(const std::vector<StubMember>& stubs) {
    al::Committee c;
    for (const auto& s : stubs) c.push_back(s.member());
    return c;
}

/// Two members y = +g0 x and y = -g0 x. Their mel spectra agree, so
/// D = w_waveform * g0^2 * sum(x^2) / 2.
inline al::Committee quadratic_committee() {
    al::Committee c;
    for (double sign : {1.0, -1.0}) {
        c.push_back([sign](ad::Graph&, ad::Var x, ad::Var g) {
            const std::size_t T = x.size();
            ad::Var g0 = ad::reshape(ad::slice(ad::reshape(g, {1, g.size()}), 0, 1), {1});
            return ad::reshape(ad::scale(ad::reshape(x, {1, T}) * ad::broadcast_time(g0, T), sign), {T});
        });
    }
    return c;
}

/// Element-wise population variance summed over elements, by direct loops.
inline double variance_trace(const std::vector<std::vector<double>>& outs) {
    const std::size_t n = outs.front().size();
    const double m = static_cast<double>(outs.size());
    double total = 0.0;
    for (std::size_t e = 0; e < n; ++e) {
        double mean = 0.0;
        for (const auto& o : outs) mean += o[e];
        mean /= m;
        double var = 0.0;
        for (const auto& o : outs) var += (o[e] - mean) * (o[e] - mean);
        total += var / m;
    }
    return total;
}

}  // namespace panama::testkit
