#include "panama/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include "panama/parallel.hpp"
#include "panama/seeding.hpp"

namespace panama::al {

CommitteeMember frozen_member(std::shared_ptr<const nn::Model> model) {
    return [model](ad::Graph& graph, ad::Var x, ad::Var g) {
        nn::BoundParams p = nn::bind_params(graph, model->params, false);
        return nn::forward(model->spec, p, x, g);
    };
}

Committee make_committee(const nn::ModelSpec& spec, const std::vector<nn::ModelParams>& members) {
    Committee c;
    for (const auto& params : members) c.push_back(frozen_member(std::make_shared<const nn::Model>(nn::Model{spec, params})));
    return c;
}

void DisagreementWeights::validate() const {
    if (waveform < 0.0 || mel < 0.0) throw std::invalid_argument("disagreement weights must be non-negative");
    if (waveform == 0.0 && mel == 0.0) throw std::invalid_argument("disagreement weights must not both be zero");
}

void AcquireConfig::validate() const {
    if (restarts < 1) throw std::invalid_argument("AcquireConfig: restarts must be >= 1");
    if (steps < 0) throw std::invalid_argument("AcquireConfig: steps must be >= 0");
    if (!(step_size > 0.0)) throw std::invalid_argument("AcquireConfig: step_size must be positive");
    if (!(dedupe_threshold > 0.0 && dedupe_threshold < 1.0))
        throw std::invalid_argument("AcquireConfig: dedupe_threshold must lie in (0, 1)");
    if (max_per_round && *max_per_round < 1) throw std::invalid_argument("AcquireConfig: max_per_round must be >= 1");
    weights.validate();
    if (weights.mel > 0.0) {
        mel.validate();
        if (excerpt_length < static_cast<std::size_t>(mel.n_fft))
            throw std::invalid_argument("AcquireConfig: excerpt shorter than mel n_fft");
    }
}

namespace {

// Sum over elements of the population variance across members.
ad::Var variance_trace(const std::vector<ad::Var>& outs) {
    const double m = static_cast<double>(outs.size());
    ad::Var total = outs[0];
    for (std::size_t i = 1; i < outs.size(); ++i) total = total + outs[i];
    ad::Var centre = ad::scale(total, 1.0 / m);
    ad::Var acc;
    for (const ad::Var& o : outs) {
        ad::Var s = ad::sum(ad::square(o - centre));
        acc = acc.valid() ? acc + s : s;
    }
    return ad::scale(acc, 1.0 / m);
}

}  // namespace

ad::Var disagreement(ad::Graph& graph, const Committee& committee, ad::Var x, ad::Var g,
                     const DisagreementWeights& weights, const dsp::MelConfig& mel) {
    if (committee.size() < 2)
        throw std::invalid_argument("disagreement: need at least 2 committee members, got " +
                                    std::to_string(committee.size()));
    weights.validate();
    const double m = static_cast<double>(committee.size());
    std::vector<ad::Var> outs;
    for (const auto& member : committee) outs.push_back(member(graph, x, g));

    ad::Var d;
    if (weights.waveform > 0.0) d = ad::scale(variance_trace(outs), weights.waveform / m);
    if (weights.mel > 0.0) {
        std::vector<ad::Var> mels;
        for (const ad::Var& o : outs) mels.push_back(dsp::mel_spectrogram(o, mel));
        double w = weights.mel / m;
        if (weights.normalize_mel) w /= static_cast<double>(mels.front().size());
        ad::Var term = ad::scale(variance_trace(mels), w);
        d = d.valid() ? d + term : term;
    }
    return d;
}

double disagreement_value(const Committee& committee, const std::vector<double>& x, const std::vector<double>& g,
                          const DisagreementWeights& weights, const dsp::MelConfig& mel) {
    ad::Graph graph;
    return disagreement(graph, committee, graph.constant(ad::Array::vector(x)), graph.constant(ad::Array::vector(g)),
                        weights, mel)
        .item();
}

AscentResult maximize_disagreement(const Committee& committee, const std::vector<double>& x, const nn::KnobVector& g0,
                                   const AcquireConfig& cfg) {
    const std::size_t k = g0.size();
    std::vector<double> g(k);
    for (std::size_t i = 0; i < k; ++i) g[i] = std::clamp(g0.values[i], 0.0, 1.0);
    std::vector<double> m(k, 0.0), v(k, 0.0);

    AscentResult res;
    res.g_star = g0;
    res.g_star.values = g;
    res.d_star = -std::numeric_limits<double>::infinity();

    for (int it = 0;; ++it) {
        ad::Graph graph;
        ad::Var gv = graph.leaf(ad::Array::vector(g), true);
        ad::Var d = disagreement(graph, committee, graph.constant(ad::Array::vector(x)), gv, cfg.weights, cfg.mel);
        const double dv = d.item();
        if (!std::isfinite(dv)) {
            res.aborted = true;
            res.diagnostic = "non-finite disagreement at iteration " + std::to_string(it);
            break;
        }
        graph.backward(d);
        const std::vector<double> grad = gv.grad();
        if (!std::all_of(grad.begin(), grad.end(), [](double x) { return std::isfinite(x); })) {
            res.aborted = true;
            res.diagnostic = "non-finite gradient at iteration " + std::to_string(it);
            break;
        }
        res.trajectory.push_back(g);
        res.trajectory_d.push_back(dv);
        if (dv > res.d_star) {
            res.d_star = dv;
            res.g_star.values = g;
        }
        if (it == cfg.steps) break;

        const double c1 = 1.0 - std::pow(cfg.adam_beta1, it + 1);
        const double c2 = 1.0 - std::pow(cfg.adam_beta2, it + 1);
        std::vector<double> next(k);
        for (std::size_t i = 0; i < k; ++i) {
            m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * grad[i];
            v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * grad[i] * grad[i];
            // Ascent step, then projection onto the box.
            next[i] = std::clamp(g[i] + cfg.step_size * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.adam_eps), 0.0, 1.0);
        }
        // A projected step that does not move is a fixed point.
        if (next == g) break;
        res.iterations = it + 1;
        g = std::move(next);
    }
    if (res.trajectory.empty()) res.d_star = std::numeric_limits<double>::quiet_NaN();
    return res;
}

std::vector<std::size_t> leader_cluster(const std::vector<Candidate>& candidates, double threshold) {
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return candidates[a].score > candidates[b].score; });
    std::vector<std::size_t> accepted;
    for (std::size_t idx : order) {
        const auto& g = candidates[idx].g.values;
        bool far = true;
        for (std::size_t a : accepted) {
            const auto& h = candidates[a].g.values;
            double d2 = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) d2 += (g[i] - h[i]) * (g[i] - h[i]);
            if (std::sqrt(d2) < threshold) {
                far = false;
                break;
            }
        }
        if (far) accepted.push_back(idx);
    }
    return accepted;
}

std::vector<nn::KnobVector> dedupe_optima(const std::vector<Candidate>& candidates, double threshold) {
    std::vector<nn::KnobVector> out;
    for (std::size_t idx : leader_cluster(candidates, threshold)) out.push_back(candidates[idx].g);
    return out;
}

std::vector<double> excerpt(const std::vector<double>& x, const AcquireConfig& cfg) {
    if (x.empty()) throw std::invalid_argument("acquisition: empty input signal");
    std::size_t len = std::min(cfg.excerpt_length, x.size());
    std::size_t start = std::min(cfg.excerpt_start, x.size() - len);
    return {x.begin() + static_cast<std::ptrdiff_t>(start), x.begin() + static_cast<std::ptrdiff_t>(start + len)};
}

ProposalBatch propose_batch(const Committee& committee, const std::vector<double>& x, const AcquireConfig& cfg,
                            const std::vector<std::string>& knob_labels) {
    cfg.validate();
    const std::vector<double> xs = excerpt(x, cfg);
    const std::size_t k = knob_labels.size();
    ProposalBatch batch;

    auto run_batch = [&](int first_id) {
        std::vector<RestartRecord> recs(static_cast<std::size_t>(cfg.restarts));
        parallel_for(recs.size(), cfg.threads, [&](std::size_t r) {
            RestartRecord& rec = recs[r];
            rec.id = first_id + static_cast<int>(r);
            std::mt19937_64 rng(derive_seed(cfg.seed, {static_cast<std::uint64_t>(rec.id)}));
            std::uniform_real_distribution<double> u(0.0, 1.0);
            rec.g0.resize(k);
            for (double& v : rec.g0) v = u(rng);
            nn::KnobVector start;
            start.values = rec.g0;
            start.labels = knob_labels;
            rec.result = maximize_disagreement(committee, xs, start, cfg);
        });
        batch.restarts.insert(batch.restarts.end(), recs.begin(), recs.end());
    };

    std::vector<std::size_t> accepted;  // indices into batch.restarts
    auto cluster = [&] {
        std::vector<Candidate> cands;
        std::vector<std::size_t> origin;
        for (std::size_t i = 0; i < batch.restarts.size(); ++i) {
            if (batch.restarts[i].result.aborted) continue;
            cands.push_back({batch.restarts[i].result.g_star, batch.restarts[i].result.d_star});
            origin.push_back(i);
        }
        accepted.clear();
        for (std::size_t c : leader_cluster(cands, cfg.dedupe_threshold)) accepted.push_back(origin[c]);
    };

    run_batch(0);
    cluster();
    for (int extra = 0; cfg.max_per_round && extra < cfg.fill_batches &&
                        accepted.size() < static_cast<std::size_t>(*cfg.max_per_round);
         ++extra) {
        run_batch(static_cast<int>(batch.restarts.size()));
        cluster();
    }
    if (std::all_of(batch.restarts.begin(), batch.restarts.end(), [](const auto& r) { return r.result.aborted; }))
        throw std::runtime_error("acquisition failed: all " + std::to_string(batch.restarts.size()) +
                                 " restarts aborted (" + batch.restarts.front().result.diagnostic + ")");
    if (cfg.max_per_round && accepted.size() > static_cast<std::size_t>(*cfg.max_per_round))
        accepted.resize(static_cast<std::size_t>(*cfg.max_per_round));

    for (std::size_t i : accepted) {
        batch.restarts[i].accepted = true;
        batch.proposals.push_back(batch.restarts[i].result.g_star);
        batch.scores.push_back(batch.restarts[i].result.d_star);
    }
    return batch;
}

void ProposalBatch::write_csv(const std::filesystem::path& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f.precision(17);
    f << "restart,iterations,d_star";
    const std::size_t k = restarts.empty() ? 0 : restarts.front().g0.size();
    for (std::size_t i = 0; i < k; ++i) {
        const auto& labels = restarts.front().result.g_star.labels;
        f << ",g_" << (i < labels.size() ? labels[i] : std::to_string(i));
    }
    f << ",accepted,aborted\n";
    for (const auto& r : restarts) {
        f << r.id << ',' << r.result.iterations << ',' << r.result.d_star;
        for (double v : r.result.g_star.values) f << ',' << v;
        f << ',' << (r.accepted ? 1 : 0) << ',' << (r.result.aborted ? 1 : 0) << '\n';
    }
}

void to_json(nlohmann::json& j, const AcquireConfig& c) {
    j = {{"restarts", c.restarts},
         {"steps", c.steps},
         {"step_size", c.step_size},
         {"adam_beta1", c.adam_beta1},
         {"adam_beta2", c.adam_beta2},
         {"adam_eps", c.adam_eps},
         {"excerpt_start", c.excerpt_start},
         {"excerpt_length", c.excerpt_length},
         {"dedupe_threshold", c.dedupe_threshold},
         {"max_per_round", c.max_per_round ? nlohmann::json(*c.max_per_round) : nlohmann::json(nullptr)},
         {"fill_batches", c.fill_batches},
         {"seed", c.seed},
         {"threads", c.threads},
         {"weights",
          {{"waveform", c.weights.waveform}, {"mel", c.weights.mel}, {"normalize_mel", c.weights.normalize_mel}}},
         {"mel", c.mel}};
}

void from_json(const nlohmann::json& j, AcquireConfig& c) {
    c = AcquireConfig{};
    c.restarts = j.value("restarts", c.restarts);
    c.steps = j.value("steps", c.steps);
    c.step_size = j.value("step_size", c.step_size);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.excerpt_start = j.value("excerpt_start", c.excerpt_start);
    c.excerpt_length = j.value("excerpt_length", c.excerpt_length);
    c.dedupe_threshold = j.value("dedupe_threshold", c.dedupe_threshold);
    if (j.contains("max_per_round") && !j["max_per_round"].is_null()) c.max_per_round = j["max_per_round"].get<int>();
    c.fill_batches = j.value("fill_batches", c.fill_batches);
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
    if (j.contains("weights")) {
        c.weights.waveform = j["weights"].value("waveform", c.weights.waveform);
        c.weights.mel = j["weights"].value("mel", c.weights.mel);
        c.weights.normalize_mel = j["weights"].value("normalize_mel", c.weights.normalize_mel);
    }
    if (j.contains("mel")) c.mel = j.at("mel").get<dsp::MelConfig>();
}

}  // namespace panama::al
