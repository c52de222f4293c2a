#include "panama/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include "panama/parallel.hpp"

namespace panama::train {

std::size_t TrainConfig::warmup_for(const nn::ModelSpec& spec) const {
    return spec.arch == nn::Architecture::WaveNet ? static_cast<std::size_t>(spec.receptive_field() - 1)
                                                  : lstm_warmup;
}

void TrainConfig::validate(const nn::ModelSpec& spec) const {
    if (!(learning_rate > 0.0 && adam_beta1 > 0.0 && adam_beta2 > 0.0 && adam_eps > 0.0))
        throw std::invalid_argument("TrainConfig: learning rate and Adam constants must be positive");
    if (adam_beta1 >= 1.0 || adam_beta2 >= 1.0) throw std::invalid_argument("TrainConfig: Adam betas must be < 1");
    if (epochs < 1 || batch_size < 1) throw std::invalid_argument("TrainConfig: epochs and batch_size must be >= 1");
    if (loss_weights.mse < 0.0 || loss_weights.mel < 0.0 || (loss_weights.mse == 0.0 && loss_weights.mel == 0.0))
        throw std::invalid_argument("TrainConfig: loss weights must be non-negative and not both zero");
    if (segment_length <= static_cast<std::size_t>(spec.receptive_field()) || segment_length <= warmup_for(spec))
        throw std::invalid_argument("TrainConfig: segment_length " + std::to_string(segment_length) +
                                    " must exceed the warmup of " + std::to_string(warmup_for(spec)) + " samples");
    if (loss_weights.mel > 0.0) {
        if (mel_scales.empty()) throw std::invalid_argument("TrainConfig: mel loss weight set but no mel scales");
        for (const auto& m : mel_scales) {
            m.validate();
            if (segment_length - warmup_for(spec) < static_cast<std::size_t>(m.n_fft))
                throw std::invalid_argument("TrainConfig: loss region of " +
                                            std::to_string(segment_length - warmup_for(spec)) +
                                            " samples is shorter than mel n_fft " + std::to_string(m.n_fft));
        }
    }
}

void TrainReport::write_csv(const std::filesystem::path& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << "epoch,loss,seconds\n";
    f.precision(17);
    for (std::size_t e = 0; e < epoch_loss.size(); ++e)
        f << e << ',' << epoch_loss[e] << ',' << (e < epoch_seconds.size() ? epoch_seconds[e] : 0.0) << '\n';
}

ad::Var combined_loss(ad::Var pred, ad::Var target, const LossWeights& weights,
                      const std::vector<dsp::MelConfig>& scales) {
    if (pred.size() != target.size())
        throw std::invalid_argument("combined_loss: length mismatch " + std::to_string(pred.size()) + " vs " +
                                    std::to_string(target.size()));
    ad::Var total;
    if (weights.mse != 0.0) total = ad::scale(ad::mean(ad::square(pred - target)), weights.mse);
    if (weights.mel != 0.0) {
        ad::Var mel = ad::scale(dsp::multiscale_mel_loss(pred, target, scales), weights.mel);
        total = total.valid() ? total + mel : mel;
    }
    if (!total.valid()) throw std::invalid_argument("combined_loss: both weights are zero");
    return total;
}

namespace {

std::size_t monitor_window(const TrainConfig& cfg, std::size_t length) {
    const std::size_t want = cfg.monitor_length ? cfg.monitor_length : cfg.segment_length;
    return std::min(want, length);
}

ad::Var segment_constant(ad::Graph& g, const std::vector<double>& src, std::size_t begin, std::size_t length) {
    return g.constant(ad::Array::vector(std::vector<double>(src.begin() + static_cast<std::ptrdiff_t>(begin),
                                                            src.begin() + static_cast<std::ptrdiff_t>(begin + length))));
}

void check_dataset(std::span<const Example> data) {
    if (data.empty()) throw std::invalid_argument("train_model: empty dataset");
    for (const Example& ex : data) {
        if (!ex.x || !ex.y) throw std::invalid_argument("train_model: example without signal");
        if (ex.x->size() != ex.y->size()) throw std::invalid_argument("train_model: x and y lengths differ");
    }
}

}  // namespace

double monitor_loss(const nn::Model& model, std::span<const Example> data, const TrainConfig& cfg) {
    check_dataset(data);
    double total = 0.0;
    for (const Example& ex : data) {
        const std::size_t len = monitor_window(cfg, ex.x->size());
        ad::Graph g;
        nn::BoundParams p = nn::bind_params(g, model.params, false);
        ad::Var pred = nn::forward(model.spec, p, segment_constant(g, *ex.x, 0, len), g.constant(ad::Array::vector(ex.g.values)));
        total += combined_loss(pred, segment_constant(g, *ex.y, 0, len), cfg.loss_weights, cfg.mel_scales).item();
    }
    return total / static_cast<double>(data.size());
}

Adam::Adam(const nn::ModelParams& like, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& [name, t] : like.tensors) {
        m_[name].assign(t.size(), 0.0);
        v_[name].assign(t.size(), 0.0);
    }
}

void Adam::step(nn::ModelParams& params, const nn::BoundParams& bound) {
    ++steps_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
    for (auto& [name, t] : params.tensors) {
        const auto& grad = bound.at(name).grad();
        auto& m = m_.at(name);
        auto& v = v_.at(name);
        for (std::size_t i = 0; i < t.size(); ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * grad[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * grad[i] * grad[i];
            t.data[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
        }
    }
}

TrainResult train_model(const nn::ModelSpec& spec, std::span<const Example> data, const TrainConfig& cfg) {
    check_dataset(data);
    spec.validate();
    cfg.validate(spec);
    const auto t_start = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count(); };

    nn::Model model{spec, nn::init_params(spec, cfg.seed)};
    Adam adam(model.params, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    std::mt19937_64 rng(cfg.seed * 0x9E3779B97F4A7C15ULL + 0x5851F42D4C957F2DULL);

    TrainResult result;
    TrainReport& report = result.report;
    report.epoch_loss.push_back(monitor_loss(model, data, cfg));
    report.epoch_seconds.push_back(elapsed());
    result.params = model.params;

    const std::size_t warm = cfg.warmup_for(spec);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t b_end = std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size));
            ad::Graph g;
            nn::BoundParams p = nn::bind_params(g, model.params, true);
            ad::Var total;
            for (std::size_t idx = b; idx < b_end; ++idx) {
                const Example& ex = data[order[idx]];
                const std::size_t len = std::min(cfg.segment_length, ex.x->size());
                if (len <= warm) throw std::invalid_argument("train_model: signal shorter than the model warmup");
                std::uniform_int_distribution<std::size_t> pick(0, ex.x->size() - len);
                const std::size_t start = pick(rng);
                ad::Var pred = nn::forward(spec, p, segment_constant(g, *ex.x, start, len),
                                           g.constant(ad::Array::vector(ex.g.values)));
                ad::Var target = segment_constant(g, *ex.y, start + warm, len - warm);
                ad::Var loss = combined_loss(ad::slice(pred, warm, len - warm), target, cfg.loss_weights, cfg.mel_scales);
                total = total.valid() ? total + loss : loss;
                report.samples_processed += len;
            }
            ad::Var batch_loss = ad::scale(total, 1.0 / static_cast<double>(b_end - b));
            g.backward(batch_loss);
            adam.step(model.params, p);
        }
        const double loss = monitor_loss(model, data, cfg);
        report.epoch_loss.push_back(loss);
        report.epoch_seconds.push_back(elapsed());
        if (loss < report.epoch_loss[report.best_epoch]) {
            report.best_epoch = static_cast<std::size_t>(epoch);
            result.params = model.params;
        }
    }
    report.seconds = elapsed();
    return result;
}

EnsembleResult train_ensemble(const nn::ModelSpec& spec, int members, std::span<const Example> data,
                              const TrainConfig& cfg, int threads) {
    if (members < 2) throw std::invalid_argument("train_ensemble: need at least 2 members, got " + std::to_string(members));
    check_dataset(data);
    const auto t_start = std::chrono::steady_clock::now();
    std::vector<TrainResult> results(static_cast<std::size_t>(members));
    parallel_for(results.size(), threads, [&](std::size_t i) {
        TrainConfig member_cfg = cfg;
        member_cfg.seed = cfg.seed + i;
        results[i] = train_model(spec, data, member_cfg);
    });
    EnsembleResult out;
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    for (auto& r : results) {
        out.samples_processed += r.report.samples_processed;
        out.members.push_back(std::move(r.params));
        out.reports.push_back(std::move(r.report));
    }
    return out;
}

// ---------------------------------------------------------------------------

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = {{"learning_rate", c.learning_rate},
         {"adam_beta1", c.adam_beta1},
         {"adam_beta2", c.adam_beta2},
         {"adam_eps", c.adam_eps},
         {"epochs", c.epochs},
         {"segment_length", c.segment_length},
         {"batch_size", c.batch_size},
         {"loss_weights", {{"mse", c.loss_weights.mse}, {"mel", c.loss_weights.mel}}},
         {"seed", c.seed},
         {"lstm_warmup", c.lstm_warmup},
         {"monitor_length", c.monitor_length},
         {"mel_scales", c.mel_scales}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    c = TrainConfig{};
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.epochs = j.value("epochs", c.epochs);
    c.segment_length = j.value("segment_length", c.segment_length);
    c.batch_size = j.value("batch_size", c.batch_size);
    if (j.contains("loss_weights")) {
        c.loss_weights.mse = j["loss_weights"].value("mse", c.loss_weights.mse);
        c.loss_weights.mel = j["loss_weights"].value("mel", c.loss_weights.mel);
    }
    c.seed = j.value("seed", c.seed);
    c.lstm_warmup = j.value("lstm_warmup", c.lstm_warmup);
    c.monitor_length = j.value("monitor_length", c.monitor_length);
    if (j.contains("mel_scales")) c.mel_scales = j.at("mel_scales").get<std::vector<dsp::MelConfig>>();
}

}  // namespace panama::train
