#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "panama/audio.hpp"
#include "panama/autodiff.hpp"
#include "panama/models.hpp"

namespace panama::train {

struct LossWeights {
    double mse = 1.0;
    double mel = 0.1;
};

struct TrainConfig {
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int epochs = 300;
    std::size_t segment_length = 8192;
    int batch_size = 8;
    LossWeights loss_weights;
    std::uint64_t seed = 0;
    /// Leading samples of each LSTM segment excluded from the loss while the
    /// zero initial state washes out. WaveNet segments drop receptive_field - 1.
    std::size_t lstm_warmup = 512;
    /// Length of the fixed window, starting at sample 0, on which the per-epoch
    /// loss is measured. 0 means segment_length.
    std::size_t monitor_length = 0;
    std::vector<dsp::MelConfig> mel_scales = dsp::multiscale_configs(16000);

    std::size_t warmup_for(const nn::ModelSpec& spec) const;
    void validate(const nn::ModelSpec& spec) const;
};

/// One labeled datapoint ((x, g), y). Signals are shared, since every entry of
/// a dataset reuses the same x.
struct Example {
    std::shared_ptr<const std::vector<double>> x;
    nn::KnobVector g;
    std::shared_ptr<const std::vector<double>> y;
};

struct TrainReport {
    /// epoch_loss[0] is the untrained model; epoch_loss[e] follows epoch e.
    std::vector<double> epoch_loss;
    /// Wall-clock seconds elapsed at the end of each entry of epoch_loss.
    std::vector<double> epoch_seconds;
    double seconds = 0.0;
    std::size_t samples_processed = 0;
    std::size_t best_epoch = 0;

    double throughput() const { return seconds > 0.0 ? static_cast<double>(samples_processed) / seconds : 0.0; }
    void write_csv(const std::filesystem::path& path) const;
};

struct TrainResult {
    nn::ModelParams params;
    TrainReport report;
};

struct EnsembleResult {
    std::vector<nn::ModelParams> members;
    std::vector<TrainReport> reports;
    double seconds = 0.0;
    std::size_t samples_processed = 0;

    double throughput() const { return seconds > 0.0 ? static_cast<double>(samples_processed) / seconds : 0.0; }
};

/// w_mse * MSE + w_mel * multiscale mel loss. Terms with zero weight are skipped.
ad::Var combined_loss(ad::Var pred, ad::Var target, const LossWeights& weights,
                      const std::vector<dsp::MelConfig>& scales);

/// Mean combined loss over the monitor window of every example. This is the
/// quantity reported per epoch.
double monitor_loss(const nn::Model& model, std::span<const Example> data, const TrainConfig& cfg);

/// Adam over every tensor of a parameter set.
class Adam {
public:
    Adam(const nn::ModelParams& like, double lr, double beta1, double beta2, double eps);
    void step(nn::ModelParams& params, const nn::BoundParams& bound);

private:
    double lr_, beta1_, beta2_, eps_;
    long steps_ = 0;
    std::map<std::string, std::vector<double>> m_, v_;
};

/// Trains one model from init_params(spec, cfg.seed) and returns the
/// parameters of the epoch with the lowest monitored loss.
TrainResult train_model(const nn::ModelSpec& spec, std::span<const Example> data, const TrainConfig& cfg);

/// Member i trains with seed cfg.seed + i. Members run on up to `threads`
/// workers (0 = hardware concurrency).
EnsembleResult train_ensemble(const nn::ModelSpec& spec, int members, std::span<const Example> data,
                              const TrainConfig& cfg, int threads = 0);

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

}  // namespace panama::train
