#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "panama/autodiff.hpp"

namespace panama::nn {

/// Gain, Bass, Mid, Treble, Master, Presence.
const std::vector<std::string>& default_knob_labels();

/// Amp settings in [0, 1]^k with one label per knob.
struct KnobVector {
    std::vector<double> values;
    std::vector<std::string> labels;

    /// Labels taken from default_knob_labels(), falling back to "knob<i>".
    static KnobVector with_default_labels(std::vector<double> values);

    std::size_t size() const { return values.size(); }
    void validate() const;
    bool operator==(const KnobVector&) const = default;
};

enum class Architecture { WaveNet, Lstm };

std::string to_string(Architecture arch);
Architecture architecture_from_string(const std::string& name);

struct WaveNetSpec {
    int channels = 8;
    int kernel_size = 3;
    std::vector<int> dilations = {1, 2, 4, 8, 16, 32, 64, 128, 256};
    int skip_channels = 8;

    int receptive_field() const;
    void validate() const;
};

struct LstmSpec {
    int hidden_size = 32;
    int num_layers = 1;

    void validate() const;
};

struct ModelSpec {
    Architecture arch = Architecture::WaveNet;
    int num_knobs = 6;
    WaveNetSpec wavenet;
    LstmSpec lstm;

    /// Samples of history an output depends on (1 for a recurrent model, whose
    /// memory is unbounded but has no fixed warmup).
    int receptive_field() const;
    void validate() const;
};

struct ModelParams {
    std::map<std::string, ad::Array> tensors;

    const ad::Array& at(const std::string& name) const;
    ad::Array& at(const std::string& name);
    std::size_t parameter_count() const;
    bool operator==(const ModelParams&) const;
};

struct Model {
    ModelSpec spec;
    ModelParams params;
};

/// Euclidean distance between two parameter sets of identical layout.
double parameter_distance(const ModelParams& a, const ModelParams& b);

/// Normal(0, 1/fan_in) weights, zero biases. Deterministic in the seed.
ModelParams init_params(const ModelSpec& spec, std::uint64_t seed);

using BoundParams = std::map<std::string, ad::Var>;

/// Places parameters on a graph, either as trainable leaves or frozen constants.
BoundParams bind_params(ad::Graph& graph, const ModelParams& params, bool trainable);

/// Gated dilated-convolution stack conditioned locally on x and globally on g.
/// x: [T], g: [k]. Returns [T].
ad::Var wavenet_forward(const ModelSpec& spec, const BoundParams& params, ad::Var x, ad::Var g);

/// LSTM over cat(x_t, g) with a linear head. x: [T], g: [k]. Returns [T].
ad::Var lstm_forward(const ModelSpec& spec, const BoundParams& params, ad::Var x, ad::Var g);

ad::Var forward(const ModelSpec& spec, const BoundParams& params, ad::Var x, ad::Var g);

/// Inference without gradients. WaveNet runs in overlapping chunks so long
/// signals do not materialize the whole activation graph.
std::vector<double> predict(const Model& model, std::span<const double> x, const KnobVector& g,
                            std::size_t chunk = 16384);

void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

void to_json(nlohmann::json& j, const WaveNetSpec& s);
void from_json(const nlohmann::json& j, WaveNetSpec& s);
void to_json(nlohmann::json& j, const LstmSpec& s);
void from_json(const nlohmann::json& j, LstmSpec& s);
void to_json(nlohmann::json& j, const ModelSpec& s);
void from_json(const nlohmann::json& j, ModelSpec& s);
void to_json(nlohmann::json& j, const KnobVector& k);
void from_json(const nlohmann::json& j, KnobVector& k);

}  // namespace panama::nn
