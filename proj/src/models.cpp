#include "panama/models.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <set>
#include <stdexcept>

namespace panama::nn {

const std::vector<std::string>& default_knob_labels() {
    static const std::vector<std::string> labels = {"Gain", "Bass", "Mid", "Treble", "Master", "Presence"};
    return labels;
}

KnobVector KnobVector::with_default_labels(std::vector<double> values) {
    KnobVector k;
    const auto& defaults = default_knob_labels();
    for (std::size_t i = 0; i < values.size(); ++i)
        k.labels.push_back(i < defaults.size() ? defaults[i] : "knob" + std::to_string(i));
    k.values = std::move(values);
    return k;
}

void KnobVector::validate() const {
    if (values.empty()) throw std::invalid_argument("knob vector must have at least one knob");
    if (labels.size() != values.size())
        throw std::invalid_argument("knob vector has " + std::to_string(values.size()) + " values but " +
                                    std::to_string(labels.size()) + " labels");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!(values[i] >= 0.0 && values[i] <= 1.0))
            throw std::invalid_argument("knob " + labels[i] + " = " + std::to_string(values[i]) +
                                        " outside [0, 1]");
    }
    std::set<std::string> unique(labels.begin(), labels.end());
    if (unique.size() != labels.size()) throw std::invalid_argument("knob labels must be unique");
}

std::string to_string(Architecture arch) { return arch == Architecture::WaveNet ? "wavenet" : "lstm"; }

Architecture architecture_from_string(const std::string& name) {
    if (name == "wavenet") return Architecture::WaveNet;
    if (name == "lstm") return Architecture::Lstm;
    throw std::invalid_argument("unknown architecture '" + name + "' (expected wavenet or lstm)");
}

int WaveNetSpec::receptive_field() const {
    int rf = 1;
    for (int d : dilations) rf += d * (kernel_size - 1);
    return rf;
}

void WaveNetSpec::validate() const {
    if (channels < 1 || skip_channels < 1 || kernel_size < 1)
        throw std::invalid_argument("WaveNetSpec: channels, skip_channels and kernel_size must be >= 1");
    if (dilations.empty()) throw std::invalid_argument("WaveNetSpec: need at least one layer");
    for (int d : dilations)
        if (d < 1) throw std::invalid_argument("WaveNetSpec: dilations must be >= 1");
}

void LstmSpec::validate() const {
    if (hidden_size < 1 || num_layers < 1) throw std::invalid_argument("LstmSpec: hidden_size and num_layers must be >= 1");
}

int ModelSpec::receptive_field() const { return arch == Architecture::WaveNet ? wavenet.receptive_field() : 1; }

void ModelSpec::validate() const {
    if (num_knobs < 1) throw std::invalid_argument("ModelSpec: num_knobs must be >= 1");
    if (arch == Architecture::WaveNet) wavenet.validate();
    else lstm.validate();
}

const ad::Array& ModelParams::at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw std::out_of_range("missing model parameter '" + name + "'");
    return it->second;
}

ad::Array& ModelParams::at(const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw std::out_of_range("missing model parameter '" + name + "'");
    return it->second;
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : tensors) n += t.size();
    return n;
}

bool ModelParams::operator==(const ModelParams& other) const {
    if (tensors.size() != other.tensors.size()) return false;
    for (const auto& [name, t] : tensors) {
        auto it = other.tensors.find(name);
        if (it == other.tensors.end() || it->second.shape != t.shape || it->second.data != t.data) return false;
    }
    return true;
}

double parameter_distance(const ModelParams& a, const ModelParams& b) {
    double s = 0.0;
    for (const auto& [name, t] : a.tensors) {
        const ad::Array& u = b.at(name);
        if (u.shape != t.shape) throw std::invalid_argument("parameter_distance: layout mismatch at " + name);
        for (std::size_t i = 0; i < t.size(); ++i) s += (t.data[i] - u.data[i]) * (t.data[i] - u.data[i]);
    }
    return std::sqrt(s);
}

// ---------------------------------------------------------------------------

namespace {

struct ParamDecl {
    std::string name;
    ad::Shape shape;
    std::size_t fan_in;  // 0 marks a bias (zero init)
};

std::vector<ParamDecl> declare(const ModelSpec& spec) {
    const std::size_t k = static_cast<std::size_t>(spec.num_knobs);
    std::vector<ParamDecl> out;
    if (spec.arch == Architecture::WaveNet) {
        const auto& w = spec.wavenet;
        const std::size_t c = w.channels, s = w.skip_channels, taps = w.kernel_size;
        out.push_back({"input", {c, 1}, 1});
        for (std::size_t l = 0; l < w.dilations.size(); ++l) {
            const std::string p = "layer" + std::to_string(l) + ".";
            out.push_back({p + "w_filter", {c, c, taps}, c * taps});
            out.push_back({p + "w_gate", {c, c, taps}, c * taps});
            out.push_back({p + "v_filter", {c, 1}, 1});
            out.push_back({p + "v_gate", {c, 1}, 1});
            out.push_back({p + "cond_filter", {c, k}, k});
            out.push_back({p + "cond_gate", {c, k}, k});
            out.push_back({p + "residual", {c, c}, c});
            out.push_back({p + "skip", {s, c}, c});
        }
        out.push_back({"head", {1, s}, s});
    } else {
        const std::size_t h = spec.lstm.hidden_size;
        for (int l = 0; l < spec.lstm.num_layers; ++l) {
            const std::string p = "lstm" + std::to_string(l) + ".";
            if (l == 0) {
                out.push_back({p + "w_x", {4 * h, 1}, 1 + k});
                out.push_back({p + "w_knobs", {4 * h, k}, 1 + k});
            } else {
                out.push_back({p + "w_ih", {4 * h, h}, h});
            }
            out.push_back({p + "w_hh", {4 * h, h}, h});
            out.push_back({p + "bias", {4 * h}, 0});
        }
        out.push_back({"head.w", {1, h}, h});
        out.push_back({"head.b", {1}, 0});
    }
    return out;
}

}  // namespace

ModelParams init_params(const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::mt19937_64 rng(seed);
    ModelParams params;
    for (const ParamDecl& d : declare(spec)) {
        ad::Array a(d.shape);
        if (d.fan_in > 0) {
            std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(d.fan_in)));
            for (double& v : a.data) v = dist(rng);
        }
        params.tensors.emplace(d.name, std::move(a));
    }
    return params;
}

BoundParams bind_params(ad::Graph& graph, const ModelParams& params, bool trainable) {
    BoundParams out;
    for (const auto& [name, t] : params.tensors) out.emplace(name, graph.leaf(t, trainable));
    return out;
}

namespace {

ad::Var param(const BoundParams& p, const std::string& name) {
    auto it = p.find(name);
    if (it == p.end()) throw std::out_of_range("missing model parameter '" + name + "'");
    return it->second;
}

void check_inputs(const ModelSpec& spec, ad::Var x, ad::Var g) {
    if (x.value().rank() != 1) throw std::invalid_argument("model input must be a 1-D signal");
    if (g.size() != static_cast<std::size_t>(spec.num_knobs))
        throw std::invalid_argument("knob vector has k=" + std::to_string(g.size()) + " but the model expects k=" +
                                    std::to_string(spec.num_knobs));
}

}  // namespace

ad::Var wavenet_forward(const ModelSpec& spec, const BoundParams& p, ad::Var x, ad::Var g) {
    check_inputs(spec, x, g);
    const std::size_t steps = x.size();
    const std::size_t k = g.size();
    ad::Var x_row = ad::reshape(x, {1, steps});
    ad::Var g_col = ad::reshape(g, {k, 1});
    const std::size_t c = spec.wavenet.channels;

    ad::Var h = ad::matmul(param(p, "input"), x_row);
    ad::Var skips;
    for (std::size_t l = 0; l < spec.wavenet.dilations.size(); ++l) {
        const std::string pre = "layer" + std::to_string(l) + ".";
        const std::size_t dil = static_cast<std::size_t>(spec.wavenet.dilations[l]);
        // V'^T g is a per-channel offset broadcast over time.
        ad::Var cond_f = ad::reshape(ad::matmul(param(p, pre + "cond_filter"), g_col), {c});
        ad::Var cond_g = ad::reshape(ad::matmul(param(p, pre + "cond_gate"), g_col), {c});
        ad::Var filt = ad::conv1d_dilated(h, param(p, pre + "w_filter"), dil) +
                       ad::matmul(param(p, pre + "v_filter"), x_row);
        ad::Var gate = ad::conv1d_dilated(h, param(p, pre + "w_gate"), dil) +
                       ad::matmul(param(p, pre + "v_gate"), x_row);
        ad::Var z = ad::tanh(ad::add_time_broadcast(filt, cond_f)) * ad::sigmoid(ad::add_time_broadcast(gate, cond_g));
        h = h + ad::matmul(param(p, pre + "residual"), z);
        ad::Var s = ad::matmul(param(p, pre + "skip"), z);
        skips = skips.valid() ? skips + s : s;
    }
    return ad::reshape(ad::matmul(param(p, "head"), skips), {steps});
}

ad::Var lstm_forward(const ModelSpec& spec, const BoundParams& p, ad::Var x, ad::Var g) {
    check_inputs(spec, x, g);
    const std::size_t steps = x.size();
    const std::size_t k = g.size();
    const std::size_t h4 = 4 * static_cast<std::size_t>(spec.lstm.hidden_size);

    // The knob half of cat(x_t, g) is constant in time, so its input
    // projection folds into the gate bias.
    ad::Var knob_bias = ad::reshape(ad::matmul(param(p, "lstm0.w_knobs"), ad::reshape(g, {k, 1})), {h4});
    ad::Var hidden = ad::lstm_layer(ad::reshape(x, {1, steps}), param(p, "lstm0.w_x"), param(p, "lstm0.w_hh"),
                                    param(p, "lstm0.bias") + knob_bias);
    for (int l = 1; l < spec.lstm.num_layers; ++l) {
        const std::string pre = "lstm" + std::to_string(l) + ".";
        hidden = ad::lstm_layer(hidden, param(p, pre + "w_ih"), param(p, pre + "w_hh"), param(p, pre + "bias"));
    }
    ad::Var y = ad::add_time_broadcast(ad::matmul(param(p, "head.w"), hidden), param(p, "head.b"));
    return ad::reshape(y, {steps});
}

ad::Var forward(const ModelSpec& spec, const BoundParams& params, ad::Var x, ad::Var g) {
    return spec.arch == Architecture::WaveNet ? wavenet_forward(spec, params, x, g)
                                              : lstm_forward(spec, params, x, g);
}

std::vector<double> predict(const Model& model, std::span<const double> x, const KnobVector& g, std::size_t chunk) {
    if (x.empty()) return {};
    auto run = [&](std::span<const double> input) {
        ad::Graph graph;
        BoundParams p = bind_params(graph, model.params, false);
        ad::Var xv = graph.constant(ad::Array::vector(std::vector<double>(input.begin(), input.end())));
        ad::Var gv = graph.constant(ad::Array::vector(g.values));
        return forward(model.spec, p, xv, gv).value().data;
    };
    if (model.spec.arch == Architecture::Lstm || x.size() <= chunk) return run(x);

    // Each chunk is preceded by receptive_field - 1 samples of history, which
    // makes the stitched result identical to a single full-length pass.
    const std::size_t history = static_cast<std::size_t>(model.spec.receptive_field() - 1);
    std::vector<double> out;
    out.reserve(x.size());
    for (std::size_t start = 0; start < x.size(); start += chunk) {
        const std::size_t end = std::min(x.size(), start + chunk);
        const std::size_t from = start >= history ? start - history : 0;
        std::vector<double> y = run(x.subspan(from, end - from));
        out.insert(out.end(), y.begin() + static_cast<std::ptrdiff_t>(start - from), y.end());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Model file: "PANAMAMD", u32 version, u32 header length, JSON header,
// little-endian float32 payload in header order.

namespace {

constexpr char kMagic[8] = {'P', 'A', 'N', 'A', 'M', 'A', 'M', 'D'};
constexpr std::uint32_t kVersion = 1;

void put32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get32(const std::string& in, std::size_t pos) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    return v;
}

}  // namespace

void save_model(const Model& model, const std::filesystem::path& path) {
    nlohmann::json header;
    header["spec"] = model.spec;
    header["tensors"] = nlohmann::json::array();
    for (const auto& [name, t] : model.params.tensors) header["tensors"].push_back({{"name", name}, {"shape", t.shape}});
    const std::string text = header.dump();

    std::string out(kMagic, sizeof kMagic);
    put32(out, kVersion);
    put32(out, static_cast<std::uint32_t>(text.size()));
    out += text;
    for (const auto& [_, t] : model.params.tensors)
        for (double v : t.data) put32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("save_model: cannot open " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("save_model: failed writing " + path.string());
}

Model load_model(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_model: cannot open " + path.string());
    const std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (in.size() < sizeof kMagic || std::memcmp(in.data(), kMagic, sizeof kMagic) != 0)
        throw std::runtime_error("unrecognized model file: " + path.string());
    if (in.size() < sizeof kMagic + 8) throw std::runtime_error("truncated model file: " + path.string());
    const std::uint32_t version = get32(in, 8);
    if (version != kVersion)
        throw std::runtime_error("unsupported model file version " + std::to_string(version) + ": " + path.string());
    const std::size_t header_len = get32(in, 12);
    std::size_t pos = 16;
    if (in.size() < pos + header_len) throw std::runtime_error("truncated model file: " + path.string());

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(in.substr(pos, header_len));
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("corrupt model header in " + path.string() + ": " + e.what());
    }
    pos += header_len;

    Model model;
    model.spec = header.at("spec").get<ModelSpec>();
    for (const auto& entry : header.at("tensors")) {
        ad::Array t(entry.at("shape").get<ad::Shape>());
        if (in.size() < pos + 4 * t.size()) throw std::runtime_error("truncated model file: " + path.string());
        for (double& v : t.data) {
            v = static_cast<double>(std::bit_cast<float>(get32(in, pos)));
            pos += 4;
        }
        model.params.tensors.emplace(entry.at("name").get<std::string>(), std::move(t));
    }
    if (pos != in.size()) throw std::runtime_error("trailing bytes in model file: " + path.string());

    // The declared layout must match the spec exactly.
    for (const ParamDecl& d : declare(model.spec)) {
        auto it = model.params.tensors.find(d.name);
        if (it == model.params.tensors.end() || it->second.shape != d.shape)
            throw std::runtime_error("model file " + path.string() + " does not match its spec at '" + d.name + "'");
    }
    return model;
}

// ---------------------------------------------------------------------------

void to_json(nlohmann::json& j, const WaveNetSpec& s) {
    j = {{"channels", s.channels},
         {"kernel_size", s.kernel_size},
         {"dilations", s.dilations},
         {"skip_channels", s.skip_channels}};
}

void from_json(const nlohmann::json& j, WaveNetSpec& s) {
    s = WaveNetSpec{};
    s.channels = j.value("channels", s.channels);
    s.kernel_size = j.value("kernel_size", s.kernel_size);
    s.dilations = j.value("dilations", s.dilations);
    s.skip_channels = j.value("skip_channels", s.skip_channels);
}

void to_json(nlohmann::json& j, const LstmSpec& s) {
    j = {{"hidden_size", s.hidden_size}, {"num_layers", s.num_layers}};
}

void from_json(const nlohmann::json& j, LstmSpec& s) {
    s = LstmSpec{};
    s.hidden_size = j.value("hidden_size", s.hidden_size);
    s.num_layers = j.value("num_layers", s.num_layers);
}

void to_json(nlohmann::json& j, const ModelSpec& s) {
    j = {{"arch", to_string(s.arch)}, {"num_knobs", s.num_knobs}, {"wavenet", s.wavenet}, {"lstm", s.lstm}};
}

void from_json(const nlohmann::json& j, ModelSpec& s) {
    s = ModelSpec{};
    s.arch = architecture_from_string(j.value("arch", std::string("wavenet")));
    s.num_knobs = j.value("num_knobs", s.num_knobs);
    if (j.contains("wavenet")) s.wavenet = j.at("wavenet").get<WaveNetSpec>();
    if (j.contains("lstm")) s.lstm = j.at("lstm").get<LstmSpec>();
}

void to_json(nlohmann::json& j, const KnobVector& k) { j = {{"labels", k.labels}, {"values", k.values}}; }

void from_json(const nlohmann::json& j, KnobVector& k) {
    k.labels = j.at("labels").get<std::vector<std::string>>();
    k.values = j.at("values").get<std::vector<double>>();
}

}  // namespace panama::nn
