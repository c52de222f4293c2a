#include "panama/experiment.hpp"

#include <fcntl.h>
#include <signal.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "panama/parallel.hpp"
#include "panama/seeding.hpp"
#include "panama/signals.hpp"

namespace panama::run {

namespace fs = std::filesystem;

namespace {

void ensure_parent(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

void write_text_atomic(const fs::path& path, const std::string& text) {
    ensure_parent(path);
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + tmp.string());
        f << text;
        if (!f) throw std::runtime_error("cannot write " + tmp.string());
    }
    fs::rename(tmp, path);
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    try {
        return nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed JSON in " + path.string() + ": " + e.what());
    }
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text_atomic(path, j.dump(2) + "\n"); }

void say(const RunOptions& opts, const std::string& msg) {
    if (opts.log) opts.log(msg);
}

std::string label_file(int round, std::size_t index) {
    return "labels/round" + std::to_string(round) + "_" + std::to_string(index) + ".wav";
}

}  // namespace

std::string to_string(Source s) {
    switch (s) {
        case Source::InitialRandom: return "initial-random";
        case Source::Active: return "active";
        case Source::RandomBaseline: return "random-baseline";
        case Source::BetaBaseline: return "beta-baseline";
        case Source::Manual: return "manual";
    }
    return "unknown";
}

Source source_from_string(const std::string& s) {
    for (Source v : {Source::InitialRandom, Source::Active, Source::RandomBaseline, Source::BetaBaseline, Source::Manual})
        if (to_string(v) == s) return v;
    throw std::invalid_argument("unknown dataset source '" + s + "'");
}

void LabeledDataset::validate() const {
    int last_round = 0;
    std::size_t k = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        e.g.validate();
        if (i == 0) k = e.g.size();
        if (e.g.size() != k) throw std::invalid_argument("dataset: entries have differing knob counts");
        if (e.round < last_round)
            throw std::invalid_argument("dataset: round ids must be nondecreasing (entry " + std::to_string(i) + ")");
        last_round = e.round;
        if (e.output.empty()) throw std::invalid_argument("dataset: entry " + std::to_string(i) + " has no output path");
    }
}

void EvalConfig::validate() const {
    if (clips < 1 || settings < 1) throw std::invalid_argument("EvalConfig: need at least one clip and one setting");
    if (!(clip_seconds > 0.0)) throw std::invalid_argument("EvalConfig: clip_seconds must be positive");
    for (const auto& m : mel_scales) m.validate();
}

void ExperimentConfig::validate() const {
    if (knob_labels.empty()) throw std::invalid_argument("config: at least one knob required");
    if (rounds < 0) throw std::invalid_argument("config: rounds must be >= 0");
    if (ensemble_size < 2) throw std::invalid_argument("config: ensemble_size must be >= 2");
    if (initial_points < 1) throw std::invalid_argument("config: initial_points must be >= 1");
    if (ensemble_model.num_knobs != k() || final_model.num_knobs != k())
        throw std::invalid_argument("config: model num_knobs must equal the number of knob labels");
    for (int c : checkpoints)
        if (c < 0 || c > rounds)
            throw std::invalid_argument("config: checkpoint round " + std::to_string(c) + " outside [0, " +
                                        std::to_string(rounds) + "]");
    for (int c : round_caps)
        if (c < 1) throw std::invalid_argument("config: round caps must be >= 1");
    ensemble_model.validate();
    final_model.validate();
    ensemble_train.validate(ensemble_model);
    final_train.validate(final_model);
    acquire.validate();
    eval.validate();
    if (oracle == OracleKind::Synthetic && k() != static_cast<int>(amp::KnobCount))
        throw std::invalid_argument("config: the synthetic amp has exactly 6 knobs");
    if (sample_rate <= 0 || !(input_seconds > 0.0)) throw std::invalid_argument("config: bad input signal settings");
}

std::vector<int> schedule_caps(int initial, const std::vector<std::pair<int, int>>& targets) {
    std::vector<int> caps;
    int round = 0, size = initial;
    for (const auto& [r, target] : targets) {
        if (r == 0) {
            if (target != initial) throw std::invalid_argument("schedule_caps: round 0 size must equal the initial size");
            continue;
        }
        const int n = r - round, inc = target - size;
        if (n < 1 || inc < n) throw std::invalid_argument("schedule_caps: targets must grow by at least one per round");
        for (int i = 0; i < n; ++i) caps.push_back(inc / n + (i < inc % n ? 1 : 0));
        round = r;
        size = target;
    }
    return caps;
}

ExperimentConfig desk_preset() {
    ExperimentConfig c;
    c.preset = "desk";
    c.ensemble_model.arch = nn::Architecture::Lstm;
    c.final_model.arch = nn::Architecture::WaveNet;
    c.ensemble_train.epochs = 100;
    c.ensemble_train.learning_rate = 3e-3;
    c.final_train.epochs = 300;
    c.round_caps = schedule_caps(c.initial_points, {{2, 25}, {10, 75}});
    c.acquire.fill_batches = 3;
    return c;
}

ExperimentConfig tiny_preset() {
    ExperimentConfig c = desk_preset();
    c.preset = "tiny";
    std::vector<dsp::MelConfig> scales;
    for (const auto& m : dsp::multiscale_configs(16000))
        if (m.n_fft <= 1024) scales.push_back(m);

    c.ensemble_model.lstm.hidden_size = 8;
    c.ensemble_train.epochs = 30;
    c.ensemble_train.learning_rate = 5e-3;
    c.ensemble_train.batch_size = 2;
    c.ensemble_train.segment_length = 2048;
    c.ensemble_train.lstm_warmup = 256;
    c.ensemble_train.mel_scales = scales;

    c.final_model.wavenet.channels = 8;
    c.final_model.wavenet.skip_channels = 8;
    c.final_model.wavenet.dilations = {1, 2, 4, 8, 16, 32, 64};
    c.final_train.epochs = 150;
    c.final_train.learning_rate = 5e-3;
    c.final_train.batch_size = 4;
    c.final_train.segment_length = 1300;
    c.final_train.lstm_warmup = 256;
    c.final_train.mel_scales = scales;

    c.acquire.steps = 25;
    c.acquire.step_size = 0.1;
    c.acquire.excerpt_length = 4096;

    c.eval.clips = 3;
    c.eval.clip_seconds = 2.0;
    c.eval.settings = 45;
    return c;
}

ExperimentConfig preset(const std::string& name) {
    if (name == "desk") return desk_preset();
    if (name == "tiny") return tiny_preset();
    throw std::invalid_argument("unknown preset '" + name + "' (expected desk or tiny)");
}

std::vector<nn::KnobVector> sample_settings(int n, const std::vector<std::string>& labels,
                                            std::optional<BetaParams> beta, std::uint64_t seed) {
    if (n < 0) throw std::invalid_argument("sample_settings: n must be >= 0");
    if (labels.empty()) throw std::invalid_argument("sample_settings: k must be >= 1");
    if (beta && !(beta->alpha > 0.0 && beta->beta > 0.0))
        throw std::invalid_argument("sample_settings: beta parameters must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::optional<std::gamma_distribution<double>> ga, gb;
    if (beta) {
        ga.emplace(beta->alpha, 1.0);
        gb.emplace(beta->beta, 1.0);
    }
    std::vector<nn::KnobVector> out;
    for (int i = 0; i < n; ++i) {
        nn::KnobVector g;
        g.labels = labels;
        for (std::size_t c = 0; c < labels.size(); ++c) {
            double v;
            if (beta) {
                // Beta(a, b) as X / (X + Y) with X ~ Gamma(a), Y ~ Gamma(b).
                double a, b;
                do {
                    a = (*ga)(rng);
                    b = (*gb)(rng);
                } while (a + b == 0.0);
                v = a / (a + b);
            } else {
                v = u(rng);
            }
            g.values.push_back(std::clamp(v, 0.0, 1.0));
        }
        out.push_back(std::move(g));
    }
    return out;
}

BetaParams fit_beta(std::span<const double> values) {
    if (values.size() < 2) throw std::invalid_argument("fit_beta: need at least two values");
    constexpr double eps = 1e-4;
    double mean = 0.0;
    for (double v : values) {
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("fit_beta: values must lie in [0, 1]");
        mean += std::clamp(v, eps, 1.0 - eps);
    }
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) {
        const double d = std::clamp(v, eps, 1.0 - eps) - mean;
        var += d * d;
    }
    var /= static_cast<double>(values.size());
    if (!(var > 0.0)) throw std::invalid_argument("fit_beta: zero variance");
    const double common = mean * (1.0 - mean) / var - 1.0;
    if (!(common > 0.0)) throw std::invalid_argument("fit_beta: variance too large for a beta distribution");
    return {mean * common, (1.0 - mean) * common};
}

Oracle synthetic_oracle(const amp::SynthAmpConfig& cfg) {
    return [cfg](const std::vector<double>& x, const nn::KnobVector& g) {
        return amp::synth_amp_process(dsp::AudioSignal{x, cfg.sample_rate}, g, cfg).samples;
    };
}

double median(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median of an empty set");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void EvalReport::write_csv(const fs::path& path) const {
    ensure_parent(path);
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f.precision(17);
    f << "clip,setting,mse,mel\n";
    for (const auto& r : rows) f << r.clip << ',' << r.setting << ',' << r.mse << ',' << r.mel << '\n';
}

TestSet make_test_set(const EvalConfig& cfg, const std::vector<std::string>& labels, int sample_rate) {
    cfg.validate();
    TestSet t;
    for (int c = 0; c < cfg.clips; ++c) {
        dsp::AudioSignal clip =
            sig::test_clip(cfg.clip_seconds, sample_rate, derive_seed(cfg.seed, {1, static_cast<std::uint64_t>(c)}));
        for (double& v : clip.samples) v = static_cast<float>(v);
        t.clips.push_back(std::move(clip));
    }
    t.settings = sample_settings(cfg.settings, labels, std::nullopt, derive_seed(cfg.seed, {2}));
    for (int s = 0; s < cfg.settings; ++s) t.clip_of.push_back(s % cfg.clips);
    return t;
}

void save_test_set(const TestSet& tests, const fs::path& dir) {
    fs::create_directories(dir);
    for (std::size_t c = 0; c < tests.clips.size(); ++c)
        dsp::write_wav(dir / ("clip" + std::to_string(c) + ".wav"), tests.clips[c]);
    write_json(dir / "settings.json", {{"clips", tests.clips.size()}, {"settings", tests.settings}, {"clip_of", tests.clip_of}});
}

TestSet load_test_set(const fs::path& dir) {
    const auto j = read_json(dir / "settings.json");
    TestSet t;
    const auto n = j.at("clips").get<std::size_t>();
    for (std::size_t c = 0; c < n; ++c) t.clips.push_back(dsp::read_wav(dir / ("clip" + std::to_string(c) + ".wav")));
    t.settings = j.at("settings").get<std::vector<nn::KnobVector>>();
    t.clip_of = j.at("clip_of").get<std::vector<int>>();
    if (t.clip_of.size() != t.settings.size()) throw std::runtime_error("test set: clip_of and settings differ in length");
    for (int c : t.clip_of)
        if (c < 0 || static_cast<std::size_t>(c) >= n) throw std::runtime_error("test set: clip index out of range");
    return t;
}

EvalReport evaluate(const Predictor& model, const TestSet& tests, const Oracle& oracle,
                    const std::vector<dsp::MelConfig>& scales) {
    if (tests.clips.empty() || tests.settings.empty()) throw std::invalid_argument("evaluate: empty test set");
    EvalReport rep;
    rep.rows.resize(tests.settings.size());
    for (std::size_t s = 0; s < tests.settings.size(); ++s) {
        const int c = tests.clip_of.empty() ? static_cast<int>(s % tests.clips.size()) : tests.clip_of[s];
        const auto& x = tests.clips.at(static_cast<std::size_t>(c)).samples;
        const std::vector<double> truth = oracle(x, tests.settings[s]);
        const std::vector<double> pred = model(x, tests.settings[s]);
        if (pred.size() != truth.size()) throw std::runtime_error("evaluate: prediction length differs from the truth");
        double mse = 0.0;
        for (std::size_t i = 0; i < pred.size(); ++i) mse += (pred[i] - truth[i]) * (pred[i] - truth[i]);
        mse /= static_cast<double>(pred.size());
        const double mel = dsp::multiscale_mel_distance(pred, truth, scales);
        if (!std::isfinite(mse) || !std::isfinite(mel))
            throw std::runtime_error("evaluate: non-finite metric for setting " + std::to_string(s));
        rep.rows[s] = {c, static_cast<int>(s), mse, mel};
    }
    std::vector<double> mses, mels;
    for (const auto& r : rep.rows) {
        mses.push_back(r.mse);
        mels.push_back(r.mel);
    }
    rep.mean_mse = std::accumulate(mses.begin(), mses.end(), 0.0) / static_cast<double>(mses.size());
    rep.mean_mel = std::accumulate(mels.begin(), mels.end(), 0.0) / static_cast<double>(mels.size());
    rep.median_mse = median(mses);
    rep.median_mel = median(mels);
    return rep;
}

// ---------------------------------------------------------------------------
// Run directory

RunDir::RunDir(fs::path root) : root_(std::move(root)) {}

fs::path RunDir::final_model_path(int r) const { return root_ / "models" / ("final_round" + std::to_string(r) + ".bin"); }

ExperimentConfig RunDir::load_config() const {
    if (!fs::exists(config_path())) throw std::runtime_error("no config.json in " + root_.string() + " (run init first)");
    ExperimentConfig c = read_json(config_path()).get<ExperimentConfig>();
    c.validate();
    return c;
}

void RunDir::save_config(const ExperimentConfig& cfg) const { write_json(config_path(), cfg); }

LabeledDataset RunDir::load_dataset() const {
    LabeledDataset d = read_json(dataset_path()).get<LabeledDataset>();
    d.validate();
    return d;
}

void RunDir::save_dataset(const LabeledDataset& d) const {
    d.validate();
    write_json(dataset_path(), d);
}

RunState RunDir::load_state() const {
    RunState s;
    if (!fs::exists(state_path())) return s;
    const auto j = read_json(state_path());
    s.completed_round = j.at("completed_round").get<int>();
    s.finals_done = j.at("finals_done").get<std::vector<int>>();
    s.complete = j.value("complete", false);
    if (!j.at("pending_round").is_null()) {
        s.pending_round = j["pending_round"].get<int>();
        s.pending_source = source_from_string(j.at("pending_source").get<std::string>());
        s.pending = j.at("pending").get<std::vector<nn::KnobVector>>();
    }
    return s;
}

void RunDir::save_state(const RunState& s) const {
    nlohmann::json j = {{"completed_round", s.completed_round},
                        {"finals_done", s.finals_done},
                        {"complete", s.complete},
                        {"pending_round", s.pending_round ? nlohmann::json(*s.pending_round) : nlohmann::json(nullptr)},
                        {"pending_source", to_string(s.pending_source)},
                        {"pending", s.pending}};
    write_json(state_path(), j);
}

RunLock::RunLock(const fs::path& dir) : path_(dir / ".lock") {
    fs::create_directories(dir);
    for (int attempt = 0; attempt < 2; ++attempt) {
        const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd >= 0) {
            const std::string pid = std::to_string(::getpid()) + "\n";
            [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
            ::close(fd);
            return;
        }
        if (errno != EEXIST) throw std::runtime_error("cannot create lock " + path_.string());
        long owner = 0;
        std::ifstream(path_) >> owner;
        if (owner > 0 && (::kill(static_cast<pid_t>(owner), 0) == 0 || errno != ESRCH))
            throw std::runtime_error("run directory " + dir.string() + " is locked by process " + std::to_string(owner));
        fs::remove(path_);
    }
    throw std::runtime_error("cannot acquire lock " + path_.string());
}

RunLock::~RunLock() {
    std::error_code ec;
    fs::remove(path_, ec);
}

void init_run(const fs::path& dir, const ExperimentConfig& cfg) {
    cfg.validate();
    RunDir rd(dir);
    if (fs::exists(rd.config_path())) throw std::runtime_error("run directory " + dir.string() + " already initialized");
    fs::create_directories(dir);
    rd.save_config(cfg);
}

amp::SynthAmpConfig amp_for(const ExperimentConfig& cfg) {
    amp::SynthAmpConfig a = cfg.amp_config.empty() ? amp::default_synth_amp() : amp::load_synth_amp(cfg.amp_config);
    if (a.sample_rate != cfg.sample_rate)
        throw std::invalid_argument("config: amp sample rate " + std::to_string(a.sample_rate) +
                                    " differs from the experiment sample rate " + std::to_string(cfg.sample_rate));
    return a;
}

dsp::AudioSignal run_input(const RunDir& dir, const ExperimentConfig& cfg) {
    if (!fs::exists(dir.input_path())) {
        fs::create_directories(dir.input_path().parent_path());
        dsp::write_wav(dir.input_path(), sig::input_signal(cfg.input_seconds, cfg.sample_rate, cfg.input_seed));
    }
    dsp::AudioSignal x = dsp::read_wav(dir.input_path());
    if (x.sample_rate != cfg.sample_rate) throw std::runtime_error("input signal sample rate differs from the config");
    return x;
}

std::vector<train::Example> load_examples(const RunDir& dir, const LabeledDataset& d) {
    const dsp::AudioSignal x = dsp::read_wav(dir.root() / d.input_path);
    if (amp::signal_checksum(x.samples) != d.input_checksum)
        throw std::runtime_error("input signal checksum does not match the dataset manifest");
    auto xs = std::make_shared<const std::vector<double>>(x.samples);
    std::vector<train::Example> out;
    for (const auto& e : d.entries) {
        dsp::AudioSignal y = dsp::read_wav(dir.root() / e.output);
        if (y.samples.size() != xs->size()) throw std::runtime_error("label " + e.output + " length differs from x");
        out.push_back({xs, e.g, std::make_shared<const std::vector<double>>(std::move(y.samples))});
    }
    return out;
}

namespace {

LabeledDataset load_or_new_dataset(const RunDir& rd, const dsp::AudioSignal& x) {
    if (fs::exists(rd.dataset_path())) return rd.load_dataset();
    LabeledDataset d;
    d.input_path = fs::relative(rd.input_path(), rd.root()).generic_string();
    d.input_checksum = amp::signal_checksum(x.samples);
    return d;
}

bool contains(const std::vector<int>& v, int x) { return std::find(v.begin(), v.end(), x) != v.end(); }

// Appends recordings for the pending batch and marks its round complete.
void commit_pending(const RunDir& rd, RunState& state, LabeledDataset& d, const std::vector<std::vector<double>>& ys,
                    Source source, int sample_rate) {
    const int round = *state.pending_round;
    const bool already = std::any_of(d.entries.begin(), d.entries.end(), [&](const DatasetEntry& e) {
        return e.round == round && e.source == source;
    });
    if (!already) {
        for (std::size_t i = 0; i < state.pending.size(); ++i) {
            const std::string rel = label_file(round, i);
            fs::create_directories((rd.root() / rel).parent_path());
            dsp::write_wav(rd.root() / rel, dsp::AudioSignal{ys[i], sample_rate});
            d.entries.push_back({state.pending[i], rel, round, source});
        }
        rd.save_dataset(d);
        write_json(rd.round_dir(round) / "dataset.json", d);
    }
    state.completed_round = round;
    state.pending_round.reset();
    state.pending.clear();
    rd.save_state(state);
}

void label_synthetic(const RunDir& rd, const ExperimentConfig& cfg, const dsp::AudioSignal& x, RunState& state,
                     LabeledDataset& d) {
    const Oracle oracle = synthetic_oracle(amp_for(cfg));
    std::vector<std::vector<double>> ys(state.pending.size());
    parallel_for(ys.size(), cfg.threads, [&](std::size_t i) { ys[i] = oracle(x.samples, state.pending[i]); });
    commit_pending(rd, state, d, ys, state.pending_source, x.sample_rate);
}

nn::Model train_final_impl(const RunDir& rd, const ExperimentConfig& cfg, const LabeledDataset& d, int round,
                           const RunOptions& opts) {
    LabeledDataset upto = d;
    std::erase_if(upto.entries, [&](const DatasetEntry& e) { return e.round > round; });
    say(opts, "round " + std::to_string(round) + ": training final " + nn::to_string(cfg.final_model.arch) +
                  " on " + std::to_string(upto.size()) + " points");
    const auto examples = load_examples(rd, upto);
    train::TrainConfig tc = cfg.final_train;
    tc.seed = derive_seed(cfg.seed, {kFinal});
    train::TrainResult res = train::train_model(cfg.final_model, examples, tc);
    nn::Model model{cfg.final_model, res.params};
    fs::create_directories(rd.final_model_path(round).parent_path());
    nn::save_model(model, rd.final_model_path(round));
    fs::create_directories(rd.reports_dir());
    res.report.write_csv(rd.reports_dir() / ("final_round" + std::to_string(round) + "_loss.csv"));
    write_json(rd.reports_dir() / ("final_round" + std::to_string(round) + ".json"),
               {{"round", round},
                {"dataset_size", upto.size()},
                {"seconds", res.report.seconds},
                {"samples_processed", res.report.samples_processed},
                {"best_epoch", res.report.best_epoch},
                {"best_loss", res.report.epoch_loss[res.report.best_epoch]}});
    return model;
}

void propose_round(const RunDir& rd, const ExperimentConfig& cfg, const dsp::AudioSignal& x, const LabeledDataset& d,
                   int round, RunState& state, const RunOptions& opts) {
    const auto rdir = rd.round_dir(round);
    fs::create_directories(rdir / "ensemble");
    const auto examples = load_examples(rd, d);
    train::TrainConfig tc = cfg.ensemble_train;
    tc.seed = derive_seed(cfg.seed, {kEnsemble, static_cast<std::uint64_t>(round)});
    say(opts, "round " + std::to_string(round) + ": training " + std::to_string(cfg.ensemble_size) + " " +
                  nn::to_string(cfg.ensemble_model.arch) + " members on " + std::to_string(d.size()) + " points");
    const train::EnsembleResult ens = train::train_ensemble(cfg.ensemble_model, cfg.ensemble_size, examples, tc, cfg.threads);
    nlohmann::json members = nlohmann::json::array();
    for (std::size_t i = 0; i < ens.members.size(); ++i) {
        nn::save_model({cfg.ensemble_model, ens.members[i]}, rdir / "ensemble" / ("member" + std::to_string(i) + ".bin"));
        ens.reports[i].write_csv(rdir / "ensemble" / ("member" + std::to_string(i) + "_loss.csv"));
        members.push_back({{"seed", tc.seed + i}, {"best_epoch", ens.reports[i].best_epoch}});
    }
    write_json(rdir / "ensemble.json", {{"members", members},
                                        {"seconds", ens.seconds},
                                        {"samples_processed", ens.samples_processed},
                                        {"throughput", ens.throughput()}});

    al::AcquireConfig ac = cfg.acquire;
    ac.seed = derive_seed(cfg.seed, {kAcquire, static_cast<std::uint64_t>(round)});
    ac.threads = cfg.threads;
    if (!cfg.round_caps.empty()) {
        if (static_cast<std::size_t>(round) > cfg.round_caps.size())
            throw std::invalid_argument("config: no round cap for round " + std::to_string(round));
        ac.max_per_round = cfg.round_caps[static_cast<std::size_t>(round - 1)];
    }
    const al::ProposalBatch batch = al::propose_batch(al::make_committee(cfg.ensemble_model, ens.members), x.samples, ac,
                                                      cfg.knob_labels);
    batch.write_csv(rdir / "acquisition.csv");
    write_json(rdir / "proposals.json", {{"round", round},
                                         {"acquire_seed", ac.seed},
                                         {"proposals", batch.proposals},
                                         {"scores", batch.scores}});
    say(opts, "round " + std::to_string(round) + ": " + std::to_string(batch.proposals.size()) + " proposals from " +
                  std::to_string(batch.restarts.size()) + " restarts");
    state.pending = batch.proposals;
    state.pending_round = round;
    state.pending_source = cfg.oracle == OracleKind::Manual ? Source::Manual : Source::Active;
    rd.save_state(state);
}

void export_for_manual(const RunDir& rd, const dsp::AudioSignal& x, const RunState& state) {
    amp::export_request_manifest(state.pending, *state.pending_round, x,
                                 rd.root() / "requests" / ("round" + std::to_string(*state.pending_round)));
}

}  // namespace

RunStatus run_active_learning(const fs::path& dir, const RunOptions& opts) {
    const RunDir rd(dir);
    const RunLock lock(dir);
    const ExperimentConfig cfg = rd.load_config();
    const dsp::AudioSignal x = run_input(rd, cfg);
    LabeledDataset d = load_or_new_dataset(rd, x);
    RunState state = rd.load_state();
    std::vector<int> finals = cfg.checkpoints;
    if (!contains(finals, cfg.rounds)) finals.push_back(cfg.rounds);

    while (true) {
        if (state.pending_round) {
            if (cfg.oracle == OracleKind::Manual) {
                say(opts, "round " + std::to_string(*state.pending_round) + ": awaiting ingest of " +
                              std::to_string(state.pending.size()) + " recordings");
                return RunStatus::AwaitingIngest;
            }
            if (opts.stop_at_pending) return RunStatus::Stopped;
            label_synthetic(rd, cfg, x, state, d);
            continue;
        }
        const int r = state.completed_round;
        if (r < 0) {
            state.pending = sample_settings(cfg.initial_points, cfg.knob_labels, std::nullopt, derive_seed(cfg.seed, {kInitial}));
            state.pending_round = 0;
            state.pending_source = cfg.oracle == OracleKind::Manual ? Source::Manual : Source::InitialRandom;
            rd.save_state(state);
            if (cfg.oracle == OracleKind::Manual) export_for_manual(rd, x, state);
            continue;
        }
        if (contains(finals, r) && !contains(state.finals_done, r)) {
            train_final_impl(rd, cfg, d, r, opts);
            state.finals_done.push_back(r);
            rd.save_state(state);
            continue;
        }
        if (r >= cfg.rounds) {
            state.complete = true;
            rd.save_state(state);
            return RunStatus::Complete;
        }
        if (opts.stop_after_round && r >= *opts.stop_after_round) return RunStatus::Stopped;
        propose_round(rd, cfg, x, d, r + 1, state, opts);
        if (cfg.oracle == OracleKind::Manual) export_for_manual(rd, x, state);
        if (opts.stop_at_pending) return RunStatus::Stopped;
    }
}

void label_pending_synthetic(const fs::path& dir) {
    const RunDir rd(dir);
    const RunLock lock(dir);
    const ExperimentConfig cfg = rd.load_config();
    const dsp::AudioSignal x = run_input(rd, cfg);
    LabeledDataset d = load_or_new_dataset(rd, x);
    RunState state = rd.load_state();
    if (!state.pending_round) throw std::runtime_error("no pending proposals to label");
    label_synthetic(rd, cfg, x, state, d);
}

amp::RequestManifest export_pending(const fs::path& dir, const fs::path& out) {
    const RunDir rd(dir);
    const RunLock lock(dir);
    const ExperimentConfig cfg = rd.load_config();
    const RunState state = rd.load_state();
    if (!state.pending_round) throw std::runtime_error("no pending proposals to export");
    return amp::export_request_manifest(state.pending, *state.pending_round, run_input(rd, cfg), out);
}

void ingest_pending(const fs::path& dir, const fs::path& recordings) {
    const RunDir rd(dir);
    const RunLock lock(dir);
    const ExperimentConfig cfg = rd.load_config();
    const dsp::AudioSignal x = run_input(rd, cfg);
    LabeledDataset d = load_or_new_dataset(rd, x);
    RunState state = rd.load_state();
    if (!state.pending_round) throw std::runtime_error("no pending proposals to ingest");
    const amp::RequestManifest m = amp::read_manifest(amp::manifest_path(recordings, *state.pending_round));
    if (m.requests.size() != state.pending.size())
        throw std::runtime_error("manifest lists " + std::to_string(m.requests.size()) + " requests but " +
                                 std::to_string(state.pending.size()) + " proposals are pending");
    for (std::size_t i = 0; i < m.requests.size(); ++i)
        if (m.requests[i].g.values != state.pending[i].values)
            throw std::runtime_error("manifest request " + std::to_string(m.requests[i].id) +
                                     " does not match the pending proposal");
    const auto recs = amp::ingest_recordings(m, recordings, x);
    std::vector<std::vector<double>> ys;
    for (const auto& r : recs) ys.push_back(r.y.samples);
    commit_pending(rd, state, d, ys, state.pending_source, x.sample_rate);
}

nn::Model train_final(const fs::path& dir, int round, const RunOptions& opts) {
    const RunDir rd(dir);
    const RunLock lock(dir);
    const ExperimentConfig cfg = rd.load_config();
    const LabeledDataset d = rd.load_dataset();
    return train_final_impl(rd, cfg, d, round, opts);
}

// ---------------------------------------------------------------------------
// Ablation

double AblationResult::median_mse(const std::string& strategy, std::optional<int> round) const {
    std::vector<double> v;
    for (const auto& r : runs)
        if (r.strategy == strategy && (!round || r.round == *round)) v.push_back(r.report.mean_mse);
    return median(v);
}

double AblationResult::median_mel(const std::string& strategy, std::optional<int> round) const {
    std::vector<double> v;
    for (const auto& r : runs)
        if (r.strategy == strategy && (!round || r.round == *round)) v.push_back(r.report.mean_mel);
    return median(v);
}

namespace {

EvalReport evaluate_model_file(const fs::path& model_path, const TestSet& tests, const Oracle& oracle,
                               const ExperimentConfig& cfg, std::size_t dataset_size, std::uint64_t seed) {
    const auto model = std::make_shared<const nn::Model>(nn::load_model(model_path));
    Predictor p = [model](const std::vector<double>& x, const nn::KnobVector& g) { return nn::predict(*model, x, g); };
    EvalReport rep = evaluate(p, tests, oracle, cfg.eval.mel_scales);
    rep.model_id = model_path.filename().string();
    rep.dataset_size = dataset_size;
    rep.seed = seed;
    return rep;
}

// Evaluation of a saved model, cached next to it.
EvalReport cached_eval(const fs::path& model_path, const fs::path& csv, const TestSet& tests, const Oracle& oracle,
                       const ExperimentConfig& cfg, std::size_t dataset_size, std::uint64_t seed) {
    const fs::path summary = csv.string() + ".json";
    if (fs::exists(summary) && fs::last_write_time(summary) >= fs::last_write_time(model_path)) {
        const auto j = read_json(summary);
        EvalReport rep;
        rep.model_id = j.at("model_id");
        rep.dataset_size = j.at("dataset_size");
        rep.seed = j.at("seed");
        rep.mean_mse = j.at("mean_mse");
        rep.median_mse = j.at("median_mse");
        rep.mean_mel = j.at("mean_mel");
        rep.median_mel = j.at("median_mel");
        return rep;
    }
    EvalReport rep = evaluate_model_file(model_path, tests, oracle, cfg, dataset_size, seed);
    rep.write_csv(csv);
    write_json(summary, {{"model_id", rep.model_id},
                         {"dataset_size", rep.dataset_size},
                         {"seed", rep.seed},
                         {"mean_mse", rep.mean_mse},
                         {"median_mse", rep.median_mse},
                         {"mean_mel", rep.mean_mel},
                         {"median_mel", rep.median_mel}});
    return rep;
}

double ensemble_throughput(const RunDir& rd, int rounds) {
    double samples = 0.0, seconds = 0.0;
    for (int r = 1; r <= rounds; ++r) {
        const auto p = rd.round_dir(r) / "ensemble.json";
        if (!fs::exists(p)) continue;
        const auto j = read_json(p);
        samples += j.at("samples_processed").get<double>();
        seconds += j.at("seconds").get<double>();
    }
    return seconds > 0.0 ? samples / seconds : 0.0;
}

std::size_t size_at_round(const LabeledDataset& d, int round) {
    return static_cast<std::size_t>(
        std::count_if(d.entries.begin(), d.entries.end(), [&](const DatasetEntry& e) { return e.round <= round; }));
}

// Initial points plus `extra` sampled settings, labeled and trained once.
void run_baseline(const fs::path& dir, const ExperimentConfig& cfg, int extra, std::optional<BetaParams> beta,
                  const AblationConfig& acfg) {
    const RunDir rd(dir);
    if (!fs::exists(rd.config_path())) {
        ExperimentConfig bc = cfg;
        bc.rounds = 0;
        bc.checkpoints = {0};
        bc.round_caps.clear();
        init_run(dir, bc);
    }
    RunState state = rd.load_state();
    if (!state.finals_done.empty()) return;
    const RunLock lock(dir);
    const dsp::AudioSignal x = run_input(rd, cfg);
    LabeledDataset d = load_or_new_dataset(rd, x);
    if (state.completed_round < 0) {
        auto settings = sample_settings(cfg.initial_points, cfg.knob_labels, std::nullopt, derive_seed(cfg.seed, {kInitial}));
        const auto more = sample_settings(extra, cfg.knob_labels, beta,
                                          derive_seed(cfg.seed, {kBaseline, beta ? 2u : 1u}));
        const Oracle oracle = synthetic_oracle(amp_for(cfg));
        d.entries.clear();
        for (std::size_t i = 0; i < settings.size() + more.size(); ++i) {
            const bool initial = i < settings.size();
            const nn::KnobVector& g = initial ? settings[i] : more[i - settings.size()];
            const std::string rel = label_file(0, i);
            fs::create_directories((rd.root() / rel).parent_path());
            dsp::write_wav(rd.root() / rel, dsp::AudioSignal{oracle(x.samples, g), cfg.sample_rate});
            d.entries.push_back(
                {g, rel, 0, initial ? Source::InitialRandom : (beta ? Source::BetaBaseline : Source::RandomBaseline)});
        }
        rd.save_dataset(d);
        state.completed_round = 0;
        rd.save_state(state);
    }
    RunOptions opts;
    opts.log = acfg.log;
    train_final_impl(rd, cfg, d, 0, opts);
    state.finals_done.push_back(0);
    state.complete = true;
    rd.save_state(state);
}

}  // namespace

AblationResult run_ablation(const ExperimentConfig& base, const AblationConfig& acfg, const fs::path& dir) {
    base.validate();
    if (acfg.seeds.empty()) throw std::invalid_argument("ablation: at least one seed required");
    if (acfg.budget < base.initial_points)
        throw std::invalid_argument("ablation: budget smaller than the initial dataset");
    const int extra = acfg.budget - base.initial_points;
    const std::vector<int> all_caps = base.round_caps;
    const int caps_total = std::accumulate(all_caps.begin(), all_caps.end(), 0);
    if (extra > 0 && !all_caps.empty() && caps_total != extra)
        throw std::invalid_argument("ablation: round caps add " + std::to_string(caps_total) + " points, budget needs " +
                                    std::to_string(extra));
    auto log = [&](const std::string& m) {
        if (acfg.log) acfg.log(m);
    };

    const TestSet tests = make_test_set(base.eval, base.knob_labels, base.sample_rate);
    if (!fs::exists(dir / "test_set" / "settings.json")) save_test_set(tests, dir / "test_set");
    const Oracle oracle = synthetic_oracle(amp_for(base));
    AblationResult out;
    out.strategy_order = acfg.strategies;

    for (std::uint64_t seed : acfg.seeds) {
        ExperimentConfig cfg = base;
        cfg.seed = seed;
        if (extra == 0) {
            cfg.rounds = 0;
            cfg.checkpoints = {0};
            cfg.round_caps.clear();
        }
        const fs::path sdir = dir / ("seed" + std::to_string(seed));
        for (const std::string& strategy : acfg.strategies) {
            const fs::path run = sdir / strategy;
            log("seed " + std::to_string(seed) + ": " + strategy);
            if (strategy == "active") {
                if (!fs::exists(run / "config.json")) init_run(run, cfg);
                RunOptions opts;
                opts.log = acfg.log;
                if (run_active_learning(run, opts) != RunStatus::Complete)
                    throw std::runtime_error("ablation: active run did not complete");
                const RunDir rd(run);
                const LabeledDataset d = rd.load_dataset();
                std::vector<int> rounds = acfg.checkpoints ? cfg.checkpoints : std::vector<int>{};
                if (!contains(rounds, cfg.rounds)) rounds.push_back(cfg.rounds);
                std::sort(rounds.begin(), rounds.end());
                for (int r : rounds) {
                    StrategyResult res{strategy, seed, size_at_round(d, r), r, {}, ensemble_throughput(rd, cfg.rounds)};
                    res.report = cached_eval(rd.final_model_path(r), rd.reports_dir() / ("eval_round" + std::to_string(r) + ".csv"),
                                             tests, oracle, cfg, res.dataset_size, seed);
                    out.runs.push_back(std::move(res));
                }
            } else if (strategy == "uniform" || strategy == "beta") {
                run_baseline(run, cfg, extra,
                             strategy == "beta" ? std::optional<BetaParams>(BetaParams{0.5, 0.5}) : std::nullopt, acfg);
                const RunDir rd(run);
                StrategyResult res{strategy, seed, rd.load_dataset().size(), cfg.rounds, {}, 0.0};
                res.report = cached_eval(rd.final_model_path(0), rd.reports_dir() / "eval_round0.csv", tests, oracle, cfg,
                                         res.dataset_size, seed);
                out.runs.push_back(std::move(res));
            } else {
                throw std::invalid_argument("ablation: unknown strategy '" + strategy + "'");
            }
        }
    }

    if (acfg.architecture_study) {
        const std::uint64_t seed = acfg.seeds.front();
        ExperimentConfig cfg = base;
        cfg.seed = seed;
        const fs::path adir = dir / "architectures";

        // LSTM ensemble, LSTM final: reuse the active dataset of the first seed.
        {
            const fs::path run = adir / "lstm_lstm";
            const RunDir src(dir / ("seed" + std::to_string(seed)) / "active");
            if (!fs::exists(src.config_path())) throw std::runtime_error("architecture study needs the active strategy");
            const RunDir rd(run);
            if (!fs::exists(rd.final_model_path(cfg.rounds))) {
                log("architectures: lstm/lstm");
                const LabeledDataset d = src.load_dataset();
                train::TrainConfig tc = cfg.final_train;
                tc.seed = derive_seed(seed, {kFinal});
                tc.lstm_warmup = cfg.ensemble_train.lstm_warmup;
                const auto res = train::train_model(cfg.ensemble_model, load_examples(src, d), tc);
                fs::create_directories(rd.final_model_path(cfg.rounds).parent_path());
                nn::save_model({cfg.ensemble_model, res.params}, rd.final_model_path(cfg.rounds));
            }
            StrategyResult res{"lstm/lstm", seed, size_at_round(src.load_dataset(), cfg.rounds), cfg.rounds, {},
                               ensemble_throughput(src, cfg.rounds)};
            res.report = cached_eval(rd.final_model_path(cfg.rounds), rd.reports_dir() / "eval.csv", tests, oracle, cfg,
                                     res.dataset_size, seed);
            out.runs.push_back(std::move(res));
        }
        // WaveNet ensemble, WaveNet final: a separate active run.
        {
            const fs::path run = adir / "wavenet_wavenet";
            ExperimentConfig wc = cfg;
            wc.ensemble_model = cfg.final_model;
            wc.ensemble_train.segment_length = cfg.final_train.segment_length;
            wc.ensemble_train.mel_scales = cfg.final_train.mel_scales;
            wc.checkpoints = {cfg.rounds};
            if (!fs::exists(run / "config.json")) init_run(run, wc);
            log("architectures: wavenet/wavenet");
            RunOptions opts;
            opts.log = acfg.log;
            run_active_learning(run, opts);
            const RunDir rd(run);
            StrategyResult res{"wavenet/wavenet", seed, rd.load_dataset().size(), cfg.rounds, {},
                               ensemble_throughput(rd, cfg.rounds)};
            res.report = cached_eval(rd.final_model_path(cfg.rounds), rd.reports_dir() / "eval.csv", tests, oracle, wc,
                                     res.dataset_size, seed);
            out.runs.push_back(std::move(res));
        }
        // LSTM ensemble, WaveNet final is the active strategy itself.
        for (const auto& r : out.runs)
            if (r.strategy == "active" && r.seed == seed && r.round == cfg.rounds) {
                StrategyResult copy = r;
                copy.strategy = "lstm/wavenet";
                out.runs.push_back(copy);
                break;
            }
    }
    return out;
}

void write_ablation_csv(const AblationResult& r, const fs::path& path) {
    ensure_parent(path);
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f.precision(10);
    f << "strategy,seed,round,dataset_size,test_mse,test_mel,median_row_mse,median_row_mel\n";
    std::map<std::pair<std::string, int>, std::pair<std::vector<double>, std::vector<double>>> groups;
    std::vector<std::pair<std::string, int>> order;
    for (const auto& run : r.runs) {
        if (run.strategy.find('/') != std::string::npos) continue;
        f << run.strategy << ',' << run.seed << ',' << run.round << ',' << run.dataset_size << ',' << run.report.mean_mse
          << ',' << run.report.mean_mel << ',' << run.report.median_mse << ',' << run.report.median_mel << '\n';
        const auto key = std::make_pair(run.strategy, run.round);
        if (!groups.count(key)) order.push_back(key);
        groups[key].first.push_back(run.report.mean_mse);
        groups[key].second.push_back(run.report.mean_mel);
    }
    for (const auto& key : order)
        f << key.first << ",median," << key.second << ",," << median(groups[key].first) << ','
          << median(groups[key].second) << ",,\n";
}

void write_architecture_csv(const AblationResult& r, const fs::path& path) {
    ensure_parent(path);
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f.precision(10);
    f << "ensemble,final,ensemble_samples_per_second,test_mse,test_mel\n";
    for (const auto& run : r.runs) {
        const auto slash = run.strategy.find('/');
        if (slash == std::string::npos) continue;
        f << run.strategy.substr(0, slash) << ',' << run.strategy.substr(slash + 1) << ',' << run.ensemble_throughput
          << ',' << run.report.mean_mse << ',' << run.report.mean_mel << '\n';
    }
}

HistogramReport g_histogram(const LabeledDataset& d, int bins, double extreme_margin) {
    if (bins < 1) throw std::invalid_argument("g_histogram: bins must be >= 1");
    HistogramReport h;
    for (int b = 0; b <= bins; ++b) h.edges.push_back(static_cast<double>(b) / bins);
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    std::vector<double> values;
    std::size_t near = 0;
    for (const auto& e : d.entries) {
        if (e.source != Source::Active && e.source != Source::Manual) continue;
        if (e.source == Source::Manual && e.round == 0) continue;
        for (double v : e.g.values) {
            values.push_back(v);
            const auto b = std::min<std::size_t>(static_cast<std::size_t>(v * bins), static_cast<std::size_t>(bins - 1));
            ++h.counts[b];
            if (v <= extreme_margin || v >= 1.0 - extreme_margin) ++near;
        }
    }
    h.values = values.size();
    if (!values.empty()) h.near_extreme_fraction = static_cast<double>(near) / static_cast<double>(values.size());
    try {
        if (values.size() >= 2) h.fit = fit_beta(values);
    } catch (const std::invalid_argument&) {
        h.fit.reset();
    }
    return h;
}

void write_histogram_csv(const HistogramReport& h, const fs::path& path) {
    ensure_parent(path);
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << "bin_lo,bin_hi,count\n";
    if (h.values == 0) return;
    for (std::size_t b = 0; b < h.counts.size(); ++b) f << h.edges[b] << ',' << h.edges[b + 1] << ',' << h.counts[b] << '\n';
}

// ---------------------------------------------------------------------------
// JSON

void to_json(nlohmann::json& j, const LabeledDataset& d) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : d.entries)
        entries.push_back({{"g", e.g}, {"output", e.output}, {"round", e.round}, {"source", to_string(e.source)}});
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", d.input_checksum);
    j = {{"input", {{"path", d.input_path}, {"checksum_algorithm", "crc32"}, {"checksum", buf}}}, {"entries", entries}};
}

void from_json(const nlohmann::json& j, LabeledDataset& d) {
    d = LabeledDataset{};
    d.input_path = j.at("input").at("path").get<std::string>();
    d.input_checksum = static_cast<std::uint32_t>(std::stoul(j.at("input").at("checksum").get<std::string>(), nullptr, 16));
    for (const auto& e : j.at("entries"))
        d.entries.push_back({e.at("g").get<nn::KnobVector>(), e.at("output").get<std::string>(), e.at("round").get<int>(),
                             source_from_string(e.at("source").get<std::string>())});
}

void to_json(nlohmann::json& j, const EvalConfig& c) {
    j = {{"clips", c.clips}, {"clip_seconds", c.clip_seconds}, {"settings", c.settings}, {"seed", c.seed},
         {"mel_scales", c.mel_scales}};
}

void from_json(const nlohmann::json& j, EvalConfig& c) {
    c = EvalConfig{};
    c.clips = j.value("clips", c.clips);
    c.clip_seconds = j.value("clip_seconds", c.clip_seconds);
    c.settings = j.value("settings", c.settings);
    c.seed = j.value("seed", c.seed);
    if (j.contains("mel_scales")) c.mel_scales = j.at("mel_scales").get<std::vector<dsp::MelConfig>>();
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
    j = {{"preset", c.preset},
         {"knob_labels", c.knob_labels},
         {"rounds", c.rounds},
         {"initial_points", c.initial_points},
         {"ensemble_size", c.ensemble_size},
         {"ensemble_model", c.ensemble_model},
         {"final_model", c.final_model},
         {"ensemble_train", c.ensemble_train},
         {"final_train", c.final_train},
         {"acquire", c.acquire},
         {"round_caps", c.round_caps},
         {"checkpoints", c.checkpoints},
         {"oracle", c.oracle == OracleKind::Synthetic ? "synthetic" : "manual"},
         {"amp_config", c.amp_config},
         {"sample_rate", c.sample_rate},
         {"input_seconds", c.input_seconds},
         {"input_seed", c.input_seed},
         {"seed", c.seed},
         {"threads", c.threads},
         {"eval", c.eval}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
    // Missing fields fall back to the named preset.
    c = preset(j.value("preset", std::string("desk")));
    if (j.contains("knob_labels")) c.knob_labels = j["knob_labels"].get<std::vector<std::string>>();
    c.rounds = j.value("rounds", c.rounds);
    c.initial_points = j.value("initial_points", c.initial_points);
    c.ensemble_size = j.value("ensemble_size", c.ensemble_size);
    if (j.contains("ensemble_model")) c.ensemble_model = j["ensemble_model"].get<nn::ModelSpec>();
    if (j.contains("final_model")) c.final_model = j["final_model"].get<nn::ModelSpec>();
    if (j.contains("ensemble_train")) c.ensemble_train = j["ensemble_train"].get<train::TrainConfig>();
    if (j.contains("final_train")) c.final_train = j["final_train"].get<train::TrainConfig>();
    if (j.contains("acquire")) c.acquire = j["acquire"].get<al::AcquireConfig>();
    if (j.contains("round_caps")) c.round_caps = j["round_caps"].get<std::vector<int>>();
    if (j.contains("checkpoints")) c.checkpoints = j["checkpoints"].get<std::vector<int>>();
    if (j.contains("oracle")) {
        const auto o = j["oracle"].get<std::string>();
        if (o == "synthetic") c.oracle = OracleKind::Synthetic;
        else if (o == "manual") c.oracle = OracleKind::Manual;
        else throw std::invalid_argument("config: unknown oracle '" + o + "'");
    }
    c.amp_config = j.value("amp_config", c.amp_config);
    c.sample_rate = j.value("sample_rate", c.sample_rate);
    c.input_seconds = j.value("input_seconds", c.input_seconds);
    c.input_seed = j.value("input_seed", c.input_seed);
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
    if (j.contains("eval")) c.eval = j["eval"].get<EvalConfig>();
}

}  // namespace panama::run
