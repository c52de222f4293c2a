#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "panama/acquisition.hpp"
#include "panama/amp.hpp"
#include "panama/audio.hpp"
#include "panama/models.hpp"
#include "panama/training.hpp"

namespace panama::run {

enum class Source { InitialRandom, Active, RandomBaseline, BetaBaseline, Manual };
std::string to_string(Source s);
Source source_from_string(const std::string& s);

struct DatasetEntry {
    nn::KnobVector g;
    /// Path of the recorded output, relative to the run directory.
    std::string output;
    int round = 0;
    Source source = Source::InitialRandom;

    bool operator==(const DatasetEntry&) const = default;
};

struct LabeledDataset {
    std::string input_path;
    std::uint32_t input_checksum = 0;
    std::vector<DatasetEntry> entries;

    std::size_t size() const { return entries.size(); }
    void validate() const;
    bool operator==(const LabeledDataset&) const = default;
};

enum class OracleKind { Synthetic, Manual };

struct EvalConfig {
    int clips = 5;
    double clip_seconds = 20.0;
    int settings = 200;
    std::uint64_t seed = 7;
    /// Metric resolutions for the mel column.
    std::vector<dsp::MelConfig> mel_scales = dsp::multiscale_configs(16000);

    void validate() const;
};

struct ExperimentConfig {
    std::string preset = "desk";
    std::vector<std::string> knob_labels = nn::default_knob_labels();
    int rounds = 10;
    int initial_points = 10;
    int ensemble_size = 4;
    nn::ModelSpec ensemble_model;
    nn::ModelSpec final_model;
    train::TrainConfig ensemble_train;
    train::TrainConfig final_train;
    al::AcquireConfig acquire;
    /// Per-round proposal caps, indexed by round - 1. Empty means uncapped.
    std::vector<int> round_caps;
    std::vector<int> checkpoints = {0, 2, 10};
    OracleKind oracle = OracleKind::Synthetic;
    /// Amp definition file; empty selects the built-in default.
    std::string amp_config;
    int sample_rate = 16000;
    double input_seconds = 10.0;
    std::uint64_t input_seed = 1;
    std::uint64_t seed = 0;
    int threads = 0;
    EvalConfig eval;

    int k() const { return static_cast<int>(knob_labels.size()); }
    void validate() const;
};

/// Full-size configuration.
ExperimentConfig desk_preset();
/// Reduced models, segments, and test set for single-core acceptance runs.
ExperimentConfig tiny_preset();
ExperimentConfig preset(const std::string& name);

/// Caps that move a dataset from `initial` points to exactly the sizes listed
/// in `targets` (round, size) after those rounds, spreading each increment
/// evenly with the larger rounds first.
std::vector<int> schedule_caps(int initial, const std::vector<std::pair<int, int>>& targets);

/// Seed streams derived from the experiment root seed.
enum Stream : std::uint64_t { kInitial = 1, kEnsemble = 2, kAcquire = 3, kFinal = 4, kBaseline = 5 };

struct BetaParams {
    double alpha = 0.5;
    double beta = 0.5;
};

/// n vectors in [0,1]^k, uniform or Beta(alpha, beta) per component.
std::vector<nn::KnobVector> sample_settings(int n, const std::vector<std::string>& labels,
                                            std::optional<BetaParams> beta, std::uint64_t seed);

/// Method-of-moments fit with values clipped to [1e-4, 1 - 1e-4].
BetaParams fit_beta(std::span<const double> values);

/// Ground truth y for (x, g).
using Oracle = std::function<std::vector<double>(const std::vector<double>& x, const nn::KnobVector& g)>;
Oracle synthetic_oracle(const amp::SynthAmpConfig& cfg);

struct EvalRow {
    int clip = 0;
    int setting = 0;
    double mse = 0.0;
    double mel = 0.0;
};

struct EvalReport {
    std::string model_id;
    std::size_t dataset_size = 0;
    std::uint64_t seed = 0;
    std::vector<EvalRow> rows;
    double mean_mse = 0.0, median_mse = 0.0, mean_mel = 0.0, median_mel = 0.0;

    void write_csv(const std::filesystem::path& path) const;
};

struct TestSet {
    std::vector<dsp::AudioSignal> clips;
    std::vector<nn::KnobVector> settings;
    /// Clip used for each setting (round-robin).
    std::vector<int> clip_of;
};

/// Clips are rounded to float32 so a saved test set reloads exactly.
TestSet make_test_set(const EvalConfig& cfg, const std::vector<std::string>& labels, int sample_rate);
/// clip<i>.wav files plus settings.json (settings and clip assignment).
void save_test_set(const TestSet& tests, const std::filesystem::path& dir);
TestSet load_test_set(const std::filesystem::path& dir);

using Predictor = std::function<std::vector<double>(const std::vector<double>& x, const nn::KnobVector& g)>;

/// Scores every (clip, setting) pair against the oracle.
EvalReport evaluate(const Predictor& model, const TestSet& tests, const Oracle& oracle,
                    const std::vector<dsp::MelConfig>& scales);

double median(std::vector<double> v);

/// Run directory layout and persisted state.
struct RunState {
    int completed_round = -1;
    std::vector<int> finals_done;
    /// Settings proposed but not yet labeled.
    std::optional<int> pending_round;
    Source pending_source = Source::Active;
    std::vector<nn::KnobVector> pending;
    bool complete = false;
};

enum class RunStatus { Complete, Stopped, AwaitingIngest };

struct RunOptions {
    /// Return once this round is labeled and its checkpoint (if any) trained.
    std::optional<int> stop_after_round;
    /// Return as soon as a new batch of proposals is pending.
    bool stop_at_pending = false;
    /// Progress messages; null to stay quiet.
    std::function<void(const std::string&)> log;
};

class RunDir {
public:
    explicit RunDir(std::filesystem::path root);

    const std::filesystem::path& root() const { return root_; }
    std::filesystem::path config_path() const { return root_ / "config.json"; }
    std::filesystem::path dataset_path() const { return root_ / "dataset.json"; }
    std::filesystem::path state_path() const { return root_ / "state.json"; }
    std::filesystem::path input_path() const { return root_ / "input" / "x.wav"; }
    std::filesystem::path round_dir(int r) const { return root_ / "rounds" / std::to_string(r); }
    std::filesystem::path final_model_path(int r) const;
    std::filesystem::path reports_dir() const { return root_ / "reports"; }

    ExperimentConfig load_config() const;
    void save_config(const ExperimentConfig& cfg) const;
    LabeledDataset load_dataset() const;
    void save_dataset(const LabeledDataset& d) const;
    RunState load_state() const;
    void save_state(const RunState& s) const;

private:
    std::filesystem::path root_;
};

/// Exclusive lock on a run directory, released on destruction. A lock left by
/// a process that no longer exists is taken over.
class RunLock {
public:
    explicit RunLock(const std::filesystem::path& dir);
    ~RunLock();
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

private:
    std::filesystem::path path_;
};

/// Creates a run directory holding config.json. Fails if one already exists.
void init_run(const std::filesystem::path& dir, const ExperimentConfig& cfg);

/// Loads x from the run directory, generating it on first use.
dsp::AudioSignal run_input(const RunDir& dir, const ExperimentConfig& cfg);

amp::SynthAmpConfig amp_for(const ExperimentConfig& cfg);

/// Active learning loop, resuming from the persisted state.
RunStatus run_active_learning(const std::filesystem::path& dir, const RunOptions& opts = {});

/// Training examples for every dataset entry, read back from disk.
std::vector<train::Example> load_examples(const RunDir& dir, const LabeledDataset& d);

/// Labels the pending proposals with the synthetic amp.
void label_pending_synthetic(const std::filesystem::path& dir);
/// Writes a request manifest for the pending proposals.
amp::RequestManifest export_pending(const std::filesystem::path& dir, const std::filesystem::path& out);
/// Moves recordings for the pending proposals into the dataset.
void ingest_pending(const std::filesystem::path& dir, const std::filesystem::path& recordings);

/// Trains the final architecture on the current dataset.
nn::Model train_final(const std::filesystem::path& dir, int round, const RunOptions& opts = {});

struct StrategyResult {
    std::string strategy;
    std::uint64_t seed = 0;
    std::size_t dataset_size = 0;
    int round = 0;
    EvalReport report;
    /// Ensemble samples per second (active strategies only).
    double ensemble_throughput = 0.0;
};

struct AblationConfig {
    int budget = 75;
    std::vector<std::uint64_t> seeds = {0, 1, 2};
    std::vector<std::string> strategies = {"active", "uniform", "beta"};
    /// Also evaluate the active run's earlier checkpoints.
    bool checkpoints = true;
    /// Add the WaveNet-ensemble and LSTM-final combinations on the first seed.
    bool architecture_study = false;
    std::function<void(const std::string&)> log;
};

struct AblationResult {
    std::vector<StrategyResult> runs;
    /// Rows keyed by strategy; medians over seeds at the final budget.
    std::vector<std::string> strategy_order;
    double median_mse(const std::string& strategy, std::optional<int> round = {}) const;
    double median_mel(const std::string& strategy, std::optional<int> round = {}) const;
};

AblationResult run_ablation(const ExperimentConfig& base, const AblationConfig& acfg, const std::filesystem::path& dir);
void write_ablation_csv(const AblationResult& r, const std::filesystem::path& path);
void write_architecture_csv(const AblationResult& r, const std::filesystem::path& path);

struct HistogramReport {
    std::vector<double> edges;
    std::vector<std::size_t> counts;
    std::size_t values = 0;
    double near_extreme_fraction = 0.0;
    std::optional<BetaParams> fit;
};

/// Histogram of every component of every actively acquired setting.
HistogramReport g_histogram(const LabeledDataset& d, int bins = 10, double extreme_margin = 0.1);
void write_histogram_csv(const HistogramReport& h, const std::filesystem::path& path);

void to_json(nlohmann::json& j, const LabeledDataset& d);
void from_json(const nlohmann::json& j, LabeledDataset& d);
void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);
void to_json(nlohmann::json& j, const EvalConfig& c);
void from_json(const nlohmann::json& j, EvalConfig& c);

}  // namespace panama::run
