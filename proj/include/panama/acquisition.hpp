#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "panama/audio.hpp"
#include "panama/autodiff.hpp"
#include "panama/models.hpp"

namespace panama::al {

/// A committee member maps (x [T], g [k]) to a prediction [T] on a graph.
/// Trained models are wrapped with frozen parameters; tests plug in stubs.
using CommitteeMember = std::function<ad::Var(ad::Graph&, ad::Var x, ad::Var g)>;
using Committee = std::vector<CommitteeMember>;

CommitteeMember frozen_member(std::shared_ptr<const nn::Model> model);
Committee make_committee(const nn::ModelSpec& spec, const std::vector<nn::ModelParams>& members);

struct DisagreementWeights {
    double waveform = 1.0;
    double mel = 1.0;
    /// Divide the mel weight by the number of mel cells (n_mels * frames).
    bool normalize_mel = true;

    void validate() const;
};

struct AcquireConfig {
    int restarts = 10;
    int steps = 100;
    double step_size = 0.05;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t excerpt_start = 1024;
    std::size_t excerpt_length = 16384;
    double dedupe_threshold = 0.1;
    /// Keep at most this many proposals per round, strongest first.
    std::optional<int> max_per_round;
    /// When a cap is set and fewer distinct optima were found, run up to this
    /// many further batches of restarts to reach the cap.
    int fill_batches = 0;
    std::uint64_t seed = 0;
    int threads = 0;
    DisagreementWeights weights;
    dsp::MelConfig mel;

    void validate() const;
};

/// w_waveform * (1/M) tr Var_i[f_i] + w_mel * (1/M) tr Var_i[Mel(f_i)], with
/// population variances taken element-wise across the M members.
ad::Var disagreement(ad::Graph& graph, const Committee& committee, ad::Var x, ad::Var g,
                     const DisagreementWeights& weights, const dsp::MelConfig& mel);

/// Convenience evaluation of D at a point, without gradients.
double disagreement_value(const Committee& committee, const std::vector<double>& x, const std::vector<double>& g,
                          const DisagreementWeights& weights, const dsp::MelConfig& mel);

struct AscentResult {
    nn::KnobVector g_star;
    double d_star = 0.0;
    /// Every iterate, starting with g0, each inside [0, 1]^k.
    std::vector<std::vector<double>> trajectory;
    std::vector<double> trajectory_d;
    int iterations = 0;
    bool aborted = false;
    std::string diagnostic;
};

/// Projected Adam ascent on D over the unit box. Returns the best iterate
/// seen. A non-finite objective or gradient aborts with a diagnostic.
AscentResult maximize_disagreement(const Committee& committee, const std::vector<double>& x, const nn::KnobVector& g0,
                                   const AcquireConfig& cfg);

struct Candidate {
    nn::KnobVector g;
    double score = 0.0;
};

/// Greedy leader clustering: visit candidates by descending score (ties keep
/// input order) and accept one iff it lies at least `threshold` away from
/// every accepted vector. Returns indices of accepted candidates in visit order.
std::vector<std::size_t> leader_cluster(const std::vector<Candidate>& candidates, double threshold);
std::vector<nn::KnobVector> dedupe_optima(const std::vector<Candidate>& candidates, double threshold);

struct RestartRecord {
    int id = 0;
    std::vector<double> g0;
    AscentResult result;
    bool accepted = false;
};

struct ProposalBatch {
    std::vector<nn::KnobVector> proposals;
    std::vector<double> scores;
    std::vector<RestartRecord> restarts;

    /// restart, iterations, d_star, g components, accepted, aborted.
    void write_csv(const std::filesystem::path& path) const;
};

/// Restarts from seeded uniform points, ascends each, and dedupes the optima.
/// x is the full input signal; D is evaluated on the configured excerpt.
ProposalBatch propose_batch(const Committee& committee, const std::vector<double>& x, const AcquireConfig& cfg,
                            const std::vector<std::string>& knob_labels);

std::vector<double> excerpt(const std::vector<double>& x, const AcquireConfig& cfg);

void to_json(nlohmann::json& j, const AcquireConfig& c);
void from_json(const nlohmann::json& j, AcquireConfig& c);

}  // namespace panama::al
