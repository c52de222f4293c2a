#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "panama/experiment.hpp"

using namespace panama;
namespace fs = std::filesystem;

namespace {

std::function<void(const std::string&)> logger(bool quiet) {
    if (quiet) return nullptr;
    const auto start = std::chrono::steady_clock::now();
    return [start](const std::string& msg) {
        const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::cerr << "[" << std::fixed << std::setprecision(1) << t << "s] " << msg << std::endl;
    };
}

run::ExperimentConfig load_config_arg(const std::string& arg) {
    if (arg == "desk" || arg == "tiny") return run::preset(arg);
    std::ifstream f(arg);
    if (!f) throw std::runtime_error("cannot open config " + arg);
    run::ExperimentConfig c = nlohmann::json::parse(f).get<run::ExperimentConfig>();
    c.validate();
    return c;
}

const char* status_name(run::RunStatus s) {
    switch (s) {
        case run::RunStatus::Complete: return "complete";
        case run::RunStatus::Stopped: return "stopped";
        case run::RunStatus::AwaitingIngest: return "awaiting-ingest";
    }
    return "unknown";
}

void print_pending(const fs::path& dir) {
    const auto state = run::RunDir(dir).load_state();
    if (!state.pending_round) return;
    std::cout << "round " << *state.pending_round << ": " << state.pending.size() << " pending settings\n";
    for (const auto& g : state.pending) std::cout << nlohmann::json(g.values).dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Knob-conditioned amp modeling with disagreement-driven data collection"};
    app.require_subcommand(1);
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "Suppress progress messages");

    std::string dir, preset = "desk", config_file, oracle, out, recordings;
    std::optional<std::uint64_t> seed;
    std::optional<int> rounds, stop_after, round;
    std::optional<int> threads;

    auto* init = app.add_subcommand("init", "Create a run directory with a full config.json");
    init->add_option("dir", dir, "Run directory")->required();
    init->add_option("--preset", preset, "Base preset")->check(CLI::IsMember({"desk", "tiny"}));
    init->add_option("--config", config_file, "JSON config overriding the preset")->check(CLI::ExistingFile);
    init->add_option("--seed", seed, "Root seed");
    init->add_option("--rounds", rounds, "Number of acquisition rounds");
    init->add_option("--oracle", oracle, "Labeler")->check(CLI::IsMember({"synthetic", "manual"}));
    init->add_option("--threads", threads, "Worker threads (0 = all cores)");

    auto* al_run = app.add_subcommand("al-run", "Run or resume the active learning loop");
    al_run->add_option("dir", dir, "Run directory")->required()->check(CLI::ExistingDirectory);
    al_run->add_option("--stop-after-round", stop_after, "Return once this round is labeled");

    auto* propose = app.add_subcommand("propose", "Advance to the next batch of proposed settings");
    propose->add_option("dir", dir, "Run directory")->required()->check(CLI::ExistingDirectory);

    auto* export_req = app.add_subcommand("export-requests", "Write a request manifest for the pending settings");
    export_req->add_option("dir", dir, "Run directory")->required()->check(CLI::ExistingDirectory);
    export_req->add_option("--out", out, "Request directory")->required();

    auto* ingest = app.add_subcommand("ingest", "Add recordings for the pending settings to the dataset");
    ingest->add_option("dir", dir, "Run directory")->required()->check(CLI::ExistingDirectory);
    ingest->add_option("--recordings", recordings, "Directory holding the manifest and recordings")
        ->required()
        ->check(CLI::ExistingDirectory);

    auto* label = app.add_subcommand("label-synth", "Label the pending settings with the synthetic amp");
    label->add_option("dir", dir, "Run directory")->required()->check(CLI::ExistingDirectory);

    auto* train_final = app.add_subcommand("train-final", "Train the final model on the dataset up to a round");
    train_final->add_option("dir", dir, "Run directory")->required()->check(CLI::ExistingDirectory);
    train_final->add_option("--round", round, "Last dataset round to include")->required();

    auto* eval = app.add_subcommand("eval", "Score a final model on the test set");
    eval->add_option("dir", dir, "Run directory")->required()->check(CLI::ExistingDirectory);
    eval->add_option("--round", round, "Checkpoint round of the final model")->required();
    eval->add_option("--out", out, "CSV path (default reports/eval_round<r>.csv)");

    int budget = 75;
    std::vector<std::uint64_t> seeds = {0, 1, 2};
    bool architectures = false, no_checkpoints = false;
    auto* ablate = app.add_subcommand("ablate", "Compare active, uniform and beta data collection");
    ablate->add_option("--config", config_file, "Preset name or JSON config")->default_str("desk");
    ablate->add_option("--out", out, "Output directory")->required();
    ablate->add_option("--budget", budget, "Final dataset size")->capture_default_str();
    ablate->add_option("--seeds", seeds, "Root seeds")->delimiter(',')->capture_default_str();
    ablate->add_flag("--architectures", architectures, "Also run the ensemble/final architecture study");
    ablate->add_flag("--no-checkpoints", no_checkpoints, "Skip evaluation of intermediate checkpoints");

    int bins = 10;
    auto* report = app.add_subcommand("report", "Histogram of actively acquired knob values");
    report->add_option("dir", dir, "Run directory")->required()->check(CLI::ExistingDirectory);
    report->add_option("--out", out, "CSV path (default reports/g_histogram.csv)");
    report->add_option("--bins", bins, "Histogram bins")->capture_default_str()->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    const auto log = logger(quiet);
    try {
        if (*init) {
            run::ExperimentConfig cfg = config_file.empty() ? run::preset(preset) : load_config_arg(config_file);
            if (seed) cfg.seed = *seed;
            if (rounds) {
                cfg.rounds = *rounds;
                std::erase_if(cfg.checkpoints, [&](int c) { return c > cfg.rounds; });
                if (cfg.round_caps.size() > static_cast<std::size_t>(cfg.rounds))
                    cfg.round_caps.resize(static_cast<std::size_t>(cfg.rounds));
            }
            if (!oracle.empty()) cfg.oracle = oracle == "manual" ? run::OracleKind::Manual : run::OracleKind::Synthetic;
            if (threads) cfg.threads = *threads;
            run::init_run(dir, cfg);
            std::cout << "initialized " << dir << "\n";
        } else if (*al_run) {
            run::RunOptions opts;
            opts.log = log;
            opts.stop_after_round = stop_after;
            const auto status = run::run_active_learning(dir, opts);
            std::cout << "status: " << status_name(status) << "\n";
            if (status == run::RunStatus::AwaitingIngest) {
                print_pending(dir);
                std::cout << "next: export-requests, record, then ingest\n";
            }
        } else if (*propose) {
            run::RunOptions opts;
            opts.log = log;
            opts.stop_at_pending = true;
            const auto status = run::run_active_learning(dir, opts);
            std::cout << "status: " << status_name(status) << "\n";
            print_pending(dir);
        } else if (*export_req) {
            const auto m = run::export_pending(dir, out);
            std::cout << "wrote " << amp::manifest_path(out, m.round).string() << " with " << m.requests.size()
                      << " requests\n";
        } else if (*ingest) {
            run::ingest_pending(dir, recordings);
            std::cout << "ingested; dataset has " << run::RunDir(dir).load_dataset().size() << " entries\n";
        } else if (*label) {
            run::label_pending_synthetic(dir);
            std::cout << "labeled; dataset has " << run::RunDir(dir).load_dataset().size() << " entries\n";
        } else if (*train_final) {
            run::RunOptions opts;
            opts.log = log;
            run::train_final(dir, *round, opts);
            std::cout << "saved " << run::RunDir(dir).final_model_path(*round).string() << "\n";
        } else if (*eval) {
            const run::RunDir rd(dir);
            const auto cfg = rd.load_config();
            const auto tests = run::make_test_set(cfg.eval, cfg.knob_labels, cfg.sample_rate);
            if (!fs::exists(rd.root() / "test_set" / "settings.json")) run::save_test_set(tests, rd.root() / "test_set");
            const auto model = nn::load_model(rd.final_model_path(*round));
            auto rep = run::evaluate([&](const std::vector<double>& x,
                                         const nn::KnobVector& g) { return nn::predict(model, x, g); },
                                     tests, run::synthetic_oracle(run::amp_for(cfg)), cfg.eval.mel_scales);
            const fs::path csv = out.empty() ? rd.reports_dir() / ("eval_round" + std::to_string(*round) + ".csv") : fs::path(out);
            rep.write_csv(csv);
            std::cout << std::setprecision(6) << "test mse " << rep.mean_mse << " (median " << rep.median_mse
                      << "), test mel " << rep.mean_mel << " (median " << rep.median_mel << ")\nwrote " << csv.string()
                      << "\n";
        } else if (*ablate) {
            const auto cfg = load_config_arg(config_file.empty() ? "desk" : config_file);
            run::AblationConfig a;
            a.budget = budget;
            a.seeds = seeds;
            a.architecture_study = architectures;
            a.checkpoints = !no_checkpoints;
            a.log = log;
            const auto r = run::run_ablation(cfg, a, out);
            run::write_ablation_csv(r, fs::path(out) / "ablation.csv");
            if (architectures) run::write_architecture_csv(r, fs::path(out) / "architectures.csv");
            std::cout << std::setprecision(6);
            for (const auto& s : r.strategy_order)
                std::cout << s << ": median test mse " << r.median_mse(s, s == "active" ? std::optional<int>(cfg.rounds) : std::nullopt)
                          << ", median test mel " << r.median_mel(s, s == "active" ? std::optional<int>(cfg.rounds) : std::nullopt)
                          << "\n";
            std::cout << "wrote " << (fs::path(out) / "ablation.csv").string() << "\n";
        } else if (*report) {
            const run::RunDir rd(dir);
            const run::LabeledDataset d = fs::exists(rd.dataset_path()) ? rd.load_dataset() : run::LabeledDataset{};
            const auto h = run::g_histogram(d, bins);
            const fs::path csv = out.empty() ? rd.reports_dir() / "g_histogram.csv" : fs::path(out);
            run::write_histogram_csv(h, csv);
            std::cout << h.values << " active knob values, " << std::setprecision(4) << 100.0 * h.near_extreme_fraction
                      << "% within 0.1 of 0 or 1";
            if (h.fit) std::cout << ", beta fit alpha " << h.fit->alpha << " beta " << h.fit->beta;
            std::cout << "\nwrote " << csv.string() << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
