#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ampal/acquisition.hpp"
#include "ampal/amp_model.hpp"
#include "ampal/amp_oracle.hpp"
#include "ampal/sampling.hpp"
#include "ampal/training.hpp"

namespace ampal {

struct ExperimentConfig {
    ModelConfig model = ModelConfig::defaults();
    TrainConfig train;
    AcquisitionConfig acquisition;
    OracleConfig oracle;
    int ensemble_size = 4;
    /// Epochs for the per-round ensemble retrains inside the active loop;
    /// 0 means use train.epochs. The final model always uses train.epochs.
    int ensemble_epochs = 0;
    int initial_points = 10;
    int budget = 64;
    int n_val_settings = 64;
    real dry_seconds = 10.0;
    real val_seconds = 30.0;
    /// Optional user-provided audio; synthesized deterministically when empty.
    std::string dry_wav;
    std::string val_wav;
    uint64_t seed = 0;
    std::string output_dir;
    bool parallel = true;

    void validate() const;
};

/// Append-only line-delimited record stream (one JSON object per line).
struct RunLog {
    std::vector<std::string> lines;

    void append(std::string line) { lines.push_back(std::move(line)); }
    void save(const std::string& path) const;
    static RunLog load(const std::string& path);
};

enum class Strategy { Active, Uniform, Beta };
std::string strategy_name(Strategy s);

struct ActiveRunResult {
    LabeledDataset dataset;
    Ensemble ensemble;
    ModelParameters final_model;
    real validation_mse = 0;
    RunLog log;
};

/// The full loop: label `initial_points` uniform starts, then rounds of
/// (retrain ensemble from scratch, propose by disagreement ascent, label the
/// selected candidates) until the dataset holds `budget` pairs, truncating
/// the final batch by highest D. Ends by training a fresh model on the
/// complete dataset and evaluating it.
ActiveRunResult run_active_learning(const ExperimentConfig& config);

struct BaselineRunResult {
    LabeledDataset dataset;
    ModelParameters model;
    real validation_mse = 0;
    RunLog log;
};

/// Sample n knob vectors (uniform or Beta(0.5, 0.5)), label all, train one
/// model, evaluate. n must equal config.budget.
BaselineRunResult run_baseline(Strategy strategy, int n, const ExperimentConfig& config);

/// Mean MSE between model output and oracle output over n_val_settings
/// uniform-random knob vectors; deterministic per seed.
real evaluate(const ModelParameters& model, const AudioSignal& val_signal, int n_val_settings,
              const OracleConfig& oracle, uint64_t seed);

/// Comparison table, flattened-component histogram of actively gathered g
/// vectors, and their Beta fit, aggregated from run logs.
struct Report {
    std::vector<std::pair<std::string, real>> table;  // strategy -> val MSE, ascending
    std::vector<int64_t> histogram;
    bool has_beta_fit = false;
    BetaParams beta_fit;

    std::string to_text() const;
};

Report make_report(const std::vector<RunLog>& logs, int bins = 10);

/// Plain-text config file (one `key value` pair per line, nested keys
/// dotted, e.g. `train.epochs 50`).
ExperimentConfig load_experiment_config(const std::string& path);
void save_experiment_config(const std::string& path, const ExperimentConfig& config);

/// The dry/validation audio a run uses: the configured WAV if set, otherwise
/// the deterministic synthesizer at the oracle sample rate.
AudioSignal experiment_dry_signal(const ExperimentConfig& config);
AudioSignal experiment_validation_signal(const ExperimentConfig& config);

}  // namespace ampal
