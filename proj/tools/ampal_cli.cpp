// ampal command-line driver: active-learning runs, baselines, training,
// evaluation and reporting for the parametric amp model.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "ampal/experiments.hpp"
#include "ampal/persistence.hpp"
#include "ampal/sampling.hpp"
#include "ampal/signals.hpp"

using namespace ampal;

namespace {

struct ConfigOptions {
    std::string config_file;
    uint64_t seed = 0;
    bool seed_set = false;
    int budget = -1;
    std::string output_dir;
    bool single_thread = false;
};

void add_config_options(CLI::App* cmd, ConfigOptions& opts) {
    cmd->add_option("--config", opts.config_file, "experiment config file (key value lines)");
    cmd->add_option("--seed", opts.seed, "run seed")->each([&](const std::string&) {
        opts.seed_set = true;
    });
    cmd->add_option("--budget", opts.budget, "total datapoint budget");
    cmd->add_option("--output-dir", opts.output_dir, "directory for run logs and artifacts");
    cmd->add_flag("--single-thread", opts.single_thread,
                  "disable parallel training/ascent (bit-reproducible)");
}

ExperimentConfig resolve_config(const ConfigOptions& opts) {
    ExperimentConfig config;
    if (!opts.config_file.empty()) config = load_experiment_config(opts.config_file);
    if (opts.seed_set) config.seed = opts.seed;
    if (opts.budget > 0) config.budget = opts.budget;
    if (!opts.output_dir.empty()) config.output_dir = opts.output_dir;
    if (opts.single_thread) config.parallel = false;
    return config;
}

std::vector<real> read_sample_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open sample file: " + path);
    std::vector<real> values;
    real v;
    while (is >> v) values.push_back(v);
    return values;
}

std::vector<real> active_components_from_log(const std::string& path) {
    const auto logs = std::vector<RunLog>{RunLog::load(path)};
    const auto report = make_report(logs);
    // Re-extract the raw components: make_report only keeps the histogram,
    // so parse the label records directly.
    std::vector<real> flat;
    for (const auto& line : logs[0].lines) {
        const auto rec = nlohmann::json::parse(line);
        if (rec.value("event", "") != "label") continue;
        for (const auto& v : rec.at("g")) flat.push_back(v.get<real>());
    }
    (void)report;
    return flat;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"parametric amp modeling with disagreement-driven data selection"};
    app.require_subcommand(1);

    ConfigOptions al_opts;
    auto* run_al = app.add_subcommand("run-al", "run the full active-learning loop");
    add_config_options(run_al, al_opts);

    ConfigOptions bl_opts;
    std::string bl_strategy = "uniform";
    int bl_n = -1;
    auto* baseline = app.add_subcommand("baseline", "run a non-active sampling baseline");
    add_config_options(baseline, bl_opts);
    baseline->add_option("--strategy", bl_strategy, "uniform or beta")
        ->check(CLI::IsMember({"uniform", "beta"}));
    baseline->add_option("-n,--n", bl_n, "number of datapoints (default: budget)");

    ConfigOptions tr_opts;
    std::string tr_dataset, tr_out = "model.ckpt";
    uint64_t tr_seed = 0;
    auto* train = app.add_subcommand("train", "train one model on a saved dataset");
    add_config_options(train, tr_opts);
    train->add_option("--dataset", tr_dataset, "dataset directory")->required();
    train->add_option("--out", tr_out, "checkpoint output path");
    train->add_option("--train-seed", tr_seed, "init seed for the model");

    ConfigOptions ev_opts;
    std::string ev_ckpt;
    int ev_settings = 64;
    uint64_t ev_seed = 0;
    auto* eval_cmd = app.add_subcommand("eval", "validation MSE of a checkpoint vs the oracle");
    add_config_options(eval_cmd, ev_opts);
    eval_cmd->add_option("--checkpoint", ev_ckpt, "model checkpoint")->required();
    eval_cmd->add_option("--n-settings", ev_settings, "number of random validation settings");
    eval_cmd->add_option("--eval-seed", ev_seed, "seed for validation settings");

    std::string fb_input, fb_log;
    auto* fit_cmd = app.add_subcommand("fit-beta", "max-likelihood Beta fit of sample values");
    fit_cmd->add_option("--input", fb_input, "text file of samples in [0,1], whitespace-separated");
    fit_cmd->add_option("--log", fb_log, "run log; fits the flattened labeled g components");

    std::string h_input, h_log;
    int h_bins = 10;
    auto* hist_cmd = app.add_subcommand("hist", "histogram of sample values over [0,1]");
    hist_cmd->add_option("--input", h_input, "text file of samples");
    hist_cmd->add_option("--log", h_log, "run log; uses the flattened labeled g components");
    hist_cmd->add_option("--bins", h_bins, "bin count");

    std::vector<std::string> rp_logs;
    auto* report_cmd = app.add_subcommand("report", "comparison table across run logs");
    report_cmd->add_option("--log", rp_logs, "run log files (repeatable)")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_al->parsed()) {
            auto config = resolve_config(al_opts);
            auto result = run_active_learning(config);
            std::printf("dataset_size %zu\n", result.dataset.size());
            std::printf("validation_mse %.10g\n", static_cast<double>(result.validation_mse));
        } else if (baseline->parsed()) {
            auto config = resolve_config(bl_opts);
            const Strategy strategy =
                bl_strategy == "uniform" ? Strategy::Uniform : Strategy::Beta;
            const int n = bl_n > 0 ? bl_n : config.budget;
            auto result = run_baseline(strategy, n, config);
            std::printf("dataset_size %zu\n", result.dataset.size());
            std::printf("validation_mse %.10g\n", static_cast<double>(result.validation_mse));
        } else if (train->parsed()) {
            auto config = resolve_config(tr_opts);
            auto dataset = load_dataset(tr_dataset);
            TrainConfig tc = config.train;
            tc.log_progress = true;
            auto [model, history] = train_model(init_model(config.model, tr_seed), dataset, tc);
            Checkpoint ckpt;
            ckpt.params = std::move(model);
            ckpt.seed = tr_seed;
            ckpt.epochs = tc.epochs;
            ckpt.final_loss = history.empty() ? real(0) : history.back();
            save_checkpoint(tr_out, ckpt);
            std::printf("checkpoint %s\n", tr_out.c_str());
        } else if (eval_cmd->parsed()) {
            auto config = resolve_config(ev_opts);
            auto ckpt = load_checkpoint(ev_ckpt);
            const auto val = experiment_validation_signal(config);
            const real v = evaluate(ckpt.params, val, ev_settings, config.oracle, ev_seed);
            std::printf("validation_mse %.10g\n", static_cast<double>(v));
        } else if (fit_cmd->parsed()) {
            std::vector<real> samples = !fb_input.empty() ? read_sample_file(fb_input)
                                                          : active_components_from_log(fb_log);
            const auto params = fit_beta(samples);
            std::printf("alpha %.6g\nbeta %.6g\n", static_cast<double>(params.alpha),
                        static_cast<double>(params.beta));
        } else if (hist_cmd->parsed()) {
            std::vector<real> samples = !h_input.empty() ? read_sample_file(h_input)
                                                         : active_components_from_log(h_log);
            std::vector<KnobVector> wrapped{KnobVector{samples}};
            for (size_t i = 0; const auto count : component_histogram(wrapped, h_bins)) {
                std::printf("bin %zu %lld\n", i++, static_cast<long long>(count));
            }
        } else if (report_cmd->parsed()) {
            std::vector<RunLog> logs;
            for (const auto& path : rp_logs) logs.push_back(RunLog::load(path));
            std::fputs(make_report(logs).to_text().c_str(), stdout);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
