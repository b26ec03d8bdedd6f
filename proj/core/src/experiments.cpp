#include "ampal/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "ampal/persistence.hpp"
#include "ampal/signals.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ampal {

namespace {

// splitmix64; derives independent seeds for sub-tasks of one run.
uint64_t mix_seed(uint64_t seed, uint64_t a, uint64_t b) {
    uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (a + 1) + 0xBF58476D1CE4E5B9ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

json g_to_json(const KnobVector& g) {
    json a = json::array();
    for (real v : g.values) a.push_back(v);
    return a;
}

KnobVector g_from_json(const json& a) {
    KnobVector g;
    for (const auto& v : a) g.values.push_back(v.get<real>());
    return g;
}

bool already_labeled(const LabeledDataset& dataset, const KnobVector& g) {
    for (const auto& [existing, wet] : dataset.pairs) {
        if (existing.linf_distance(g) <= real(1e-9)) return true;
    }
    return false;
}

void write_outputs(const ExperimentConfig& config, const std::string& prefix, const RunLog& log,
                   const LabeledDataset& dataset, const ModelParameters& model, uint64_t seed) {
    if (config.output_dir.empty()) return;
    fs::create_directories(config.output_dir);
    const fs::path dir(config.output_dir);
    log.save((dir / (prefix + "_log.jsonl")).string());
    save_dataset((dir / (prefix + "_dataset")).string(), dataset);
    Checkpoint ckpt;
    ckpt.params = model;
    ckpt.seed = seed;
    ckpt.epochs = config.train.epochs;
    save_checkpoint((dir / (prefix + "_model.ckpt")).string(), ckpt);
}

}  // namespace

void ExperimentConfig::validate() const {
    model.validate();
    oracle.validate();
    if (ensemble_size < 2) throw std::invalid_argument("ExperimentConfig: ensemble_size must be >= 2");
    if (ensemble_epochs < 0) {
        throw std::invalid_argument("ExperimentConfig: ensemble_epochs must be >= 0");
    }
    if (initial_points < 1) throw std::invalid_argument("ExperimentConfig: initial_points must be >= 1");
    if (initial_points > budget) {
        throw std::invalid_argument("ExperimentConfig: initial_points exceeds budget");
    }
    if (n_val_settings < 1) throw std::invalid_argument("ExperimentConfig: n_val_settings must be >= 1");
    if (model.knob_count != oracle.knob_count()) {
        throw std::invalid_argument("ExperimentConfig: model knob_count differs from oracle knobs");
    }
}

void RunLog::save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write run log: " + path);
    for (const auto& line : lines) os << line << "\n";
}

RunLog RunLog::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read run log: " + path);
    RunLog log;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty()) log.lines.push_back(line);
    }
    return log;
}

std::string strategy_name(Strategy s) {
    switch (s) {
        case Strategy::Active: return "active";
        case Strategy::Uniform: return "uniform";
        case Strategy::Beta: return "beta";
    }
    return "unknown";
}

AudioSignal experiment_dry_signal(const ExperimentConfig& config) {
    if (!config.dry_wav.empty()) return read_wav(config.dry_wav);
    return make_dry_signal(config.oracle.sample_rate, config.dry_seconds,
                           mix_seed(config.seed, 11, 1));
}

AudioSignal experiment_validation_signal(const ExperimentConfig& config) {
    if (!config.val_wav.empty()) return read_wav(config.val_wav);
    return make_dry_signal(config.oracle.sample_rate, config.val_seconds,
                           mix_seed(config.seed, 11, 2));
}

real evaluate(const ModelParameters& model, const AudioSignal& val_signal, int n_val_settings,
              const OracleConfig& oracle, uint64_t seed) {
    if (n_val_settings < 1) throw std::invalid_argument("evaluate: n_val_settings must be >= 1");
    const auto settings = sample_uniform(n_val_settings, oracle.knob_count(), seed);
    real total = 0;
    for (const auto& g : settings) {
        total += mse(forward(model, val_signal, g), simulate_amp(val_signal, g, oracle));
    }
    return total / static_cast<real>(n_val_settings);
}

ActiveRunResult run_active_learning(const ExperimentConfig& config) {
    config.validate();
    ActiveRunResult result;
    result.dataset.x = experiment_dry_signal(config);

    auto& log = result.log;
    log.append(json{{"event", "config"},
                    {"strategy", "active"},
                    {"seed", config.seed},
                    {"budget", config.budget},
                    {"initial_points", config.initial_points},
                    {"ensemble_size", config.ensemble_size}}
                   .dump());

    for (const auto& g :
         sample_uniform(config.initial_points, config.model.knob_count, mix_seed(config.seed, 1, 0))) {
        label(result.dataset, g, config.oracle);
        log.append(json{{"event", "label"}, {"source", "initial"}, {"round", 0},
                        {"g", g_to_json(g)}}.dump());
    }

    int round = 0;
    while (static_cast<int>(result.dataset.size()) < config.budget) {
        ++round;

        std::vector<uint64_t> seeds;
        for (int i = 0; i < config.ensemble_size; ++i) {
            seeds.push_back(mix_seed(config.seed, static_cast<uint64_t>(round),
                                     static_cast<uint64_t>(i) + 100));
        }
        TrainConfig ensemble_train = config.train;
        if (config.ensemble_epochs > 0) ensemble_train.epochs = config.ensemble_epochs;
        result.ensemble = train_ensemble(result.dataset, config.ensemble_size, seeds,
                                         ensemble_train, config.model, config.parallel);

        AcquisitionConfig acq = config.acquisition;
        acq.parallel = config.parallel;
        const auto proposal =
            propose(result.ensemble, result.dataset.x, acq, mix_seed(config.seed, 2, round));

        const int remaining = config.budget - static_cast<int>(result.dataset.size());
        std::vector<Candidate> chosen;
        for (const auto& c : proposal.selected) {
            if (static_cast<int>(chosen.size()) >= remaining) break;
            if (already_labeled(result.dataset, c.g)) continue;
            chosen.push_back(c);
        }

        json selected_json = json::array();
        for (const auto& c : chosen) {
            label(result.dataset, c.g, config.oracle);
            selected_json.push_back(json{{"g", g_to_json(c.g)}, {"d", c.disagreement}});
            log.append(json{{"event", "label"}, {"source", "acquired"}, {"round", round},
                            {"g", g_to_json(c.g)}, {"d", c.disagreement}}.dump());
        }
        if (chosen.empty()) {
            // All restarts landed on already-labeled settings; spend the
            // round's label on a fresh uniform draw to keep making progress.
            uint64_t fallback_seed = mix_seed(config.seed, 3, round);
            for (;;) {
                auto g = sample_uniform(1, config.model.knob_count, fallback_seed)[0];
                if (!already_labeled(result.dataset, g)) {
                    label(result.dataset, g, config.oracle);
                    log.append(json{{"event", "label"}, {"source", "fallback"}, {"round", round},
                                    {"g", g_to_json(g)}}.dump());
                    break;
                }
                ++fallback_seed;
            }
        }

        log.append(json{{"event", "round"},
                        {"round", round},
                        {"dataset_size", result.dataset.size()},
                        {"selected", selected_json}}
                       .dump());
    }

    const uint64_t final_seed = mix_seed(config.seed, 4, 0);
    TrainConfig final_train = config.train;
    final_train.shuffle_seed = mix_seed(config.seed, 4, 1);
    auto [final_model, history] =
        train_model(init_model(config.model, final_seed), result.dataset, final_train);
    result.final_model = std::move(final_model);

    result.validation_mse =
        evaluate(result.final_model, experiment_validation_signal(config), config.n_val_settings,
                 config.oracle, mix_seed(config.seed, 5, 0));
    log.append(json{{"event", "validation"},
                    {"strategy", "active"},
                    {"mse", result.validation_mse},
                    {"final_train_loss", history.empty() ? real(0) : history.back()}}
                   .dump());

    write_outputs(config, "active", log, result.dataset, result.final_model, final_seed);
    return result;
}

BaselineRunResult run_baseline(Strategy strategy, int n, const ExperimentConfig& config) {
    config.validate();
    if (strategy == Strategy::Active) {
        throw std::invalid_argument("run_baseline: use run_active_learning for the active strategy");
    }
    if (n < 1) throw std::invalid_argument("run_baseline: n must be >= 1");
    if (n != config.budget) {
        throw std::invalid_argument("run_baseline: n must equal the configured budget");
    }

    BaselineRunResult result;
    result.dataset.x = experiment_dry_signal(config);
    auto& log = result.log;
    const std::string name = strategy_name(strategy);
    log.append(json{{"event", "config"}, {"strategy", name}, {"seed", config.seed},
                    {"budget", config.budget}}.dump());

    const uint64_t sample_seed = mix_seed(config.seed, 6, 0);
    const auto settings =
        strategy == Strategy::Uniform
            ? sample_uniform(n, config.model.knob_count, sample_seed)
            : sample_beta(n, config.model.knob_count, BetaParams{0.5, 0.5}, sample_seed);
    for (const auto& g : settings) {
        label(result.dataset, g, config.oracle, /*allow_duplicates=*/true);
        log.append(json{{"event", "label"}, {"source", name}, {"round", 0},
                        {"g", g_to_json(g)}}.dump());
    }

    const uint64_t train_seed = mix_seed(config.seed, 7, 0);
    TrainConfig train_cfg = config.train;
    train_cfg.shuffle_seed = mix_seed(config.seed, 7, 1);
    auto [model, history] =
        train_model(init_model(config.model, train_seed), result.dataset, train_cfg);
    result.model = std::move(model);

    result.validation_mse =
        evaluate(result.model, experiment_validation_signal(config), config.n_val_settings,
                 config.oracle, mix_seed(config.seed, 5, 0));
    log.append(json{{"event", "validation"},
                    {"strategy", name},
                    {"mse", result.validation_mse},
                    {"final_train_loss", history.empty() ? real(0) : history.back()}}
                   .dump());

    write_outputs(config, name, log, result.dataset, result.model, train_seed);
    return result;
}

Report make_report(const std::vector<RunLog>& logs, int bins) {
    if (logs.empty()) throw std::invalid_argument("make_report: no run logs");
    std::map<std::string, std::vector<real>> mses;
    std::vector<KnobVector> active_gs;

    for (const auto& log : logs) {
        std::string strategy = "unknown";
        for (const auto& line : log.lines) {
            const json rec = json::parse(line);
            const std::string event = rec.value("event", "");
            if (event == "config") {
                strategy = rec.value("strategy", "unknown");
            } else if (event == "validation") {
                mses[rec.value("strategy", strategy)].push_back(rec.at("mse").get<real>());
            } else if (event == "label" && strategy == "active") {
                active_gs.push_back(g_from_json(rec.at("g")));
            }
        }
    }

    Report report;
    for (auto& [name, values] : mses) {
        std::sort(values.begin(), values.end());
        const size_t n = values.size();
        const real median =
            n % 2 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2;
        report.table.emplace_back(name, median);
    }
    std::sort(report.table.begin(), report.table.end(),
              [](const auto& a, const auto& b) { return a.second < b.second; });

    if (!active_gs.empty()) {
        report.histogram = component_histogram(active_gs, bins);
        std::vector<real> flat;
        for (const auto& g : active_gs) {
            flat.insert(flat.end(), g.values.begin(), g.values.end());
        }
        try {
            report.beta_fit = fit_beta(flat);
            report.has_beta_fit = true;
        } catch (const std::exception&) {
            report.has_beta_fit = false;
        }
    }
    return report;
}

std::string Report::to_text() const {
    std::ostringstream os;
    os << "strategy          val_mse\n";
    for (const auto& [name, value] : table) {
        os << name;
        for (size_t i = name.size(); i < 18; ++i) os << ' ';
        os << std::scientific << value << "\n";
    }
    if (!histogram.empty()) {
        os << "\nactive g-component histogram (" << histogram.size() << " bins over [0,1]):\n";
        for (size_t i = 0; i < histogram.size(); ++i) {
            os << "bin " << i << " " << histogram[i] << "\n";
        }
    }
    if (has_beta_fit) {
        os << "\nbeta fit: alpha " << beta_fit.alpha << " beta " << beta_fit.beta << "\n";
    }
    return os.str();
}

namespace {

std::vector<std::pair<std::string, std::string>> read_kv_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file: " + path);
    std::vector<std::pair<std::string, std::string>> kv;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto sp = line.find(' ');
        if (sp == std::string::npos) {
            throw std::runtime_error("malformed config line: " + line);
        }
        kv.emplace_back(line.substr(0, sp), line.substr(sp + 1));
    }
    return kv;
}

}  // namespace

ExperimentConfig load_experiment_config(const std::string& path) {
    ExperimentConfig c;
    for (const auto& [key, value] : read_kv_file(path)) {
        std::istringstream vs(value);
        if (key == "model.channels") vs >> c.model.channels;
        else if (key == "model.kernel_width") vs >> c.model.kernel_width;
        else if (key == "model.knob_count") vs >> c.model.knob_count;
        else if (key == "model.use_residual") vs >> c.model.use_residual;
        else if (key == "model.use_skip") vs >> c.model.use_skip;
        else if (key == "model.dilations") {
            c.model.dilation_schedule.clear();
            int d;
            while (vs >> d) c.model.dilation_schedule.push_back(d);
            vs.clear();
        }
        else if (key == "train.epochs") vs >> c.train.epochs;
        else if (key == "train.chunk_length") vs >> c.train.chunk_length;
        else if (key == "train.batch_size") vs >> c.train.batch_size;
        else if (key == "train.lr") vs >> c.train.lr;
        else if (key == "train.final_lr_fraction") vs >> c.train.final_lr_fraction;
        else if (key == "acquisition.restarts") vs >> c.acquisition.restarts;
        else if (key == "acquisition.ascent_steps") vs >> c.acquisition.ascent_steps;
        else if (key == "acquisition.ascent_lr") vs >> c.acquisition.ascent_lr;
        else if (key == "acquisition.cluster_radius") vs >> c.acquisition.cluster_radius;
        else if (key == "acquisition.probe_length") vs >> c.acquisition.probe_length;
        else if (key == "oracle.sample_rate") vs >> c.oracle.sample_rate;
        else if (key == "ensemble_size") vs >> c.ensemble_size;
        else if (key == "ensemble_epochs") vs >> c.ensemble_epochs;
        else if (key == "initial_points") vs >> c.initial_points;
        else if (key == "budget") vs >> c.budget;
        else if (key == "n_val_settings") vs >> c.n_val_settings;
        else if (key == "dry_seconds") vs >> c.dry_seconds;
        else if (key == "val_seconds") vs >> c.val_seconds;
        else if (key == "dry_wav") c.dry_wav = value;
        else if (key == "val_wav") c.val_wav = value;
        else if (key == "seed") vs >> c.seed;
        else if (key == "output_dir") c.output_dir = value;
        else if (key == "parallel") vs >> c.parallel;
        else throw std::runtime_error("unknown config key: " + key);
        if (vs.fail()) throw std::runtime_error("bad value for config key " + key + ": " + value);
    }
    return c;
}

void save_experiment_config(const std::string& path, const ExperimentConfig& c) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write config file: " + path);
    os.precision(17);
    os << "model.channels " << c.model.channels << "\n";
    os << "model.kernel_width " << c.model.kernel_width << "\n";
    os << "model.knob_count " << c.model.knob_count << "\n";
    os << "model.use_residual " << c.model.use_residual << "\n";
    os << "model.use_skip " << c.model.use_skip << "\n";
    os << "model.dilations";
    for (int d : c.model.dilation_schedule) os << " " << d;
    os << "\n";
    os << "train.epochs " << c.train.epochs << "\n";
    os << "train.chunk_length " << c.train.chunk_length << "\n";
    os << "train.batch_size " << c.train.batch_size << "\n";
    os << "train.lr " << c.train.lr << "\n";
    os << "train.final_lr_fraction " << c.train.final_lr_fraction << "\n";
    os << "acquisition.restarts " << c.acquisition.restarts << "\n";
    os << "acquisition.ascent_steps " << c.acquisition.ascent_steps << "\n";
    os << "acquisition.ascent_lr " << c.acquisition.ascent_lr << "\n";
    os << "acquisition.cluster_radius " << c.acquisition.cluster_radius << "\n";
    os << "acquisition.probe_length " << c.acquisition.probe_length << "\n";
    os << "oracle.sample_rate " << c.oracle.sample_rate << "\n";
    os << "ensemble_size " << c.ensemble_size << "\n";
    os << "ensemble_epochs " << c.ensemble_epochs << "\n";
    os << "initial_points " << c.initial_points << "\n";
    os << "budget " << c.budget << "\n";
    os << "n_val_settings " << c.n_val_settings << "\n";
    os << "dry_seconds " << c.dry_seconds << "\n";
    os << "val_seconds " << c.val_seconds << "\n";
    if (!c.dry_wav.empty()) os << "dry_wav " << c.dry_wav << "\n";
    if (!c.val_wav.empty()) os << "val_wav " << c.val_wav << "\n";
    os << "seed " << c.seed << "\n";
    if (!c.output_dir.empty()) os << "output_dir " << c.output_dir << "\n";
    os << "parallel " << c.parallel << "\n";
}

}  // namespace ampal
