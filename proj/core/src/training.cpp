#include "ampal/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>
#include <stdexcept>
#include <thread>

#include "ampal/adam.hpp"
#include "ampal/autodiff.hpp"

namespace ampal {

void LabeledDataset::validate() const {
    for (size_t i = 0; i < pairs.size(); ++i) {
        const auto& [g, wet] = pairs[i];
        if (wet.length() != x.length() || wet.sample_rate != x.sample_rate) {
            throw std::invalid_argument("LabeledDataset: pair " + std::to_string(i) +
                                        " wet signal does not match the dry input");
        }
        if (!g.in_unit_box()) {
            throw std::invalid_argument("LabeledDataset: pair " + std::to_string(i) +
                                        " knob vector outside [0,1]");
        }
    }
}

real mse(const AudioSignal& a, const AudioSignal& b) {
    if (a.length() != b.length()) {
        throw std::invalid_argument("mse: length mismatch " + std::to_string(a.length()) +
                                    " vs " + std::to_string(b.length()));
    }
    if (a.length() == 0) throw std::invalid_argument("mse: empty signals");
    real s = 0;
    for (int64_t i = 0; i < a.length(); ++i) {
        const real d = a.samples[i] - b.samples[i];
        s += d * d;
    }
    return s / static_cast<real>(a.length());
}

std::vector<Chunk> make_chunks(const LabeledDataset& dataset, const TrainConfig& config,
                               int receptive_field) {
    if (dataset.pairs.empty()) throw std::invalid_argument("make_chunks: empty dataset");
    if (config.chunk_length < receptive_field) {
        throw std::invalid_argument("make_chunks: chunk_length " +
                                    std::to_string(config.chunk_length) +
                                    " is shorter than the receptive field " +
                                    std::to_string(receptive_field));
    }
    dataset.validate();

    const int64_t t = dataset.x.length();
    const int64_t ctx = receptive_field - 1;
    std::vector<Chunk> chunks;
    for (size_t p = 0; p < dataset.pairs.size(); ++p) {
        const auto& wet = dataset.pairs[p].second.samples;
        for (int64_t start = 0; start < t; start += config.chunk_length) {
            const int64_t len = std::min(config.chunk_length, t - start);
            Chunk c;
            c.pair_index = p;
            c.context = std::min(ctx, start);
            c.dry_with_context.assign(dataset.x.samples.begin() + (start - c.context),
                                      dataset.x.samples.begin() + (start + len));
            c.wet.assign(wet.begin() + start, wet.begin() + start + len);
            chunks.push_back(std::move(c));
        }
    }
    return chunks;
}

namespace {

// Explicit Fisher-Yates so shuffle order does not depend on the standard
// library implementation.
void shuffle_indices(std::vector<size_t>& idx, std::mt19937_64& rng) {
    for (size_t i = idx.size(); i > 1; --i) {
        const size_t j = static_cast<size_t>(rng() % i);
        std::swap(idx[i - 1], idx[j]);
    }
}

}  // namespace

std::pair<ModelParameters, std::vector<real>> train_model(const ModelParameters& init,
                                                          const LabeledDataset& dataset,
                                                          const TrainConfig& config) {
    if (config.epochs < 1) throw std::invalid_argument("train_model: epochs must be >= 1");
    if (config.batch_size < 1) throw std::invalid_argument("train_model: batch_size must be >= 1");
    if (dataset.pairs.empty()) throw std::invalid_argument("train_model: empty dataset");

    const ModelConfig& cfg = init.config;
    const int rf = receptive_field(cfg);
    const auto chunks = make_chunks(dataset, config, rf);

    ModelParameters work = init;
    auto param_ptrs = work.flat();
    std::vector<Array> adam_shapes;
    for (const Array* a : work.flat()) adam_shapes.push_back(Array::zeros(a->shape));
    AdamState state = AdamState::init(adam_shapes);
    AdamConfig adam{.lr = config.lr};

    std::mt19937_64 shuffle_rng(config.shuffle_seed);
    std::vector<size_t> order(chunks.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<real> history;
    history.reserve(static_cast<size_t>(config.epochs));

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        if (config.epochs > 1) {
            const real t = static_cast<real>(epoch) / static_cast<real>(config.epochs - 1);
            adam.lr = config.lr * (1 - (1 - config.final_lr_fraction) * t);
        }
        shuffle_indices(order, shuffle_rng);
        real epoch_sse = 0;
        int64_t epoch_samples = 0;

        for (size_t b = 0; b < order.size(); b += static_cast<size_t>(config.batch_size)) {
            const size_t batch_end = std::min(order.size(), b + static_cast<size_t>(config.batch_size));
            ad::Tape tape;
            std::vector<ad::Value> pvals;
            pvals.reserve(param_ptrs.size());
            for (Array* a : param_ptrs) pvals.push_back(tape.leaf(*a));

            ad::Value total_sse{};
            bool have = false;
            int64_t batch_samples = 0;
            for (size_t bi = b; bi < batch_end; ++bi) {
                const Chunk& c = chunks[order[bi]];
                const int64_t n = static_cast<int64_t>(c.dry_with_context.size());
                auto sig = tape.constant(Array({1, n}, c.dry_with_context));
                auto knobs = tape.constant(Array::vector(dataset.pairs[c.pair_index].first.values));
                auto out = forward_graph(tape, cfg, pvals, knobs, sig);
                auto pred = tape.slice_time(out, c.context, c.target_length());
                auto target = tape.constant(Array({1, c.target_length()}, c.wet));
                auto sse = tape.sum(tape.square(tape.sub(pred, target)));
                total_sse = have ? tape.add(total_sse, sse) : sse;
                have = true;
                batch_samples += c.target_length();
            }
            auto loss = tape.scale(total_sse, real(1) / static_cast<real>(batch_samples));
            const real loss_value = tape.value(loss)[0];
            if (!std::isfinite(loss_value)) {
                throw std::runtime_error("train_model: non-finite loss at epoch " +
                                         std::to_string(epoch));
            }
            epoch_sse += tape.value(total_sse)[0];
            epoch_samples += batch_samples;

            tape.backward(loss);
            std::vector<Array> grads;
            grads.reserve(pvals.size());
            for (auto v : pvals) grads.push_back(tape.grad(v));
            std::vector<Array> current;
            current.reserve(param_ptrs.size());
            for (Array* a : param_ptrs) current.push_back(*a);
            adam_step(current, grads, state, adam);
            for (size_t i = 0; i < param_ptrs.size(); ++i) *param_ptrs[i] = std::move(current[i]);
        }

        const real epoch_loss = epoch_sse / static_cast<real>(epoch_samples);
        if (!std::isfinite(epoch_loss)) {
            throw std::runtime_error("train_model: non-finite loss at epoch " +
                                     std::to_string(epoch));
        }
        history.push_back(epoch_loss);
        if (config.log_progress) {
            std::printf("epoch %d loss %.10g\n", epoch, static_cast<double>(epoch_loss));
            std::fflush(stdout);
        }
    }
    return {std::move(work), std::move(history)};
}

Ensemble train_ensemble(const LabeledDataset& dataset, int ensemble_size,
                        const std::vector<uint64_t>& seeds, const TrainConfig& config,
                        const ModelConfig& model_config, bool parallel) {
    if (ensemble_size != static_cast<int>(seeds.size())) {
        throw std::invalid_argument("train_ensemble: need exactly one seed per member");
    }
    if (std::set<uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
        throw std::invalid_argument("train_ensemble: duplicate seeds");
    }

    Ensemble ensemble;
    ensemble.models.resize(seeds.size());
    auto train_one = [&](size_t i) {
        TrainConfig member_config = config;
        // Decouple the shuffle stream from the init stream.
        member_config.shuffle_seed = seeds[i] * 0x9E3779B97F4A7C15ULL + 0x1234567ULL;
        member_config.log_progress = false;
        auto init = init_model(model_config, seeds[i]);
        ensemble.models[i] = train_model(init, dataset, member_config).first;
    };

    if (parallel && seeds.size() > 1) {
        std::vector<std::thread> threads;
        std::vector<std::exception_ptr> errors(seeds.size());
        for (size_t i = 0; i < seeds.size(); ++i) {
            threads.emplace_back([&, i] {
                try {
                    train_one(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            });
        }
        for (auto& t : threads) t.join();
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    } else {
        for (size_t i = 0; i < seeds.size(); ++i) train_one(i);
    }
    return ensemble;
}

}  // namespace ampal
