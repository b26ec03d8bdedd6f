#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "ampal/amp_model.hpp"
#include "ampal/array.hpp"

namespace ampal {

struct TrainConfig {
    int epochs = 50;
    int64_t chunk_length = 4096;
    int batch_size = 8;
    real lr = 1e-3;
    /// The learning rate decays linearly from lr to lr * final_lr_fraction
    /// over the epochs; 1 keeps it constant.
    real final_lr_fraction = 1;
    uint64_t shuffle_seed = 0;
    /// Emit "epoch <i> loss <v>" lines on stdout.
    bool log_progress = false;
};

/// The labeled set G: one shared dry input plus (g, wet) pairs.
struct LabeledDataset {
    AudioSignal x;
    std::vector<std::pair<KnobVector, AudioSignal>> pairs;

    size_t size() const { return pairs.size(); }
    void validate() const;
};

/// Mean squared sample difference; throws on length mismatch.
real mse(const AudioSignal& a, const AudioSignal& b);

/// One training example: a dry excerpt with its left context plus the
/// matching wet target. The first `context` dry samples exist only to warm
/// up the receptive field; the loss covers the remaining `target_length()`.
struct Chunk {
    std::vector<real> dry_with_context;
    int64_t context = 0;
    std::vector<real> wet;
    size_t pair_index = 0;

    int64_t target_length() const { return static_cast<int64_t>(wet.size()); }
};

/// Tiles every pair into chunks of config.chunk_length (final chunk may be
/// shorter), each with receptive_field-1 samples of real left context. The
/// first chunk gets no context; the model's own causal padding covers the
/// signal start. Deterministic order: pair-major, then time.
std::vector<Chunk> make_chunks(const LabeledDataset& dataset, const TrainConfig& config,
                               int receptive_field);

/// `epochs` passes of shuffled minibatch Adam on MSE. Returns the trained
/// parameters and the per-epoch mean loss (sum of squared errors over the
/// epoch divided by total target samples, evaluated before each update).
/// Throws if the loss goes non-finite, naming the epoch.
std::pair<ModelParameters, std::vector<real>> train_model(const ModelParameters& init,
                                                          const LabeledDataset& dataset,
                                                          const TrainConfig& config);

/// M independently trained models sharing one architecture.
struct Ensemble {
    std::vector<ModelParameters> models;

    int size() const { return static_cast<int>(models.size()); }
};

/// One training run per seed, each with its own initialization and shuffle
/// order. Seeds must be distinct. With `parallel`, members train on separate
/// threads; results are identical either way.
Ensemble train_ensemble(const LabeledDataset& dataset, int ensemble_size,
                        const std::vector<uint64_t>& seeds, const TrainConfig& config,
                        const ModelConfig& model_config, bool parallel = false);

}  // namespace ampal
