#pragma once

#include <cstdint>
#include <string>

#include "ampal/amp_model.hpp"
#include "ampal/array.hpp"
#include "ampal/training.hpp"

namespace ampal {

enum class WavFormat {
    Pcm16,    // within 1 LSB on round-trip
    Float32,  // exact for float-representable samples
    Float64,  // exact; used for dataset wet signals
};

/// Mono RIFF WAV (PCM16 / IEEE float). Throws a descriptive error on
/// malformed headers, truncation, or unsupported channel counts.
AudioSignal read_wav(const std::string& path);
void write_wav(const std::string& path, const AudioSignal& signal,
               WavFormat format = WavFormat::Float32);

/// Dataset directory layout: x.wav, pairs/<i>.wav, pairs/<i>.g (decimal text,
/// 17 significant digits) and a manifest with order and content hashes.
/// Signals are stored as 64-bit float WAV so load(save(D)) == D exactly.
void save_dataset(const std::string& directory, const LabeledDataset& dataset);
LabeledDataset load_dataset(const std::string& directory);

/// Model weights plus training metadata; bit-exact round-trip.
struct Checkpoint {
    static constexpr int kFormatVersion = 1;
    ModelParameters params;
    uint64_t seed = 0;
    int epochs = 0;
    real final_loss = 0;
};

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ampal
