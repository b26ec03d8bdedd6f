#pragma once

#include <string>
#include <vector>

#include "ampal/array.hpp"
#include "ampal/training.hpp"

namespace ampal {

/// Deterministic synthetic 6-knob amp used as the labeling oracle.
/// Chain: input gain (Gain, 0..+40 dB) -> tanh waveshaper -> Bass/Mid/Treble
/// peaking EQs (+-12 dB) -> Presence high shelf (0..+9 dB) -> output gain
/// (Master, -40..0 dB).
struct OracleConfig {
    std::vector<std::string> knob_names = {"Gain", "Bass", "Mid",
                                           "Treble", "Master", "Presence"};
    real drive_db_max = 40.0;
    std::vector<real> tone_freqs_hz = {100.0, 600.0, 3000.0};
    real tone_gain_db = 12.0;  // each tone knob spans +-tone_gain_db
    // below Nyquist at the default 8 kHz rate; 4 kHz exactly would degenerate
    real presence_freq_hz = 3500.0;
    real presence_gain_db_max = 9.0;
    real master_db_min = -40.0;
    real q = 0.7;
    int sample_rate = 8000;

    int knob_count() const { return static_cast<int>(knob_names.size()); }
    void validate() const;
};

/// Direct-form-II-transposed biquad section.
struct Biquad {
    real b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;  // normalized (a0 == 1)

    static Biquad peaking(real freq_hz, real gain_db, real q, int sample_rate);
    static Biquad high_shelf(real freq_hz, real gain_db, real q, int sample_rate);

    std::vector<real> process(const std::vector<real>& x) const;
};

/// The linear EQ sub-chain only (drive and master bypassed); exposed so the
/// linearity of the filter stages is testable in isolation.
AudioSignal oracle_eq_chain(const AudioSignal& x, const KnobVector& g, const OracleConfig& config);

/// Ground-truth wet signal for knob settings g. Deterministic,
/// length-preserving; throws if g leaves [0,1]^k or sample rates disagree.
AudioSignal simulate_amp(const AudioSignal& x, const KnobVector& g, const OracleConfig& config);

/// Appends (g, simulate_amp(x, g)). Without allow_duplicates, a g already in
/// the dataset (within 1e-9 L-infinity) is an error.
void label(LabeledDataset& dataset, const KnobVector& g, const OracleConfig& config,
           bool allow_duplicates = false);

}  // namespace ampal
