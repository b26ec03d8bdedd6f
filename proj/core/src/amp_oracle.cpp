#include "ampal/amp_oracle.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ampal {

namespace {
real db_to_gain(real db) { return std::pow(real(10), db / real(20)); }
}  // namespace

void OracleConfig::validate() const {
    if (knob_names.size() < 6) {
        throw std::invalid_argument("OracleConfig: expected the 6 standard knobs");
    }
    if (tone_freqs_hz.size() != 3) {
        throw std::invalid_argument("OracleConfig: expected 3 tone-stack frequencies");
    }
    if (sample_rate < 1) throw std::invalid_argument("OracleConfig: bad sample rate");
    for (real f : tone_freqs_hz) {
        if (!(f > 0 && f < sample_rate / 2.0)) {
            throw std::invalid_argument("OracleConfig: tone frequency outside (0, Nyquist)");
        }
    }
    if (!(presence_freq_hz > 0 && presence_freq_hz < sample_rate / 2.0)) {
        throw std::invalid_argument("OracleConfig: presence frequency outside (0, Nyquist)");
    }
    if (!(q > 0) || !std::isfinite(drive_db_max) || !std::isfinite(master_db_min)) {
        throw std::invalid_argument("OracleConfig: non-finite stage parameters");
    }
}

Biquad Biquad::peaking(real freq_hz, real gain_db, real q, int sample_rate) {
    const real a = std::pow(real(10), gain_db / real(40));
    const real w0 = 2 * std::numbers::pi_v<real> * freq_hz / static_cast<real>(sample_rate);
    const real alpha = std::sin(w0) / (2 * q);
    const real cosw = std::cos(w0);
    const real a0 = 1 + alpha / a;
    Biquad s;
    s.b0 = (1 + alpha * a) / a0;
    s.b1 = (-2 * cosw) / a0;
    s.b2 = (1 - alpha * a) / a0;
    s.a1 = (-2 * cosw) / a0;
    s.a2 = (1 - alpha / a) / a0;
    return s;
}

Biquad Biquad::high_shelf(real freq_hz, real gain_db, real q, int sample_rate) {
    const real a = std::pow(real(10), gain_db / real(40));
    const real w0 = 2 * std::numbers::pi_v<real> * freq_hz / static_cast<real>(sample_rate);
    const real alpha = std::sin(w0) / (2 * q);
    const real cosw = std::cos(w0);
    const real sq = 2 * std::sqrt(a) * alpha;
    const real a0 = (a + 1) - (a - 1) * cosw + sq;
    Biquad s;
    s.b0 = a * ((a + 1) + (a - 1) * cosw + sq) / a0;
    s.b1 = -2 * a * ((a - 1) + (a + 1) * cosw) / a0;
    s.b2 = a * ((a + 1) + (a - 1) * cosw - sq) / a0;
    s.a1 = 2 * ((a - 1) - (a + 1) * cosw) / a0;
    s.a2 = ((a + 1) - (a - 1) * cosw - sq) / a0;
    return s;
}

std::vector<real> Biquad::process(const std::vector<real>& x) const {
    std::vector<real> y(x.size());
    real s1 = 0, s2 = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        const real out = b0 * x[i] + s1;
        s1 = b1 * x[i] - a1 * out + s2;
        s2 = b2 * x[i] - a2 * out;
        y[i] = out;
    }
    return y;
}

namespace {

void check_inputs(const AudioSignal& x, const KnobVector& g, const OracleConfig& config) {
    config.validate();
    if (g.knob_count() != config.knob_count()) {
        throw std::invalid_argument("amp oracle: knob vector has " +
                                    std::to_string(g.knob_count()) + " components, expected " +
                                    std::to_string(config.knob_count()));
    }
    if (!g.in_unit_box()) throw std::invalid_argument("amp oracle: knob settings outside [0,1]");
    if (x.sample_rate != config.sample_rate) {
        throw std::invalid_argument("amp oracle: signal sample rate " +
                                    std::to_string(x.sample_rate) + " != oracle rate " +
                                    std::to_string(config.sample_rate));
    }
}

}  // namespace

AudioSignal oracle_eq_chain(const AudioSignal& x, const KnobVector& g,
                            const OracleConfig& config) {
    check_inputs(x, g, config);
    std::vector<real> y = x.samples;
    // Knob order: Gain, Bass, Mid, Treble, Master, Presence.
    for (int i = 0; i < 3; ++i) {
        const real gain_db = (2 * g.values[static_cast<size_t>(1 + i)] - 1) * config.tone_gain_db;
        y = Biquad::peaking(config.tone_freqs_hz[static_cast<size_t>(i)], gain_db, config.q,
                            config.sample_rate)
                .process(y);
    }
    const real presence_db = g.values[5] * config.presence_gain_db_max;
    y = Biquad::high_shelf(config.presence_freq_hz, presence_db, config.q, config.sample_rate)
            .process(y);
    return AudioSignal{std::move(y), x.sample_rate};
}

AudioSignal simulate_amp(const AudioSignal& x, const KnobVector& g, const OracleConfig& config) {
    check_inputs(x, g, config);
    const real drive = db_to_gain(g.values[0] * config.drive_db_max);
    AudioSignal shaped;
    shaped.sample_rate = x.sample_rate;
    shaped.samples.resize(x.samples.size());
    for (size_t i = 0; i < x.samples.size(); ++i) {
        shaped.samples[i] = std::tanh(drive * x.samples[i]);
    }

    AudioSignal eq = oracle_eq_chain(shaped, g, config);

    const real master = db_to_gain(config.master_db_min * (1 - g.values[4]));
    for (auto& v : eq.samples) v *= master;
    return eq;
}

void label(LabeledDataset& dataset, const KnobVector& g, const OracleConfig& config,
           bool allow_duplicates) {
    if (!allow_duplicates) {
        for (const auto& [existing, wet] : dataset.pairs) {
            if (existing.linf_distance(g) <= real(1e-9)) {
                throw std::invalid_argument("label: knob vector already labeled");
            }
        }
    }
    dataset.pairs.emplace_back(g, simulate_amp(dataset.x, g, config));
}

}  // namespace ampal
