#include "ampal/signals.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "ampal/rng.hpp"

namespace ampal {

AudioSignal make_dry_signal(int sample_rate, real seconds, uint64_t seed) {
    if (sample_rate < 1 || !(seconds > 0)) {
        throw std::invalid_argument("make_dry_signal: bad sample rate or duration");
    }
    const auto n = static_cast<int64_t>(std::llround(seconds * sample_rate));
    AudioSignal sig;
    sig.sample_rate = sample_rate;
    sig.samples.assign(static_cast<size_t>(n), real(0));

    std::mt19937_64 rng(seed);
    const real two_pi = 2 * std::numbers::pi_v<real>;

    int64_t pos = 0;
    int event_count = 0;
    while (pos < n) {
        const bool noise_burst = (event_count % 5 == 4);
        const auto gap = static_cast<int64_t>((0.08 + 0.25 * uniform01(rng)) * sample_rate);
        if (noise_burst) {
            const auto len = std::min<int64_t>(n - pos, sample_rate / 10);
            const real amp = real(0.1) + real(0.15) * uniform01(rng);
            const real decay = real(30);
            for (int64_t i = 0; i < len; ++i) {
                const real env = std::exp(-decay * static_cast<real>(i) / sample_rate);
                sig.samples[pos + i] += amp * env * (2 * uniform01(rng) - 1);
            }
        } else {
            // Fundamental in the guitar range with a short harmonic stack.
            const real f0 = 82 + (660 - 82) * uniform01(rng);
            const real amp = real(0.3) + real(0.4) * uniform01(rng);
            const real decay = real(2) + real(6) * uniform01(rng);
            const auto len = std::min<int64_t>(n - pos, sample_rate);
            real phases[5];
            for (auto& p : phases) p = two_pi * uniform01(rng);
            for (int64_t i = 0; i < len; ++i) {
                const real t = static_cast<real>(i) / sample_rate;
                const real env = std::exp(-decay * t);
                real v = 0;
                for (int h = 1; h <= 5; ++h) {
                    const real fh = f0 * h;
                    if (fh >= sample_rate / real(2)) break;
                    v += std::sin(two_pi * fh * t + phases[h - 1]) /
                         std::pow(static_cast<real>(h), real(1.3));
                }
                sig.samples[pos + i] += amp * env * v;
            }
        }
        pos += gap;
        ++event_count;
    }

    real peak = 0;
    for (real v : sig.samples) peak = std::max(peak, std::abs(v));
    if (peak > 0) {
        const real s = real(0.9) / peak;
        for (auto& v : sig.samples) v *= s;
    }
    return sig;
}

}  // namespace ampal
