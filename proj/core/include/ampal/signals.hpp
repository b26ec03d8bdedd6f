#pragma once

#include <cstdint>

#include "ampal/array.hpp"

namespace ampal {

/// Deterministic dry guitar stand-in: a stream of exponentially decaying
/// plucked-string-like tones (fundamental plus a few harmonics) with
/// occasional noise bursts. Peak-normalized to 0.9.
AudioSignal make_dry_signal(int sample_rate, real seconds, uint64_t seed);

}  // namespace ampal
