#pragma once

#include <random>

#include "ampal/array.hpp"

namespace ampal {

/// Uniform draw in (0,1) from the top 53 bits of one mt19937_64 output, so
/// streams are identical across standard library implementations.
inline real uniform01(std::mt19937_64& rng) {
    return static_cast<real>(((rng() >> 11) + 0.5) * (1.0 / 9007199254740992.0));
}

}  // namespace ampal
