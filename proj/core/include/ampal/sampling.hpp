#pragma once

#include <cstdint>
#include <vector>

#include "ampal/array.hpp"

namespace ampal {

struct BetaParams {
    real alpha = 1;
    real beta = 1;
};

/// n knob vectors with i.i.d. uniform components in (0,1); deterministic per
/// seed.
std::vector<KnobVector> sample_uniform(int n, int k, uint64_t seed);

/// n knob vectors with i.i.d. Beta(alpha, beta) components, drawn by the
/// gamma-ratio construction so the stream only depends on the seed.
std::vector<KnobVector> sample_beta(int n, int k, const BetaParams& params, uint64_t seed);

/// Maximum-likelihood Beta fit: Newton iteration on the digamma system,
/// initialized by the method of moments. Samples are clipped to
/// [1e-6, 1-1e-6] first. Throws on degenerate input or non-convergence
/// within 500 iterations (gradient norm 1e-8).
BetaParams fit_beta(const std::vector<real>& samples);

/// Flattens all vectors into one scalar list and counts over [0,1] with a
/// right-closed final bin.
std::vector<int64_t> component_histogram(const std::vector<KnobVector>& g_list, int bins);

real digamma(real x);
real trigamma(real x);

}  // namespace ampal
