#pragma once

#include <vector>

#include "ampal/array.hpp"

namespace ampal {

struct AdamConfig {
    real lr = 1e-3;
    real beta1 = 0.9;
    real beta2 = 0.999;
    real eps = 1e-8;
};

/// First/second moment accumulators plus the step counter.
struct AdamState {
    std::vector<Array> m;
    std::vector<Array> v;
    int64_t t = 0;

    /// Zero-initialized state matching the given parameter shapes.
    static AdamState init(const std::vector<Array>& params);
};

/// One bias-corrected Adam update in place. Throws on shape mismatch or
/// non-finite gradients.
void adam_step(std::vector<Array>& params, const std::vector<Array>& grads,
               AdamState& state, const AdamConfig& config);

}  // namespace ampal
