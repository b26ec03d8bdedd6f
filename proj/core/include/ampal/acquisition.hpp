#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "ampal/array.hpp"
#include "ampal/training.hpp"

namespace ampal {

struct AcquisitionConfig {
    int restarts = 10;
    int ascent_steps = 200;
    real ascent_lr = 0.02;
    real adam_eps = 1e-8;
    /// L-infinity radius for merging nearby local optima.
    real cluster_radius = 0.05;
    /// Fixed probe signal x used to evaluate D; at most this many samples of
    /// it are used (0 = all).
    int64_t probe_length = 16384;
    bool parallel = false;
};

struct Candidate {
    KnobVector g;
    real disagreement = 0;
    int restart_index = 0;
};

struct AcquisitionResult {
    std::vector<Candidate> candidates;          // one per restart
    std::vector<Candidate> selected;            // cluster representatives
};

/// Mean over timesteps of the cross-model population variance.
/// outputs: M signals of equal length.
real disagreement(const std::vector<std::vector<real>>& outputs);

/// D at (x, g) with its gradient w.r.t. g; model parameters are constants.
std::pair<real, std::vector<real>> disagreement_at(const Ensemble& ensemble,
                                                   const AudioSignal& x, const KnobVector& g);

/// Scalar objective with gradient, over a point in [0,1]^k. Lets the ascent
/// routine be exercised on closed-form surrogates as well as on D.
using Objective =
    std::function<std::pair<real, std::vector<real>>(const KnobVector&)>;

/// Projected Adam ascent of `objective` from g0, clamping to [0,1]^k after
/// every step. Returns the best-seen iterate and the D trajectory.
std::pair<KnobVector, std::vector<real>> ascend_objective(const Objective& objective,
                                                          const KnobVector& g0,
                                                          const AcquisitionConfig& config);

/// Ascent of the ensemble disagreement at fixed probe x.
std::pair<KnobVector, std::vector<real>> ascend(const Ensemble& ensemble, const AudioSignal& x,
                                                const KnobVector& g0,
                                                const AcquisitionConfig& config);

/// Single-linkage agglomeration: candidates within `radius` in L-infinity
/// merge into one cluster; each cluster is represented by its highest-D
/// member.
std::vector<Candidate> cluster_candidates(const std::vector<Candidate>& candidates, real radius);

/// `restarts` ascents from uniform-random starts, then clustering.
AcquisitionResult propose(const Ensemble& ensemble, const AudioSignal& x,
                          const AcquisitionConfig& config, uint64_t rng_seed);

}  // namespace ampal
