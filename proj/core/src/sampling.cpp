#include "ampal/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "ampal/rng.hpp"

namespace ampal {

std::vector<KnobVector> sample_uniform(int n, int k, uint64_t seed) {
    if (n < 1 || k < 1) throw std::invalid_argument("sample_uniform: n and k must be >= 1");
    std::mt19937_64 rng(seed);
    std::vector<KnobVector> out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        KnobVector g;
        g.values.resize(static_cast<size_t>(k));
        for (auto& v : g.values) v = uniform01(rng);
        out.push_back(std::move(g));
    }
    return out;
}

namespace {

real normal01(std::mt19937_64& rng) {
    // Box-Muller on explicit uniform draws.
    const real u1 = uniform01(rng);
    const real u2 = uniform01(rng);
    return std::sqrt(-2 * std::log(u1)) * std::cos(2 * std::numbers::pi_v<real> * u2);
}

// Marsaglia-Tsang for shape >= 1, with the boost U^(1/shape) below 1.
real sample_gamma(real shape, std::mt19937_64& rng) {
    if (shape < 1) {
        const real u = uniform01(rng);
        return sample_gamma(shape + 1, rng) * std::pow(u, real(1) / shape);
    }
    const real d = shape - real(1) / 3;
    const real c = real(1) / std::sqrt(9 * d);
    for (;;) {
        real x, v;
        do {
            x = normal01(rng);
            v = 1 + c * x;
        } while (v <= 0);
        v = v * v * v;
        const real u = uniform01(rng);
        if (u < 1 - real(0.0331) * x * x * x * x) return d * v;
        if (std::log(u) < real(0.5) * x * x + d * (1 - v + std::log(v))) return d * v;
    }
}

}  // namespace

std::vector<KnobVector> sample_beta(int n, int k, const BetaParams& params, uint64_t seed) {
    if (n < 1 || k < 1) throw std::invalid_argument("sample_beta: n and k must be >= 1");
    if (!(params.alpha > 0) || !(params.beta > 0) || !std::isfinite(params.alpha) ||
        !std::isfinite(params.beta)) {
        throw std::invalid_argument("sample_beta: alpha and beta must be positive and finite");
    }
    std::mt19937_64 rng(seed);
    std::vector<KnobVector> out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        KnobVector g;
        g.values.resize(static_cast<size_t>(k));
        for (auto& v : g.values) {
            const real ga = sample_gamma(params.alpha, rng);
            const real gb = sample_gamma(params.beta, rng);
            v = std::clamp(ga / (ga + gb), real(1e-12), real(1) - real(1e-12));
        }
        out.push_back(std::move(g));
    }
    return out;
}

real digamma(real x) {
    real result = 0;
    while (x < 10) {
        result -= 1 / x;
        x += 1;
    }
    const real inv = 1 / x;
    const real inv2 = inv * inv;
    result += std::log(x) - inv / 2 -
              inv2 * (real(1. / 12) -
                      inv2 * (real(1. / 120) -
                              inv2 * (real(1. / 252) -
                                      inv2 * (real(1. / 240) - inv2 * real(1. / 132)))));
    return result;
}

real trigamma(real x) {
    real result = 0;
    while (x < 10) {
        result += 1 / (x * x);
        x += 1;
    }
    const real inv = 1 / x;
    const real inv2 = inv * inv;
    result += inv * (1 + inv / 2 +
                     inv2 * (real(1. / 6) -
                             inv2 * (real(1. / 30) -
                                     inv2 * (real(1. / 42) -
                                             inv2 * (real(1. / 30) - inv2 * real(5. / 66))))));
    return result;
}

BetaParams fit_beta(const std::vector<real>& samples) {
    if (samples.size() < 2) throw std::invalid_argument("fit_beta: need at least 2 samples");
    const real clip = 1e-6;
    real mean = 0, log_x = 0, log_1mx = 0;
    for (real s : samples) {
        const real v = std::clamp(s, clip, 1 - clip);
        mean += v;
        log_x += std::log(v);
        log_1mx += std::log(1 - v);
    }
    const real n = static_cast<real>(samples.size());
    mean /= n;
    log_x /= n;
    log_1mx /= n;

    real var = 0;
    for (real s : samples) {
        const real v = std::clamp(s, clip, 1 - clip) - mean;
        var += v * v;
    }
    var /= n;
    if (var <= 0) throw std::invalid_argument("fit_beta: degenerate (constant) samples");

    // Method-of-moments start.
    const real common = mean * (1 - mean) / var - 1;
    real alpha = std::max(real(1e-3), mean * common);
    real beta = std::max(real(1e-3), (1 - mean) * common);

    for (int it = 0; it < 500; ++it) {
        const real psi_ab = digamma(alpha + beta);
        const real g1 = digamma(alpha) - psi_ab - log_x;
        const real g2 = digamma(beta) - psi_ab - log_1mx;
        if (std::sqrt(g1 * g1 + g2 * g2) < 1e-8) {
            return {alpha, beta};
        }
        const real tri_ab = trigamma(alpha + beta);
        const real j11 = trigamma(alpha) - tri_ab;
        const real j22 = trigamma(beta) - tri_ab;
        const real j12 = -tri_ab;
        const real det = j11 * j22 - j12 * j12;
        if (!(std::abs(det) > 0)) {
            throw std::runtime_error("fit_beta: singular Newton system");
        }
        real da = (j22 * g1 - j12 * g2) / det;
        real db = (j11 * g2 - j12 * g1) / det;
        // Damp steps that would leave the positive quadrant.
        real step = 1;
        while (alpha - step * da <= 0 || beta - step * db <= 0) step /= 2;
        alpha -= step * da;
        beta -= step * db;
    }
    throw std::runtime_error("fit_beta: no convergence after 500 iterations");
}

std::vector<int64_t> component_histogram(const std::vector<KnobVector>& g_list, int bins) {
    if (bins < 1) throw std::invalid_argument("component_histogram: bins must be >= 1");
    std::vector<int64_t> counts(static_cast<size_t>(bins), 0);
    for (const auto& g : g_list) {
        for (real v : g.values) {
            const real c = std::clamp(v, real(0), real(1));
            auto bin = static_cast<size_t>(std::min<int64_t>(
                bins - 1, static_cast<int64_t>(c * static_cast<real>(bins))));
            counts[bin] += 1;
        }
    }
    return counts;
}

}  // namespace ampal
