#include "ampal/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <thread>

#include "ampal/adam.hpp"
#include "ampal/autodiff.hpp"

namespace ampal {

namespace {

// Sums in ascending-value order so the result depends only on the multiset
// of addends, making D and its gradient exactly invariant to member order.
real sorted_sum(std::vector<real> values) {
    std::sort(values.begin(), values.end());
    real s = 0;
    for (real v : values) s += v;
    return s;
}

// Per-timestep deviations from the cross-model mean, computed relative to
// the minimum so identical outputs give exact zeros.
std::vector<real> cross_model_deviations(const std::vector<std::vector<real>>& outputs,
                                         size_t ti) {
    const size_t m = outputs.size();
    real vmin = outputs[0][ti];
    for (size_t i = 1; i < m; ++i) vmin = std::min(vmin, outputs[i][ti]);
    std::vector<real> shifted(m);
    for (size_t i = 0; i < m; ++i) shifted[i] = outputs[i][ti] - vmin;
    const real mean_shifted = sorted_sum(shifted) / static_cast<real>(m);
    for (auto& v : shifted) v -= mean_shifted;
    return shifted;
}

}  // namespace

real disagreement(const std::vector<std::vector<real>>& outputs) {
    if (outputs.empty()) throw std::invalid_argument("disagreement: no outputs");
    const size_t m = outputs.size();
    const size_t t = outputs[0].size();
    if (t == 0) throw std::invalid_argument("disagreement: empty outputs");
    for (const auto& o : outputs) {
        if (o.size() != t) throw std::invalid_argument("disagreement: output length mismatch");
    }
    real acc = 0;
    for (size_t ti = 0; ti < t; ++ti) {
        auto dev = cross_model_deviations(outputs, ti);
        for (auto& v : dev) v *= v;
        acc += sorted_sum(std::move(dev)) / static_cast<real>(m);
    }
    return acc / static_cast<real>(t);
}

std::pair<real, std::vector<real>> disagreement_at(const Ensemble& ensemble,
                                                   const AudioSignal& x, const KnobVector& g) {
    if (ensemble.size() < 2) {
        throw std::invalid_argument("disagreement_at: ensemble must have at least 2 models");
    }
    const int m = ensemble.size();
    const ModelConfig& cfg = ensemble.models[0].config;
    for (const auto& model : ensemble.models) {
        if (!(model.config == cfg)) {
            throw std::invalid_argument("disagreement_at: ensemble configs differ");
        }
    }

    // One tape per member: D and the per-model gradient seeds are assembled
    // from the outputs with order-canonical summation, so the result is
    // exactly invariant to member permutation and exactly zero for identical
    // members.
    const size_t t = static_cast<size_t>(x.length());
    std::vector<ad::Tape> tapes(static_cast<size_t>(m));
    std::vector<ad::Value> knob_leaves(static_cast<size_t>(m));
    std::vector<ad::Value> outs(static_cast<size_t>(m));
    std::vector<std::vector<real>> outputs(static_cast<size_t>(m));
    for (size_t i = 0; i < static_cast<size_t>(m); ++i) {
        auto& tape = tapes[i];
        knob_leaves[i] = tape.leaf(Array::vector(g.values));
        auto signal = tape.constant(Array({1, x.length()}, x.samples));
        std::vector<ad::Value> pvals;
        for (const Array* a : ensemble.models[i].flat()) pvals.push_back(tape.constant(*a));
        outs[i] = forward_graph(tape, cfg, pvals, knob_leaves[i], signal);
        outputs[i] = tape.value(outs[i]).data;
    }

    // dD/d(output_i[t]) = 2/(T*M) * (output_i[t] - mean[t]); backprop that
    // seed through each member's graph alone via <seed, output> pullback.
    std::vector<Array> seeds(static_cast<size_t>(m),
                             Array::zeros({1, static_cast<int64_t>(t)}));
    real d_value = 0;
    const real seed_scale = real(2) / (static_cast<real>(t) * static_cast<real>(m));
    for (size_t ti = 0; ti < t; ++ti) {
        auto dev = cross_model_deviations(outputs, ti);
        for (size_t i = 0; i < dev.size(); ++i) {
            seeds[i][static_cast<int64_t>(ti)] = seed_scale * dev[i];
            dev[i] *= dev[i];
        }
        d_value += sorted_sum(std::move(dev));
    }
    d_value /= static_cast<real>(t) * static_cast<real>(m);

    const size_t k = g.values.size();
    std::vector<std::vector<real>> contributions(k, std::vector<real>(static_cast<size_t>(m)));
    for (size_t i = 0; i < static_cast<size_t>(m); ++i) {
        auto& tape = tapes[i];
        auto pullback = tape.sum(tape.mul(outs[i], tape.constant(seeds[i])));
        tape.backward(pullback);
        const Array& gi = tape.grad(knob_leaves[i]);
        for (size_t j = 0; j < k; ++j) contributions[j][i] = gi[static_cast<int64_t>(j)];
    }
    std::vector<real> grad(k);
    for (size_t j = 0; j < k; ++j) grad[j] = sorted_sum(std::move(contributions[j]));
    return {d_value, grad};
}

std::pair<KnobVector, std::vector<real>> ascend_objective(const Objective& objective,
                                                          const KnobVector& g0,
                                                          const AcquisitionConfig& config) {
    if (!g0.in_unit_box()) throw std::invalid_argument("ascend: start point outside [0,1]");
    if (config.ascent_steps < 0) throw std::invalid_argument("ascend: negative step count");

    std::vector<Array> params{Array::vector(g0.values)};
    AdamState state = AdamState::init(params);
    AdamConfig adam{.lr = config.ascent_lr, .eps = config.adam_eps};

    auto evaluate = [&](const KnobVector& g) {
        auto [value, grad] = objective(g);
        if (!std::isfinite(value)) {
            throw std::runtime_error("ascend: non-finite objective value");
        }
        return std::pair{value, std::move(grad)};
    };

    KnobVector current = g0;
    auto [best_value, grad] = evaluate(current);
    KnobVector best = current;
    std::vector<real> trajectory{best_value};

    for (int step = 0; step < config.ascent_steps; ++step) {
        // Maximize: feed Adam the negated gradient.
        Array neg = Array::vector(grad);
        for (auto& v : neg.data) v = -v;
        adam_step(params, {neg}, state, adam);
        for (auto& v : params[0].data) v = std::clamp(v, real(0), real(1));
        current.values = params[0].data;

        auto [value, next_grad] = evaluate(current);
        trajectory.push_back(value);
        if (value > best_value) {
            best_value = value;
            best = current;
        }
        grad = std::move(next_grad);
    }
    return {best, trajectory};
}

namespace {

AudioSignal probe_excerpt(const AudioSignal& x, int64_t probe_length) {
    if (probe_length <= 0 || probe_length >= x.length()) return x;
    AudioSignal p;
    p.sample_rate = x.sample_rate;
    p.samples.assign(x.samples.begin(), x.samples.begin() + probe_length);
    return p;
}

}  // namespace

std::pair<KnobVector, std::vector<real>> ascend(const Ensemble& ensemble, const AudioSignal& x,
                                                const KnobVector& g0,
                                                const AcquisitionConfig& config) {
    const AudioSignal probe = probe_excerpt(x, config.probe_length);
    Objective objective = [&](const KnobVector& g) {
        return disagreement_at(ensemble, probe, g);
    };
    return ascend_objective(objective, g0, config);
}

std::vector<Candidate> cluster_candidates(const std::vector<Candidate>& candidates, real radius) {
    if (radius <= 0) throw std::invalid_argument("cluster_candidates: radius must be > 0");
    const size_t n = candidates.size();
    std::vector<size_t> parent(n);
    for (size_t i = 0; i < n; ++i) parent[i] = i;
    std::function<size_t(size_t)> find = [&](size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            if (candidates[i].g.linf_distance(candidates[j].g) <= radius) {
                parent[find(i)] = find(j);
            }
        }
    }

    std::vector<Candidate> selected;
    for (size_t i = 0; i < n; ++i) {
        if (find(i) != i) continue;
        size_t best = i;
        for (size_t j = 0; j < n; ++j) {
            if (find(j) == i && candidates[j].disagreement > candidates[best].disagreement) {
                best = j;
            }
        }
        selected.push_back(candidates[best]);
    }
    std::sort(selected.begin(), selected.end(), [](const Candidate& a, const Candidate& b) {
        if (a.disagreement != b.disagreement) return a.disagreement > b.disagreement;
        return a.restart_index < b.restart_index;
    });
    return selected;
}

AcquisitionResult propose(const Ensemble& ensemble, const AudioSignal& x,
                          const AcquisitionConfig& config, uint64_t rng_seed) {
    if (config.restarts < 1) throw std::invalid_argument("propose: restarts must be >= 1");
    if (ensemble.size() < 1) throw std::invalid_argument("propose: empty ensemble");
    const int k = ensemble.models[0].config.knob_count;

    std::mt19937_64 rng(rng_seed);
    auto uniform01 = [&] {
        return static_cast<real>((rng() >> 11) * (1.0 / 9007199254740992.0));
    };
    std::vector<KnobVector> starts;
    for (int r = 0; r < config.restarts; ++r) {
        KnobVector g;
        g.values.resize(static_cast<size_t>(k));
        for (auto& v : g.values) v = uniform01();
        starts.push_back(std::move(g));
    }

    AcquisitionResult result;
    result.candidates.resize(starts.size());
    auto run_one = [&](size_t r) {
        auto [g_star, trajectory] = ascend(ensemble, x, starts[r], config);
        result.candidates[r] =
            Candidate{g_star, *std::max_element(trajectory.begin(), trajectory.end()),
                      static_cast<int>(r)};
    };

    if (config.parallel && starts.size() > 1) {
        std::vector<std::thread> threads;
        std::vector<std::exception_ptr> errors(starts.size());
        for (size_t r = 0; r < starts.size(); ++r) {
            threads.emplace_back([&, r] {
                try {
                    run_one(r);
                } catch (...) {
                    errors[r] = std::current_exception();
                }
            });
        }
        for (auto& t : threads) t.join();
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    } else {
        for (size_t r = 0; r < starts.size(); ++r) run_one(r);
    }

    result.selected = cluster_candidates(result.candidates, config.cluster_radius);
    return result;
}

}  // namespace ampal
