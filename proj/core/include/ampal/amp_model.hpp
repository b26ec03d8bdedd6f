#pragma once

#include <string>
#include <vector>

#include "ampal/array.hpp"
#include "ampal/autodiff.hpp"

namespace ampal {

/// Architecture of the conditioned feed-forward WaveNet.
struct ModelConfig {
    int channels = 8;
    int kernel_width = 3;
    std::vector<int> dilation_schedule;
    int knob_count = 6;
    bool use_residual = true;
    bool use_skip = true;

    int layers() const { return static_cast<int>(dilation_schedule.size()); }

    /// Two stacks of dilations 1,2,4,...,512.
    static ModelConfig defaults();
    /// Repeats 1,2,4,...,2^(layers_per_stack-1) `stacks` times.
    static std::vector<int> stacked_dilations(int layers_per_stack, int stacks);

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

/// 1 + sum over layers of (K-1)*dilation.
int receptive_field(const ModelConfig& config);

struct LayerParameters {
    Array w_filter;       // [C,C,K] dilated kernel, filter path
    Array w_gate;         // [C,C,K] dilated kernel, gate path
    Array v_filter;       // [C,1] 1x1 from the local condition y
    Array v_gate;         // [C,1]
    Array vprime_filter;  // [C,k] linear map from g, broadcast over time
    Array vprime_gate;    // [C,k]
    Array w_residual;     // [C,C] 1x1
    Array w_skip;         // [C,C] 1x1
};

/// All weights of one model instance.
struct ModelParameters {
    ModelConfig config;
    Array input_lift;  // [C,1] lifts the mono signal to C channels
    std::vector<LayerParameters> layers;
    Array head1;  // [C,C] first output-head 1x1
    Array head2;  // [1,C] final output-head 1x1, zero at init

    /// Stable flat view over every weight array; order matches names().
    std::vector<Array*> flat();
    std::vector<const Array*> flat() const;
    std::vector<std::string> names() const;
};

/// Deterministic scaled-uniform init (+-1/sqrt(fan_in)); the final head
/// kernel starts at zero so a fresh model outputs silence.
ModelParameters init_model(const ModelConfig& config, uint64_t seed);

/// Max absolute elementwise difference across all weights.
real parameter_distance(const ModelParameters& a, const ModelParameters& b);

/// Tape values for one layer's weights.
struct LayerValues {
    ad::Value w_filter, w_gate, v_filter, v_gate, vprime_filter, vprime_gate;
};

/// z = tanh(W_f*x + V_f*y + V_f'^T g) .* sigmoid(W_g*x + V_g*y + V_g'^T g),
/// with the g terms broadcast over time and causal padding on the dilated
/// convolutions. x_in: [C,T], y_cond: [1,T], g: [k].
ad::Value gated_layer(ad::Tape& tape, ad::Value x_in, ad::Value y_cond, ad::Value g,
                      const LayerValues& layer, int dilation);

/// Convenience wrapper evaluating one gated layer outside any larger graph.
Array gated_layer_eval(const Array& x_in, const Array& y_cond, const KnobVector& g,
                       const LayerParameters& layer, int dilation);

/// Full model graph from pre-wrapped tape values. `params` must follow the
/// ModelParameters::flat() order; `signal` is [1,T]. Returns the wet [1,T].
ad::Value forward_graph(ad::Tape& tape, const ModelConfig& config,
                        const std::vector<ad::Value>& params, ad::Value knobs,
                        ad::Value signal);

/// Forward graph of the full model on a tape, with the caller choosing which
/// inputs are differentiable leaves.
struct ModelGraph {
    std::vector<ad::Value> params;  // order matches ModelParameters::flat()
    ad::Value knobs;
    ad::Value output;  // [1,T]
};

ModelGraph build_forward(ad::Tape& tape, const ModelParameters& params,
                         const std::vector<real>& x, const KnobVector& g,
                         bool params_differentiable, bool knobs_differentiable);

/// Wet signal for a dry signal under knob settings g.
AudioSignal forward(const ModelParameters& params, const AudioSignal& x, const KnobVector& g);

}  // namespace ampal
