#include "ampal/amp_model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace ampal {

ModelConfig ModelConfig::defaults() {
    ModelConfig c;
    c.dilation_schedule = stacked_dilations(10, 2);
    return c;
}

std::vector<int> ModelConfig::stacked_dilations(int layers_per_stack, int stacks) {
    std::vector<int> d;
    for (int s = 0; s < stacks; ++s) {
        for (int i = 0; i < layers_per_stack; ++i) d.push_back(1 << i);
    }
    return d;
}

void ModelConfig::validate() const {
    if (channels < 1) throw std::invalid_argument("ModelConfig: channels must be >= 1");
    if (kernel_width < 1) throw std::invalid_argument("ModelConfig: kernel_width must be >= 1");
    if (knob_count < 1) throw std::invalid_argument("ModelConfig: knob_count must be >= 1");
    if (dilation_schedule.empty()) {
        throw std::invalid_argument("ModelConfig: dilation_schedule must be nonempty");
    }
    for (int d : dilation_schedule) {
        if (d < 1) throw std::invalid_argument("ModelConfig: dilations must be >= 1");
    }
}

int receptive_field(const ModelConfig& config) {
    config.validate();
    int rf = 1;
    for (int d : config.dilation_schedule) rf += (config.kernel_width - 1) * d;
    return rf;
}

std::vector<Array*> ModelParameters::flat() {
    std::vector<Array*> v;
    v.push_back(&input_lift);
    for (auto& l : layers) {
        v.push_back(&l.w_filter);
        v.push_back(&l.w_gate);
        v.push_back(&l.v_filter);
        v.push_back(&l.v_gate);
        v.push_back(&l.vprime_filter);
        v.push_back(&l.vprime_gate);
        v.push_back(&l.w_residual);
        v.push_back(&l.w_skip);
    }
    v.push_back(&head1);
    v.push_back(&head2);
    return v;
}

std::vector<const Array*> ModelParameters::flat() const {
    auto mut = const_cast<ModelParameters*>(this)->flat();
    return {mut.begin(), mut.end()};
}

std::vector<std::string> ModelParameters::names() const {
    std::vector<std::string> v;
    v.push_back("input_lift");
    for (size_t i = 0; i < layers.size(); ++i) {
        const std::string p = "layer" + std::to_string(i) + ".";
        for (const char* s : {"w_filter", "w_gate", "v_filter", "v_gate",
                              "vprime_filter", "vprime_gate", "w_residual", "w_skip"}) {
            v.push_back(p + s);
        }
    }
    v.push_back("head1");
    v.push_back("head2");
    return v;
}

namespace {

// Uniform in [0,1) from the top 53 bits, so draws are identical across
// standard library implementations.
real uniform01(std::mt19937_64& rng) {
    return static_cast<real>((rng() >> 11) * (1.0 / 9007199254740992.0));
}

Array uniform_init(std::vector<int64_t> shape, int64_t fan_in, std::mt19937_64& rng) {
    Array a = Array::zeros(std::move(shape));
    const real bound = real(1) / std::sqrt(static_cast<real>(fan_in));
    for (auto& v : a.data) v = (2 * uniform01(rng) - 1) * bound;
    return a;
}

}  // namespace

ModelParameters init_model(const ModelConfig& config, uint64_t seed) {
    config.validate();
    std::mt19937_64 rng(seed);
    const int64_t c = config.channels;
    const int64_t k = config.kernel_width;
    const int64_t nk = config.knob_count;

    ModelParameters p;
    p.config = config;
    p.input_lift = uniform_init({c, 1}, 1, rng);
    for (int i = 0; i < config.layers(); ++i) {
        LayerParameters l;
        l.w_filter = uniform_init({c, c, k}, c * k, rng);
        l.w_gate = uniform_init({c, c, k}, c * k, rng);
        l.v_filter = uniform_init({c, 1}, 1, rng);
        l.v_gate = uniform_init({c, 1}, 1, rng);
        l.vprime_filter = uniform_init({c, nk}, nk, rng);
        l.vprime_gate = uniform_init({c, nk}, nk, rng);
        l.w_residual = uniform_init({c, c}, c, rng);
        l.w_skip = uniform_init({c, c}, c, rng);
        p.layers.push_back(std::move(l));
    }
    p.head1 = uniform_init({c, c}, c, rng);
    p.head2 = Array::zeros({1, c});
    return p;
}

real parameter_distance(const ModelParameters& a, const ModelParameters& b) {
    auto fa = a.flat();
    auto fb = b.flat();
    if (fa.size() != fb.size()) {
        throw std::invalid_argument("parameter_distance: layer count mismatch");
    }
    real d = 0;
    for (size_t i = 0; i < fa.size(); ++i) {
        if (!fa[i]->same_shape(*fb[i])) {
            throw std::invalid_argument("parameter_distance: shape mismatch");
        }
        for (int64_t j = 0; j < fa[i]->size(); ++j) {
            d = std::max(d, std::abs((*fa[i])[j] - (*fb[i])[j]));
        }
    }
    return d;
}

ad::Value gated_layer(ad::Tape& tape, ad::Value x_in, ad::Value y_cond, ad::Value g,
                      const LayerValues& layer, int dilation) {
    auto filter = tape.add(tape.conv1d_dilated(x_in, layer.w_filter, dilation, true),
                           tape.conv1x1(y_cond, layer.v_filter));
    filter = tape.add_bias_time(filter, tape.matvec(layer.vprime_filter, g));
    auto gate = tape.add(tape.conv1d_dilated(x_in, layer.w_gate, dilation, true),
                         tape.conv1x1(y_cond, layer.v_gate));
    gate = tape.add_bias_time(gate, tape.matvec(layer.vprime_gate, g));
    return tape.mul(tape.tanh(filter), tape.sigmoid(gate));
}

Array gated_layer_eval(const Array& x_in, const Array& y_cond, const KnobVector& g,
                       const LayerParameters& layer, int dilation) {
    ad::Tape tape;
    LayerValues lv{
        tape.constant(layer.w_filter),   tape.constant(layer.w_gate),
        tape.constant(layer.v_filter),   tape.constant(layer.v_gate),
        tape.constant(layer.vprime_filter), tape.constant(layer.vprime_gate),
    };
    auto z = gated_layer(tape, tape.constant(x_in), tape.constant(y_cond),
                         tape.constant(Array::vector(g.values)), lv, dilation);
    return tape.value(z);
}

ad::Value forward_graph(ad::Tape& tape, const ModelConfig& cfg,
                        const std::vector<ad::Value>& params, ad::Value knobs,
                        ad::Value signal) {
    // flat() order: input_lift, then 8 arrays per layer, then head1, head2.
    const size_t expected = 1 + 8 * static_cast<size_t>(cfg.layers()) + 2;
    if (params.size() != expected) {
        throw std::invalid_argument("forward_graph: expected " + std::to_string(expected) +
                                    " parameter values, got " + std::to_string(params.size()));
    }
    size_t idx = 0;
    auto next = [&] { return params[idx++]; };
    auto lift = next();
    auto h = tape.conv1x1(signal, lift);

    ad::Value skip_sum{};
    bool have_skip = false;
    for (int i = 0; i < cfg.layers(); ++i) {
        LayerValues lv{next(), next(), next(), next(), next(), next()};
        auto w_res = next();
        auto w_skip = next();
        auto z = gated_layer(tape, h, signal, knobs, lv, cfg.dilation_schedule[i]);
        if (cfg.use_skip) {
            auto s = tape.conv1x1(z, w_skip);
            skip_sum = have_skip ? tape.add(skip_sum, s) : s;
            have_skip = true;
        }
        auto res = tape.conv1x1(z, w_res);
        h = cfg.use_residual ? tape.add(h, res) : res;
    }

    auto head_in = cfg.use_skip ? skip_sum : h;
    auto h1 = tape.tanh(tape.conv1x1(head_in, next()));
    return tape.conv1x1(h1, next());
}

ModelGraph build_forward(ad::Tape& tape, const ModelParameters& params,
                         const std::vector<real>& x, const KnobVector& g,
                         bool params_differentiable, bool knobs_differentiable) {
    const ModelConfig& cfg = params.config;
    cfg.validate();
    if (g.knob_count() != cfg.knob_count) {
        throw std::invalid_argument("build_forward: knob vector has " +
                                    std::to_string(g.knob_count()) + " components, expected " +
                                    std::to_string(cfg.knob_count));
    }
    if (x.empty()) throw std::invalid_argument("build_forward: empty input signal");

    ModelGraph graph;
    auto wrap = [&](const Array& a) {
        return params_differentiable ? tape.leaf(a) : tape.constant(a);
    };
    for (const Array* a : params.flat()) graph.params.push_back(wrap(*a));
    Array garr = Array::vector(g.values);
    graph.knobs = knobs_differentiable ? tape.leaf(garr) : tape.constant(garr);

    Array xin({1, static_cast<int64_t>(x.size())}, x);
    require_finite(xin, "forward input signal");
    auto signal = tape.constant(std::move(xin));

    graph.output = forward_graph(tape, cfg, graph.params, graph.knobs, signal);
    return graph;
}

AudioSignal forward(const ModelParameters& params, const AudioSignal& x, const KnobVector& g) {
    if (!g.in_unit_box()) {
        throw std::invalid_argument("forward: knob vector outside [0,1]");
    }
    ad::Tape tape;
    auto graph = build_forward(tape, params, x.samples, g, false, false);
    const Array& out = tape.value(graph.output);
    AudioSignal wet;
    wet.sample_rate = x.sample_rate;
    wet.samples = out.data;
    return wet;
}

}  // namespace ampal
