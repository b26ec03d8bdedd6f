#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace ampal {

// 64-bit everywhere by default; build with -DAMPAL_REAL_FLOAT for speed at
// the cost of failing the finite-difference checks.
#ifdef AMPAL_REAL_FLOAT
using real = float;
#else
using real = double;
#endif

/// Dense row-major real array. Shapes used by the engine are [T], [C,T]
/// ([channel][time]), [Cout,Cin,K] kernels and [C,k] linear maps.
struct Array {
    std::vector<int64_t> shape;
    std::vector<real> data;

    Array() = default;
    Array(std::vector<int64_t> s, std::vector<real> d);

    static Array zeros(std::vector<int64_t> shape);
    static Array full(std::vector<int64_t> shape, real value);
    static Array scalar(real value);
    static Array vector(std::vector<real> values);

    int64_t size() const { return static_cast<int64_t>(data.size()); }
    int64_t ndim() const { return static_cast<int64_t>(shape.size()); }
    int64_t dim(int i) const { return shape[static_cast<size_t>(i)]; }

    bool same_shape(const Array& other) const { return shape == other.shape; }
    bool is_scalar() const { return data.size() == 1; }

    real& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
    real operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }
};

int64_t shape_product(const std::vector<int64_t>& shape);
std::string shape_to_string(const std::vector<int64_t>& shape);

/// True iff every element is finite (no NaN/Inf).
bool all_finite(const Array& a);

/// Throws std::runtime_error naming `context` if `a` contains NaN/Inf.
void require_finite(const Array& a, const char* context);

/// Mono audio: samples plus sample rate.
struct AudioSignal {
    std::vector<real> samples;
    int sample_rate = 48000;

    int64_t length() const { return static_cast<int64_t>(samples.size()); }
};

/// Global condition g: one real in [0,1] per amp knob.
struct KnobVector {
    std::vector<real> values;

    KnobVector() = default;
    explicit KnobVector(std::vector<real> v) : values(std::move(v)) {}

    int knob_count() const { return static_cast<int>(values.size()); }
    bool in_unit_box() const;
    /// L-infinity distance; throws on dimension mismatch.
    real linf_distance(const KnobVector& other) const;
};

}  // namespace ampal
