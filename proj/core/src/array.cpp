#include "ampal/array.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ampal {

Array::Array(std::vector<int64_t> s, std::vector<real> d)
    : shape(std::move(s)), data(std::move(d)) {
    if (shape_product(shape) != static_cast<int64_t>(data.size())) {
        throw std::invalid_argument("Array: shape " + shape_to_string(shape) +
                                    " does not match data length " +
                                    std::to_string(data.size()));
    }
}

Array Array::zeros(std::vector<int64_t> shape) {
    auto n = shape_product(shape);
    return Array(std::move(shape), std::vector<real>(static_cast<size_t>(n), real(0)));
}

Array Array::full(std::vector<int64_t> shape, real value) {
    auto n = shape_product(shape);
    return Array(std::move(shape), std::vector<real>(static_cast<size_t>(n), value));
}

Array Array::scalar(real value) { return Array({}, {value}); }

Array Array::vector(std::vector<real> values) {
    auto n = static_cast<int64_t>(values.size());
    return Array({n}, std::move(values));
}

int64_t shape_product(const std::vector<int64_t>& shape) {
    int64_t p = 1;
    for (auto d : shape) {
        if (d < 0) throw std::invalid_argument("negative dimension in shape");
        p *= d;
    }
    return p;
}

std::string shape_to_string(const std::vector<int64_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

bool all_finite(const Array& a) {
    // NaN poisons the absolute sum and Inf survives it, so one pass suffices.
    real acc = 0;
    for (real v : a.data) acc += std::abs(v);
    return std::isfinite(acc);
}

void require_finite(const Array& a, const char* context) {
    if (!all_finite(a)) {
        throw std::runtime_error(std::string("non-finite values in ") + context);
    }
}

bool KnobVector::in_unit_box() const {
    for (real v : values) {
        if (!(v >= real(0) && v <= real(1))) return false;
    }
    return true;
}

real KnobVector::linf_distance(const KnobVector& other) const {
    if (values.size() != other.values.size()) {
        throw std::invalid_argument("knob vector dimension mismatch");
    }
    real d = 0;
    for (size_t i = 0; i < values.size(); ++i) {
        d = std::max(d, std::abs(values[i] - other.values[i]));
    }
    return d;
}

}  // namespace ampal
