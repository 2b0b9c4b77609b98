#include "fga/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "fga/rng.hpp"

namespace fga {

Shape::Shape(std::vector<int> dims) : dims_(std::move(dims)) {
    if (dims_.empty() || dims_.size() > 4) {
        throw ShapeError("shape rank must be 1..4, got rank " + std::to_string(dims_.size()));
    }
    for (int d : dims_) {
        if (d < 1) {
            throw ShapeError("invalid shape: extent " + std::to_string(d) + " in " + str());
        }
    }
}

std::int64_t Shape::elements() const {
    std::int64_t n = 1;
    for (int d : dims_) n *= d;
    return n;
}

std::string Shape::str() const {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < dims_.size(); ++i) {
        if (i) os << "x";
        os << dims_[i];
    }
    os << ")";
    return os.str();
}

Tensor::Tensor(const Shape& shape, double fill)
    : shape_(shape), v_(static_cast<std::size_t>(shape.elements()), fill) {}

Tensor::Tensor(const Shape& shape, std::vector<double> values) : shape_(shape), v_(std::move(values)) {
    if (static_cast<std::int64_t>(v_.size()) != shape_.elements()) {
        throw ShapeError("buffer length " + std::to_string(v_.size()) + " does not match shape " + shape_.str());
    }
}

Tensor Tensor::row(std::vector<double> values) {
    const int n = static_cast<int>(values.size());
    return Tensor(Shape{n}, std::move(values));
}

void Tensor::fill(double v) {
    for (auto& x : v_) x = v;
}

bool Tensor::same_values(const Tensor& o) const {
    if (shape_ != o.shape_) return false;
    return std::memcmp(v_.data(), o.v_.data(), v_.size() * sizeof(double)) == 0;
}

const char* InitScheme::name() const {
    switch (kind) {
        case Kind::Zeros: return "zeros";
        case Kind::Constant: return "constant";
        case Kind::UniformFan: return fan == Fan::Glorot ? "glorot_uniform" : "he_uniform";
    }
    return "?";
}

Tensor tensor_init(const Shape& shape, const InitScheme& scheme) {
    Tensor t(shape);
    switch (scheme.kind) {
        case InitScheme::Kind::Zeros:
            break;
        case InitScheme::Kind::Constant:
            t.fill(scheme.value);
            break;
        case InitScheme::Kind::UniformFan: {
            if (scheme.fan_in < 1 || scheme.fan_out < 1) {
                throw ValueError("fan-based init needs positive fans");
            }
            const double limit = scheme.fan == InitScheme::Fan::Glorot
                                     ? std::sqrt(6.0 / static_cast<double>(scheme.fan_in + scheme.fan_out))
                                     : std::sqrt(6.0 / static_cast<double>(scheme.fan_in));
            Rng rng(scheme.seed);
            for (std::int64_t i = 0; i < t.size(); ++i) {
                t[i] = rng.uniform(-limit, limit);
            }
            break;
        }
    }
    return t;
}

Tensor stack(const std::vector<const Tensor*>& samples) {
    if (samples.empty()) throw ValueError("stack: empty sample list");
    const Shape& s = samples[0]->shape();
    if (s.rank() != 3) throw ShapeError("stack expects rank-3 samples, got " + s.str());
    Tensor out(Shape{static_cast<int>(samples.size()), s.dim(0), s.dim(1), s.dim(2)});
    const std::int64_t per = s.elements();
    for (std::size_t n = 0; n < samples.size(); ++n) {
        if (samples[n]->shape() != s) {
            throw ShapeError("stack: sample " + std::to_string(n) + " has shape " + samples[n]->shape().str() +
                             ", expected " + s.str());
        }
        std::memcpy(out.data() + static_cast<std::int64_t>(n) * per, samples[n]->data(),
                    static_cast<std::size_t>(per) * sizeof(double));
    }
    return out;
}

int argmax(const double* v, int n) {
    int best = 0;
    for (int i = 1; i < n; ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

} // namespace fga
