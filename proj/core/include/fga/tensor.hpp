#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "fga/errors.hpp"

namespace fga {

/// Dense tensor shape, rank 1 to 4. Rank-4 tensors use the
/// sample x height x width x channel layout.
class Shape {
public:
    Shape() = default;
    Shape(std::initializer_list<int> dims) : Shape(std::vector<int>(dims)) {}
    explicit Shape(std::vector<int> dims);

    int rank() const { return static_cast<int>(dims_.size()); }
    int dim(int i) const { return dims_[static_cast<std::size_t>(i)]; }
    const std::vector<int>& dims() const { return dims_; }
    std::int64_t elements() const;

    bool operator==(const Shape& o) const { return dims_ == o.dims_; }
    bool operator!=(const Shape& o) const { return !(*this == o); }

    std::string str() const;

private:
    std::vector<int> dims_;
};

/// Dense double-precision tensor, row-major in the layout convention.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(const Shape& shape, double fill = 0.0);
    Tensor(const Shape& shape, std::vector<double> values);

    static Tensor zeros(const Shape& shape) { return Tensor(shape, 0.0); }
    static Tensor constant(const Shape& shape, double v) { return Tensor(shape, v); }
    static Tensor scalar(double v) { return Tensor(Shape{1}, std::vector<double>{v}); }
    static Tensor row(std::vector<double> values);

    const Shape& shape() const { return shape_; }
    int rank() const { return shape_.rank(); }
    int dim(int i) const { return shape_.dim(i); }
    std::int64_t size() const { return static_cast<std::int64_t>(v_.size()); }
    bool empty() const { return v_.empty(); }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }
    std::vector<double>& values() { return v_; }
    const std::vector<double>& values() const { return v_; }

    double& operator[](std::int64_t i) { return v_[static_cast<std::size_t>(i)]; }
    double operator[](std::int64_t i) const { return v_[static_cast<std::size_t>(i)]; }

    // Rank-4 NHWC accessors.
    std::int64_t offset(int n, int h, int w, int c) const {
        return ((static_cast<std::int64_t>(n) * shape_.dim(1) + h) * shape_.dim(2) + w) * shape_.dim(3) + c;
    }
    double& at(int n, int h, int w, int c) { return v_[static_cast<std::size_t>(offset(n, h, w, c))]; }
    double at(int n, int h, int w, int c) const { return v_[static_cast<std::size_t>(offset(n, h, w, c))]; }

    // Rank-2 accessors.
    double& at(int r, int c) { return v_[static_cast<std::size_t>(r) * shape_.dim(1) + c]; }
    double at(int r, int c) const { return v_[static_cast<std::size_t>(r) * shape_.dim(1) + c]; }

    void fill(double v);
    bool same_values(const Tensor& o) const;  // bitwise comparison

private:
    Shape shape_;
    std::vector<double> v_;
};

/// A trainable (or frozen) tensor with its gradient slot. The gradient
/// always has the value's shape and is zero right after reset_grad().
struct Variable {
    Tensor value;
    Tensor grad;
    bool trainable = true;

    Variable() = default;
    explicit Variable(Tensor v, bool trainable_flag = true)
        : value(std::move(v)), grad(value.shape(), 0.0), trainable(trainable_flag) {}

    void reset_grad() { grad.fill(0.0); }
};

/// Initialization schemes for tensor_init. The fan-based scheme draws
/// uniform in +-sqrt(6/(fan_in+fan_out)) for layers feeding a sigmoid or
/// softmax, and +-sqrt(6/fan_in) for layers feeding a ReLU.
struct InitScheme {
    enum class Kind { Zeros, Constant, UniformFan };
    enum class Fan { Glorot, He };

    Kind kind = Kind::Zeros;
    double value = 0.0;
    Fan fan = Fan::Glorot;
    std::int64_t fan_in = 1;
    std::int64_t fan_out = 1;
    std::uint64_t seed = 0;

    static InitScheme zeros() { return {}; }
    static InitScheme constant(double v) {
        InitScheme s;
        s.kind = Kind::Constant;
        s.value = v;
        return s;
    }
    static InitScheme glorot_uniform(std::int64_t fan_in, std::int64_t fan_out, std::uint64_t seed) {
        InitScheme s;
        s.kind = Kind::UniformFan;
        s.fan = Fan::Glorot;
        s.fan_in = fan_in;
        s.fan_out = fan_out;
        s.seed = seed;
        return s;
    }
    static InitScheme he_uniform(std::int64_t fan_in, std::uint64_t seed) {
        InitScheme s;
        s.kind = Kind::UniformFan;
        s.fan = Fan::He;
        s.fan_in = fan_in;
        s.seed = seed;
        return s;
    }

    const char* name() const;
};

/// Deterministic tensor construction; identical (scheme, seed) pairs yield
/// bitwise-identical tensors.
Tensor tensor_init(const Shape& shape, const InitScheme& scheme);

/// Stacks rank-3 H x W x C tensors of equal shape into one N x H x W x C batch.
Tensor stack(const std::vector<const Tensor*>& samples);

/// Index of the largest element; lowest index wins ties.
int argmax(const double* v, int n);

} // namespace fga
