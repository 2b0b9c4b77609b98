#pragma once

#include <vector>

#include "fga/tape.hpp"
#include "fga/tensor.hpp"

namespace fga {

/// Complex-valued H x W spectrum, split into real/imaginary buffers.
struct ComplexPlane {
    int h = 0;
    int w = 0;
    std::vector<double> re, im;

    ComplexPlane() = default;
    ComplexPlane(int height, int width)
        : h(height), w(width), re(static_cast<std::size_t>(height) * width, 0.0),
          im(static_cast<std::size_t>(height) * width, 0.0) {}

    std::size_t idx(int u, int v) const { return static_cast<std::size_t>(u) * w + v; }
};

/// Direct-summation 2D DFT, F[u,v] = sum x[i,j] exp(-2*pi*i*(ui/H + vj/W)).
/// O(H^2 W^2); the reference the fast path is tested against.
ComplexPlane dft2d_naive(const Tensor& plane);

/// Row-column 2D DFT with a radix-2 fast path for power-of-two extents and
/// direct summation otherwise. Matches dft2d_naive within 1e-9.
ComplexPlane fft2d(const Tensor& plane);

/// Inverse transform with 1/(HW) normalization; returns the real part.
Tensor ifft2d_real(const ComplexPlane& f);

/// m[u,v] = sqrt(re^2 + im^2).
Tensor magnitude(const ComplexPlane& f);

/// Unnormalized adjoint (conjugate-transpose) transform, used by the
/// magnitude backward rule.
ComplexPlane adjoint2d(const ComplexPlane& f);

/// Tape operation: per-sample, per-channel |FFT2D| of a rank-4 NHWC tensor.
/// Backward applies the adjoint transform to (dL/dm) * F/|F|, taking the
/// real part; bins with |F| = 0 contribute nothing.
NodeId fft_magnitude(Tape& t, NodeId x);

} // namespace fga
