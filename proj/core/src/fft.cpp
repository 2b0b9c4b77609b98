#include "fga/fft.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace fga {

namespace {

using cplx = std::complex<double>;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 Cooley-Tukey; sign = -1 forward, +1 inverse
// (unscaled).
void fft_pow2(std::vector<cplx>& a, int sign) {
    const int n = static_cast<int>(a.size());
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[static_cast<std::size_t>(i)], a[static_cast<std::size_t>(j)]);
    }
    for (int len = 2; len <= n; len <<= 1) {
        const double ang = sign * 2.0 * std::numbers::pi / len;
        const cplx wl(std::cos(ang), std::sin(ang));
        for (int i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (int k = 0; k < len / 2; ++k) {
                const cplx u = a[static_cast<std::size_t>(i + k)];
                const cplx v = a[static_cast<std::size_t>(i + k + len / 2)] * w;
                a[static_cast<std::size_t>(i + k)] = u + v;
                a[static_cast<std::size_t>(i + k + len / 2)] = u - v;
                w *= wl;
            }
        }
    }
}

void dft_any(std::vector<cplx>& a, int sign) {
    const int n = static_cast<int>(a.size());
    std::vector<cplx> out(static_cast<std::size_t>(n));
    for (int u = 0; u < n; ++u) {
        cplx acc(0.0, 0.0);
        for (int j = 0; j < n; ++j) {
            const double ang = sign * 2.0 * std::numbers::pi * u * j / n;
            acc += a[static_cast<std::size_t>(j)] * cplx(std::cos(ang), std::sin(ang));
        }
        out[static_cast<std::size_t>(u)] = acc;
    }
    a = std::move(out);
}

void transform1d(std::vector<cplx>& a, int sign) {
    if (a.size() <= 1) return;
    if (is_pow2(static_cast<int>(a.size()))) {
        fft_pow2(a, sign);
    } else {
        dft_any(a, sign);
    }
}

// Row-column separable 2D transform, unscaled.
ComplexPlane transform2d(const ComplexPlane& in, int sign) {
    ComplexPlane out(in.h, in.w);
    std::vector<cplx> line;
    // Rows.
    std::vector<cplx> rows(static_cast<std::size_t>(in.h) * in.w);
    for (int i = 0; i < in.h; ++i) {
        line.assign(static_cast<std::size_t>(in.w), cplx());
        for (int j = 0; j < in.w; ++j) line[static_cast<std::size_t>(j)] = cplx(in.re[in.idx(i, j)], in.im[in.idx(i, j)]);
        transform1d(line, sign);
        for (int j = 0; j < in.w; ++j) rows[in.idx(i, j)] = line[static_cast<std::size_t>(j)];
    }
    // Columns.
    for (int j = 0; j < in.w; ++j) {
        line.assign(static_cast<std::size_t>(in.h), cplx());
        for (int i = 0; i < in.h; ++i) line[static_cast<std::size_t>(i)] = rows[in.idx(i, j)];
        transform1d(line, sign);
        for (int i = 0; i < in.h; ++i) {
            out.re[out.idx(i, j)] = line[static_cast<std::size_t>(i)].real();
            out.im[out.idx(i, j)] = line[static_cast<std::size_t>(i)].imag();
        }
    }
    return out;
}

ComplexPlane from_real(const Tensor& plane) {
    if (plane.rank() != 2) throw ShapeError("expected a rank-2 HxW plane, got " + plane.shape().str());
    ComplexPlane c(plane.dim(0), plane.dim(1));
    for (std::int64_t i = 0; i < plane.size(); ++i) c.re[static_cast<std::size_t>(i)] = plane[i];
    return c;
}

} // namespace

ComplexPlane dft2d_naive(const Tensor& plane) {
    if (plane.rank() != 2) throw ShapeError("expected a rank-2 HxW plane, got " + plane.shape().str());
    const int h = plane.dim(0), w = plane.dim(1);
    ComplexPlane out(h, w);
    for (int u = 0; u < h; ++u) {
        for (int v = 0; v < w; ++v) {
            double sre = 0.0, sim = 0.0;
            for (int i = 0; i < h; ++i) {
                for (int j = 0; j < w; ++j) {
                    const double ang = -2.0 * std::numbers::pi *
                                       (static_cast<double>(u) * i / h + static_cast<double>(v) * j / w);
                    const double x = plane[static_cast<std::int64_t>(i) * w + j];
                    sre += x * std::cos(ang);
                    sim += x * std::sin(ang);
                }
            }
            out.re[out.idx(u, v)] = sre;
            out.im[out.idx(u, v)] = sim;
        }
    }
    return out;
}

ComplexPlane fft2d(const Tensor& plane) { return transform2d(from_real(plane), -1); }

Tensor ifft2d_real(const ComplexPlane& f) {
    ComplexPlane back = transform2d(f, +1);
    Tensor out(Shape{f.h, f.w});
    const double scale = 1.0 / (static_cast<double>(f.h) * f.w);
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = back.re[static_cast<std::size_t>(i)] * scale;
    return out;
}

Tensor magnitude(const ComplexPlane& f) {
    Tensor out(Shape{f.h, f.w});
    for (std::int64_t i = 0; i < out.size(); ++i) {
        const double re = f.re[static_cast<std::size_t>(i)];
        const double im = f.im[static_cast<std::size_t>(i)];
        out[i] = std::sqrt(re * re + im * im);
    }
    return out;
}

ComplexPlane adjoint2d(const ComplexPlane& f) { return transform2d(f, +1); }

NodeId fft_magnitude(Tape& t, NodeId x) {
    const Tensor& v = t.value(x);
    if (v.rank() != 4) throw ShapeError("fft_magnitude expects rank-4 NHWC input, got " + v.shape().str());
    const int n = v.dim(0), h = v.dim(1), w = v.dim(2), c = v.dim(3);

    Tensor out(v.shape());
    std::vector<ComplexPlane> spectra(static_cast<std::size_t>(n) * c);
    Tensor plane(Shape{h, w});
    for (int in = 0; in < n; ++in) {
        for (int ch = 0; ch < c; ++ch) {
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j) plane[static_cast<std::int64_t>(i) * w + j] = v.at(in, i, j, ch);
            ComplexPlane f = fft2d(plane);
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j) {
                    const std::size_t k = f.idx(i, j);
                    out.at(in, i, j, ch) = std::sqrt(f.re[k] * f.re[k] + f.im[k] * f.im[k]);
                }
            spectra[static_cast<std::size_t>(in) * c + ch] = std::move(f);
        }
    }

    if (!t.needs_grad(x)) return t.emit(std::move(out), false);
    const NodeId outid = t.emit(std::move(out), true);
    t.emit_step([x, outid, n, h, w, c, spectra = std::move(spectra)](Tape& tp) {
        if (!tp.has_grad(outid)) return;
        const Tensor& g = tp.grad(outid);
        const Tensor& m = tp.value(outid);
        Tensor& gx = tp.grad_buffer(x);
        for (int in = 0; in < n; ++in) {
            for (int ch = 0; ch < c; ++ch) {
                const ComplexPlane& f = spectra[static_cast<std::size_t>(in) * c + ch];
                ComplexPlane v2(h, w);
                for (int i = 0; i < h; ++i)
                    for (int j = 0; j < w; ++j) {
                        const std::size_t k = f.idx(i, j);
                        const double mag = m.at(in, i, j, ch);
                        if (mag == 0.0) continue;
                        const double s = g.at(in, i, j, ch) / mag;
                        v2.re[k] = s * f.re[k];
                        v2.im[k] = s * f.im[k];
                    }
                const ComplexPlane spatial = adjoint2d(v2);
                for (int i = 0; i < h; ++i)
                    for (int j = 0; j < w; ++j) gx[gx.offset(in, i, j, ch)] += spatial.re[spatial.idx(i, j)];
            }
        }
    });
    return outid;
}

} // namespace fga
