#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fga/ops.hpp"

namespace fga {

namespace {

struct ConvPlan {
    int n, h, w, cin;
    int k, cout;
    int stride, pad;
    int oh, ow;
    bool depthwise;
};

ConvPlan plan_conv(const Tensor& x, const Tensor& w, const Tensor* b, const Conv2dOptions& opts) {
    if (x.rank() != 4) throw ShapeError("conv2d input must be rank-4 NHWC, got " + x.shape().str());
    if (w.rank() != 4) throw ShapeError("conv2d kernel must be rank-4 kxkxCinxCout, got " + w.shape().str());
    if (opts.stride < 1) throw ValueError("conv2d stride must be >= 1, got " + std::to_string(opts.stride));
    ConvPlan p{};
    p.n = x.dim(0);
    p.h = x.dim(1);
    p.w = x.dim(2);
    p.cin = x.dim(3);
    p.k = w.dim(0);
    p.cout = w.dim(3);
    p.stride = opts.stride;
    p.depthwise = opts.depthwise;
    if (w.dim(1) != p.k) throw ShapeError("conv2d kernel must be square, got " + w.shape().str());
    if (p.k % 2 == 0) throw ValueError("unsupported kernel: even size " + std::to_string(p.k));
    if (opts.depthwise) {
        if (w.dim(2) != 1 || p.cout != p.cin) {
            throw ShapeError("depthwise conv2d kernel must be kxkx1xC with C = input channels, got " +
                             w.shape().str() + " for input " + x.shape().str());
        }
    } else if (w.dim(2) != p.cin) {
        throw ShapeError("conv2d kernel channels " + std::to_string(w.dim(2)) + " do not match input channels " +
                         std::to_string(p.cin));
    }
    if (b != nullptr && (b->rank() != 1 || b->dim(0) != p.cout)) {
        throw ShapeError("conv2d bias length must equal output channels");
    }
    if (opts.padding == Padding::Same) {
        p.pad = (p.k - 1) / 2;
        p.oh = (p.h + p.stride - 1) / p.stride;
        p.ow = (p.w + p.stride - 1) / p.stride;
    } else {
        p.pad = 0;
        if (p.h < p.k || p.w < p.k) {
            throw ShapeError("conv2d valid padding: input " + x.shape().str() + " smaller than kernel " +
                             std::to_string(p.k));
        }
        p.oh = (p.h - p.k) / p.stride + 1;
        p.ow = (p.w - p.k) / p.stride + 1;
    }
    return p;
}

Tensor conv_forward(const Tensor& x, const Tensor& w, const Tensor* b, const ConvPlan& p) {
    Tensor out(Shape{p.n, p.oh, p.ow, p.cout});
    for (int n = 0; n < p.n; ++n) {
        for (int oh = 0; oh < p.oh; ++oh) {
            for (int ow = 0; ow < p.ow; ++ow) {
                double* orow = out.data() + out.offset(n, oh, ow, 0);
                for (int co = 0; co < p.cout; ++co) orow[co] = b ? (*b)[co] : 0.0;
                for (int kh = 0; kh < p.k; ++kh) {
                    const int hi = oh * p.stride - p.pad + kh;
                    if (hi < 0 || hi >= p.h) continue;
                    for (int kw = 0; kw < p.k; ++kw) {
                        const int wi = ow * p.stride - p.pad + kw;
                        if (wi < 0 || wi >= p.w) continue;
                        const double* xrow = x.data() + x.offset(n, hi, wi, 0);
                        if (p.depthwise) {
                            const double* wrow = w.data() + (static_cast<std::int64_t>(kh) * p.k + kw) * p.cin;
                            for (int c = 0; c < p.cin; ++c) orow[c] += xrow[c] * wrow[c];
                        } else {
                            const double* wbase =
                                w.data() + (static_cast<std::int64_t>(kh) * p.k + kw) * p.cin * p.cout;
                            for (int ci = 0; ci < p.cin; ++ci) {
                                const double xv = xrow[ci];
                                if (xv == 0.0) continue;
                                const double* wrow = wbase + static_cast<std::int64_t>(ci) * p.cout;
                                for (int co = 0; co < p.cout; ++co) orow[co] += xv * wrow[co];
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

} // namespace

NodeId conv2d(Tape& t, NodeId x, NodeId w, std::optional<NodeId> b, const Conv2dOptions& opts) {
    const Tensor& vx = t.value(x);
    const Tensor& vw = t.value(w);
    const Tensor* vb = b ? &t.value(*b) : nullptr;
    const ConvPlan p = plan_conv(vx, vw, vb, opts);
    Tensor out = conv_forward(vx, vw, vb, p);

    const bool gx = t.needs_grad(x);
    const bool gw = t.needs_grad(w);
    const bool gb = b && t.needs_grad(*b);
    if (!gx && !gw && !gb) return t.emit(std::move(out), false);
    const NodeId outid = t.emit(std::move(out), true);
    const NodeId bid = b ? *b : -1;
    t.emit_step([x, w, bid, p, gx, gw, gb, outid](Tape& tp) {
        if (!tp.has_grad(outid)) return;
        const Tensor& g = tp.grad(outid);
        const Tensor& vx2 = tp.value(x);
        const Tensor& vw2 = tp.value(w);
        Tensor* dx = gx ? &tp.grad_buffer(x) : nullptr;
        Tensor* dw = gw ? &tp.grad_buffer(w) : nullptr;
        Tensor* db = gb ? &tp.grad_buffer(bid) : nullptr;
        for (int n = 0; n < p.n; ++n) {
            for (int oh = 0; oh < p.oh; ++oh) {
                for (int ow = 0; ow < p.ow; ++ow) {
                    const double* grow = g.data() + g.offset(n, oh, ow, 0);
                    if (db) {
                        for (int co = 0; co < p.cout; ++co) (*db)[co] += grow[co];
                    }
                    for (int kh = 0; kh < p.k; ++kh) {
                        const int hi = oh * p.stride - p.pad + kh;
                        if (hi < 0 || hi >= p.h) continue;
                        for (int kw = 0; kw < p.k; ++kw) {
                            const int wi = ow * p.stride - p.pad + kw;
                            if (wi < 0 || wi >= p.w) continue;
                            const double* xrow = vx2.data() + vx2.offset(n, hi, wi, 0);
                            if (p.depthwise) {
                                const double* wrow =
                                    vw2.data() + (static_cast<std::int64_t>(kh) * p.k + kw) * p.cin;
                                for (int c = 0; c < p.cin; ++c) {
                                    if (dx) (*dx)[vx2.offset(n, hi, wi, c)] += grow[c] * wrow[c];
                                    if (dw) (*dw)[(static_cast<std::int64_t>(kh) * p.k + kw) * p.cin + c] +=
                                        grow[c] * xrow[c];
                                }
                            } else {
                                const std::int64_t wbase = (static_cast<std::int64_t>(kh) * p.k + kw) *
                                                           static_cast<std::int64_t>(p.cin) * p.cout;
                                for (int ci = 0; ci < p.cin; ++ci) {
                                    const double xv = xrow[ci];
                                    const double* wrow = vw2.data() + wbase + static_cast<std::int64_t>(ci) * p.cout;
                                    double acc = 0.0;
                                    for (int co = 0; co < p.cout; ++co) {
                                        const double gv = grow[co];
                                        acc += gv * wrow[co];
                                        if (dw) (*dw)[wbase + static_cast<std::int64_t>(ci) * p.cout + co] += gv * xv;
                                    }
                                    if (dx) (*dx)[vx2.offset(n, hi, wi, ci)] += acc;
                                }
                            }
                        }
                    }
                }
            }
        }
    });
    return outid;
}

NodeId pool(Tape& t, NodeId x, PoolKind kind) {
    const Tensor& v = t.value(x);
    if (v.rank() != 4) throw ShapeError("pool expects rank-4 NHWC input, got " + v.shape().str());
    const int n = v.dim(0), h = v.dim(1), w = v.dim(2), c = v.dim(3);
    const bool ng = t.needs_grad(x);

    switch (kind) {
        case PoolKind::MaxPool2x2: {
            if (h % 2 != 0 || w % 2 != 0) {
                throw ShapeError("maxpool2x2 needs even H and W, got " + v.shape().str());
            }
            const int oh = h / 2, ow = w / 2;
            Tensor out(Shape{n, oh, ow, c});
            std::vector<std::int64_t> arg(static_cast<std::size_t>(out.size()));
            for (int in = 0; in < n; ++in)
                for (int i = 0; i < oh; ++i)
                    for (int j = 0; j < ow; ++j)
                        for (int ch = 0; ch < c; ++ch) {
                            double best = v.at(in, 2 * i, 2 * j, ch);
                            std::int64_t besti = v.offset(in, 2 * i, 2 * j, ch);
                            for (int dy = 0; dy < 2; ++dy)
                                for (int dx2 = 0; dx2 < 2; ++dx2) {
                                    const double cand = v.at(in, 2 * i + dy, 2 * j + dx2, ch);
                                    if (cand > best) {
                                        best = cand;
                                        besti = v.offset(in, 2 * i + dy, 2 * j + dx2, ch);
                                    }
                                }
                            const std::int64_t o = out.offset(in, i, j, ch);
                            out[o] = best;
                            arg[static_cast<std::size_t>(o)] = besti;
                        }
            if (!ng) return t.emit(std::move(out), false);
            const NodeId outid = t.emit(std::move(out), true);
            t.emit_step([x, outid, arg = std::move(arg)](Tape& tp) {
                if (!tp.has_grad(outid)) return;
                const Tensor& g = tp.grad(outid);
                Tensor& gx = tp.grad_buffer(x);
                for (std::int64_t i = 0; i < g.size(); ++i) gx[arg[static_cast<std::size_t>(i)]] += g[i];
            });
            return outid;
        }
        case PoolKind::GlobalAvg: {
            Tensor out(Shape{n, 1, 1, c});
            const double inv = 1.0 / (static_cast<double>(h) * w);
            for (int in = 0; in < n; ++in)
                for (int ch = 0; ch < c; ++ch) {
                    double s = 0.0;
                    for (int i = 0; i < h; ++i)
                        for (int j = 0; j < w; ++j) s += v.at(in, i, j, ch);
                    out.at(in, 0, 0, ch) = s * inv;
                }
            if (!ng) return t.emit(std::move(out), false);
            const NodeId outid = t.emit(std::move(out), true);
            t.emit_step([x, outid, n, h, w, c, inv](Tape& tp) {
                if (!tp.has_grad(outid)) return;
                const Tensor& g = tp.grad(outid);
                Tensor& gx = tp.grad_buffer(x);
                for (int in = 0; in < n; ++in)
                    for (int ch = 0; ch < c; ++ch) {
                        const double gv = g.at(in, 0, 0, ch) * inv;
                        for (int i = 0; i < h; ++i)
                            for (int j = 0; j < w; ++j) gx[gx.offset(in, i, j, ch)] += gv;
                    }
            });
            return outid;
        }
        case PoolKind::GlobalMax: {
            Tensor out(Shape{n, 1, 1, c});
            std::vector<std::int64_t> arg(static_cast<std::size_t>(out.size()));
            for (int in = 0; in < n; ++in)
                for (int ch = 0; ch < c; ++ch) {
                    double best = v.at(in, 0, 0, ch);
                    std::int64_t besti = v.offset(in, 0, 0, ch);
                    for (int i = 0; i < h; ++i)
                        for (int j = 0; j < w; ++j) {
                            const double cand = v.at(in, i, j, ch);
                            if (cand > best) {
                                best = cand;
                                besti = v.offset(in, i, j, ch);
                            }
                        }
                    const std::int64_t o = out.offset(in, 0, 0, ch);
                    out[o] = best;
                    arg[static_cast<std::size_t>(o)] = besti;
                }
            if (!ng) return t.emit(std::move(out), false);
            const NodeId outid = t.emit(std::move(out), true);
            t.emit_step([x, outid, arg = std::move(arg)](Tape& tp) {
                if (!tp.has_grad(outid)) return;
                const Tensor& g = tp.grad(outid);
                Tensor& gx = tp.grad_buffer(x);
                for (std::int64_t i = 0; i < g.size(); ++i) gx[arg[static_cast<std::size_t>(i)]] += g[i];
            });
            return outid;
        }
        case PoolKind::ChannelAvg: {
            Tensor out(Shape{n, h, w, 1});
            const double inv = 1.0 / c;
            for (int in = 0; in < n; ++in)
                for (int i = 0; i < h; ++i)
                    for (int j = 0; j < w; ++j) {
                        const double* row = v.data() + v.offset(in, i, j, 0);
                        double s = 0.0;
                        for (int ch = 0; ch < c; ++ch) s += row[ch];
                        out.at(in, i, j, 0) = s * inv;
                    }
            if (!ng) return t.emit(std::move(out), false);
            const NodeId outid = t.emit(std::move(out), true);
            t.emit_step([x, outid, c, inv](Tape& tp) {
                if (!tp.has_grad(outid)) return;
                const Tensor& g = tp.grad(outid);
                Tensor& gx = tp.grad_buffer(x);
                for (std::int64_t p = 0; p < g.size(); ++p) {
                    const double gv = g[p] * inv;
                    double* row = gx.data() + p * c;
                    for (int ch = 0; ch < c; ++ch) row[ch] += gv;
                }
            });
            return outid;
        }
        case PoolKind::ChannelMax: {
            Tensor out(Shape{n, h, w, 1});
            std::vector<int> arg(static_cast<std::size_t>(out.size()));
            for (std::int64_t p = 0; p < out.size(); ++p) {
                const double* row = v.data() + p * c;
                int best = 0;
                for (int ch = 1; ch < c; ++ch) {
                    if (row[ch] > row[best]) best = ch;
                }
                out[p] = row[best];
                arg[static_cast<std::size_t>(p)] = best;
            }
            if (!ng) return t.emit(std::move(out), false);
            const NodeId outid = t.emit(std::move(out), true);
            t.emit_step([x, outid, c, arg = std::move(arg)](Tape& tp) {
                if (!tp.has_grad(outid)) return;
                const Tensor& g = tp.grad(outid);
                Tensor& gx = tp.grad_buffer(x);
                for (std::int64_t p = 0; p < g.size(); ++p) {
                    gx[p * c + arg[static_cast<std::size_t>(p)]] += g[p];
                }
            });
            return outid;
        }
    }
    throw ValueError("unknown pool kind");
}

// ---------------------------------------------------------------------------
// Resampling

namespace {

struct Taps {
    // Up to 4 source taps per output coordinate (2 bilinear, 4 bicubic).
    std::vector<int> index;
    std::vector<double> weight;
    int per = 0;
};

double catmull_rom(double t) {
    const double a = -0.5;
    const double at = std::abs(t);
    if (at <= 1.0) return ((a + 2.0) * at - (a + 3.0)) * at * at + 1.0;
    if (at < 2.0) return a * (((at - 5.0) * at + 8.0) * at - 4.0);
    return 0.0;
}

Taps make_taps(int in_size, int out_size, ResizeKind kind) {
    Taps taps;
    taps.per = kind == ResizeKind::Bilinear ? 2 : 4;
    taps.index.resize(static_cast<std::size_t>(out_size) * taps.per);
    taps.weight.resize(static_cast<std::size_t>(out_size) * taps.per);
    const double ratio = static_cast<double>(in_size) / out_size;
    for (int o = 0; o < out_size; ++o) {
        const double src = (o + 0.5) * ratio - 0.5;
        const int base = static_cast<int>(std::floor(src));
        const double frac = src - base;
        if (kind == ResizeKind::Bilinear) {
            const int i0 = std::clamp(base, 0, in_size - 1);
            const int i1 = std::clamp(base + 1, 0, in_size - 1);
            taps.index[static_cast<std::size_t>(o) * 2] = i0;
            taps.index[static_cast<std::size_t>(o) * 2 + 1] = i1;
            taps.weight[static_cast<std::size_t>(o) * 2] = 1.0 - frac;
            taps.weight[static_cast<std::size_t>(o) * 2 + 1] = frac;
        } else {
            for (int k = 0; k < 4; ++k) {
                const int i = base - 1 + k;
                taps.index[static_cast<std::size_t>(o) * 4 + k] = std::clamp(i, 0, in_size - 1);
                taps.weight[static_cast<std::size_t>(o) * 4 + k] = catmull_rom(frac - (k - 1));
            }
        }
    }
    return taps;
}

Tensor resize4(const Tensor& x, int out_h, int out_w, ResizeKind kind) {
    const int n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    const Taps th = make_taps(h, out_h, kind);
    const Taps tw = make_taps(w, out_w, kind);
    Tensor out(Shape{n, out_h, out_w, c});
    for (int in = 0; in < n; ++in)
        for (int oh = 0; oh < out_h; ++oh)
            for (int ow = 0; ow < out_w; ++ow) {
                double* orow = out.data() + out.offset(in, oh, ow, 0);
                for (int ih = 0; ih < th.per; ++ih) {
                    const int si = th.index[static_cast<std::size_t>(oh) * th.per + ih];
                    const double wh = th.weight[static_cast<std::size_t>(oh) * th.per + ih];
                    if (wh == 0.0) continue;
                    for (int iw = 0; iw < tw.per; ++iw) {
                        const int sj = tw.index[static_cast<std::size_t>(ow) * tw.per + iw];
                        const double ww = wh * tw.weight[static_cast<std::size_t>(ow) * tw.per + iw];
                        if (ww == 0.0) continue;
                        const double* xrow = x.data() + x.offset(in, si, sj, 0);
                        for (int ch = 0; ch < c; ++ch) orow[ch] += ww * xrow[ch];
                    }
                }
            }
    return out;
}

} // namespace

NodeId resize(Tape& t, NodeId x, int out_h, int out_w, ResizeKind kind) {
    const Tensor& v = t.value(x);
    if (v.rank() != 4) throw ShapeError("resize expects rank-4 NHWC input, got " + v.shape().str());
    if (out_h < 1 || out_w < 1) throw ValueError("resize target must be >= 1x1");
    Tensor out = resize4(v, out_h, out_w, kind);
    if (!t.needs_grad(x)) return t.emit(std::move(out), false);
    const int n = v.dim(0), h = v.dim(1), w = v.dim(2), c = v.dim(3);
    const NodeId outid = t.emit(std::move(out), true);
    t.emit_step([x, outid, n, h, w, c, out_h, out_w, kind](Tape& tp) {
        if (!tp.has_grad(outid)) return;
        const Tensor& g = tp.grad(outid);
        Tensor& gx = tp.grad_buffer(x);
        const Taps th = make_taps(h, out_h, kind);
        const Taps tw = make_taps(w, out_w, kind);
        for (int in = 0; in < n; ++in)
            for (int oh = 0; oh < out_h; ++oh)
                for (int ow = 0; ow < out_w; ++ow) {
                    const double* grow = g.data() + g.offset(in, oh, ow, 0);
                    for (int ih = 0; ih < th.per; ++ih) {
                        const int si = th.index[static_cast<std::size_t>(oh) * th.per + ih];
                        const double wh = th.weight[static_cast<std::size_t>(oh) * th.per + ih];
                        if (wh == 0.0) continue;
                        for (int iw = 0; iw < tw.per; ++iw) {
                            const int sj = tw.index[static_cast<std::size_t>(ow) * tw.per + iw];
                            const double ww = wh * tw.weight[static_cast<std::size_t>(ow) * tw.per + iw];
                            if (ww == 0.0) continue;
                            double* xrow = gx.data() + gx.offset(in, si, sj, 0);
                            for (int ch = 0; ch < c; ++ch) xrow[ch] += ww * grow[ch];
                        }
                    }
                }
    });
    return outid;
}

Tensor resize_values(const Tensor& x, int out_h, int out_w, ResizeKind kind) {
    if (out_h < 1 || out_w < 1) throw ValueError("resize target must be >= 1x1");
    if (x.rank() == 4) return resize4(x, out_h, out_w, kind);
    if (x.rank() == 3) {
        Tensor x4(Shape{1, x.dim(0), x.dim(1), x.dim(2)}, x.values());
        Tensor o = resize4(x4, out_h, out_w, kind);
        return Tensor(Shape{out_h, out_w, x.dim(2)}, o.values());
    }
    if (x.rank() == 2) {
        Tensor x4(Shape{1, x.dim(0), x.dim(1), 1}, x.values());
        Tensor o = resize4(x4, out_h, out_w, kind);
        return Tensor(Shape{out_h, out_w}, o.values());
    }
    throw ShapeError("resize_values expects rank 2..4, got " + x.shape().str());
}

} // namespace fga
