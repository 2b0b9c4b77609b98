#include "fga/ops.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <string>

#include "fga/rng.hpp"

namespace fga {

namespace {

// Shapes padded to 4 leading-one dims so one loop nest serves every rank.
struct Dims4 {
    std::array<std::int64_t, 4> d{1, 1, 1, 1};
    std::array<std::int64_t, 4> stride{0, 0, 0, 0};
};

Dims4 pad4(const Shape& s) {
    Dims4 out;
    const int off = 4 - s.rank();
    for (int i = 0; i < s.rank(); ++i) out.d[static_cast<std::size_t>(off + i)] = s.dim(i);
    std::int64_t st = 1;
    for (int i = 3; i >= 0; --i) {
        out.stride[static_cast<std::size_t>(i)] = st;
        st *= out.d[static_cast<std::size_t>(i)];
    }
    return out;
}

// Strides of b aligned to a's padded dims, zeroed on broadcast axes.
Dims4 broadcast_strides(const Shape& a, const Shape& b) {
    if (a.rank() != b.rank()) {
        throw ShapeError("elementwise rank mismatch: " + a.str() + " vs " + b.str());
    }
    for (int i = 0; i < a.rank(); ++i) {
        if (b.dim(i) != a.dim(i) && b.dim(i) != 1) {
            throw ShapeError("shape " + b.str() + " does not broadcast to " + a.str());
        }
    }
    Dims4 da = pad4(a);
    Dims4 db = pad4(b);
    for (int i = 0; i < 4; ++i) {
        if (db.d[static_cast<std::size_t>(i)] == 1 && da.d[static_cast<std::size_t>(i)] != 1) {
            db.stride[static_cast<std::size_t>(i)] = 0;
        }
    }
    db.d = da.d;
    return db;
}

enum class Ew { Add, Sub, Mul };

// The backward closure needs the output id, so every op emits its node
// first and then registers the step.
NodeId elementwise_op(Tape& t, NodeId a, NodeId b, Ew kind) {
    const Tensor& va = t.value(a);
    const Tensor& vb = t.value(b);
    const Dims4 da = pad4(va.shape());
    const Dims4 sb = broadcast_strides(va.shape(), vb.shape());

    Tensor out(va.shape());
    {
        std::int64_t flat = 0;
        for (std::int64_t i0 = 0; i0 < da.d[0]; ++i0)
            for (std::int64_t i1 = 0; i1 < da.d[1]; ++i1)
                for (std::int64_t i2 = 0; i2 < da.d[2]; ++i2)
                    for (std::int64_t i3 = 0; i3 < da.d[3]; ++i3, ++flat) {
                        const std::int64_t bi =
                            i0 * sb.stride[0] + i1 * sb.stride[1] + i2 * sb.stride[2] + i3 * sb.stride[3];
                        const double x = va[flat];
                        const double y = vb[bi];
                        out[flat] = kind == Ew::Add ? x + y : kind == Ew::Sub ? x - y : x * y;
                    }
    }

    const bool ga = t.needs_grad(a);
    const bool gb = t.needs_grad(b);
    if (!ga && !gb) return t.emit(std::move(out), false, nullptr);

    const NodeId outid = t.emit(std::move(out), true, nullptr);
    t.emit_step([a, b, kind, da, sb, ga, gb, outid](Tape& tp) {
        if (!tp.has_grad(outid)) return;
        const Tensor& g = tp.grad(outid);
        const Tensor& va2 = tp.value(a);
        const Tensor& vb2 = tp.value(b);
        Tensor* gra = ga ? &tp.grad_buffer(a) : nullptr;
        Tensor* grb = gb ? &tp.grad_buffer(b) : nullptr;
        std::int64_t flat = 0;
        for (std::int64_t i0 = 0; i0 < da.d[0]; ++i0)
            for (std::int64_t i1 = 0; i1 < da.d[1]; ++i1)
                for (std::int64_t i2 = 0; i2 < da.d[2]; ++i2)
                    for (std::int64_t i3 = 0; i3 < da.d[3]; ++i3, ++flat) {
                        const std::int64_t bi =
                            i0 * sb.stride[0] + i1 * sb.stride[1] + i2 * sb.stride[2] + i3 * sb.stride[3];
                        const double gv = g[flat];
                        switch (kind) {
                            case Ew::Add:
                                if (gra) (*gra)[flat] += gv;
                                if (grb) (*grb)[bi] += gv;
                                break;
                            case Ew::Sub:
                                if (gra) (*gra)[flat] += gv;
                                if (grb) (*grb)[bi] -= gv;
                                break;
                            case Ew::Mul:
                                if (gra) (*gra)[flat] += gv * vb2[bi];
                                if (grb) (*grb)[bi] += gv * va2[flat];
                                break;
                        }
                    }
    });
    return outid;
}

} // namespace

NodeId add(Tape& t, NodeId a, NodeId b) { return elementwise_op(t, a, b, Ew::Add); }
NodeId sub(Tape& t, NodeId a, NodeId b) { return elementwise_op(t, a, b, Ew::Sub); }
NodeId mul(Tape& t, NodeId a, NodeId b) { return elementwise_op(t, a, b, Ew::Mul); }

NodeId relu(Tape& t, NodeId x) {
    const Tensor& v = t.value(x);
    Tensor out(v.shape());
    for (std::int64_t i = 0; i < v.size(); ++i) out[i] = v[i] > 0.0 ? v[i] : 0.0;
    if (!t.needs_grad(x)) return t.emit(std::move(out), false, nullptr);
    const NodeId outid = t.emit(std::move(out), true, nullptr);
    t.emit_step([x, outid](Tape& tp) {
        if (!tp.has_grad(outid)) return;
        const Tensor& g = tp.grad(outid);
        const Tensor& v2 = tp.value(x);
        Tensor& gx = tp.grad_buffer(x);
        for (std::int64_t i = 0; i < v2.size(); ++i) {
            if (v2[i] > 0.0) gx[i] += g[i];
        }
    });
    return outid;
}

namespace {
double sigmoid_scalar(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}
} // namespace

NodeId sigmoid(Tape& t, NodeId x) {
    const Tensor& v = t.value(x);
    Tensor out(v.shape());
    for (std::int64_t i = 0; i < v.size(); ++i) out[i] = sigmoid_scalar(v[i]);
    if (!t.needs_grad(x)) return t.emit(std::move(out), false, nullptr);
    const NodeId outid = t.emit(std::move(out), true, nullptr);
    t.emit_step([x, outid](Tape& tp) {
        if (!tp.has_grad(outid)) return;
        const Tensor& g = tp.grad(outid);
        const Tensor& s = tp.value(outid);
        Tensor& gx = tp.grad_buffer(x);
        for (std::int64_t i = 0; i < s.size(); ++i) gx[i] += g[i] * s[i] * (1.0 - s[i]);
    });
    return outid;
}

NodeId softmax(Tape& t, NodeId x) {
    const Tensor& v = t.value(x);
    const int last = v.dim(v.rank() - 1);
    const std::int64_t rows = v.size() / last;
    Tensor out(v.shape());
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* in = v.data() + r * last;
        double* o = out.data() + r * last;
        double mx = in[0];
        for (int i = 1; i < last; ++i) mx = std::max(mx, in[i]);
        double sum = 0.0;
        for (int i = 0; i < last; ++i) {
            o[i] = std::exp(in[i] - mx);
            sum += o[i];
        }
        for (int i = 0; i < last; ++i) o[i] /= sum;
    }
    if (!t.needs_grad(x)) return t.emit(std::move(out), false, nullptr);
    const NodeId outid = t.emit(std::move(out), true, nullptr);
    t.emit_step([x, outid, last, rows](Tape& tp) {
        if (!tp.has_grad(outid)) return;
        const Tensor& g = tp.grad(outid);
        const Tensor& p = tp.value(outid);
        Tensor& gx = tp.grad_buffer(x);
        for (std::int64_t r = 0; r < rows; ++r) {
            const double* gr = g.data() + r * last;
            const double* pr = p.data() + r * last;
            double dot = 0.0;
            for (int i = 0; i < last; ++i) dot += gr[i] * pr[i];
            double* gxr = gx.data() + r * last;
            for (int i = 0; i < last; ++i) gxr[i] += pr[i] * (gr[i] - dot);
        }
    });
    return outid;
}

NodeId reshape(Tape& t, NodeId x, const Shape& shape) {
    const Tensor& v = t.value(x);
    if (shape.elements() != v.size()) {
        throw ShapeError("reshape " + v.shape().str() + " -> " + shape.str() + " changes element count");
    }
    Tensor out(shape, v.values());
    if (!t.needs_grad(x)) return t.emit(std::move(out), false, nullptr);
    const NodeId outid = t.emit(std::move(out), true, nullptr);
    t.emit_step([x, outid](Tape& tp) {
        if (!tp.has_grad(outid)) return;
        const Tensor& g = tp.grad(outid);
        Tensor& gx = tp.grad_buffer(x);
        for (std::int64_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
    return outid;
}

NodeId concat_channels(Tape& t, NodeId a, NodeId b) {
    const Tensor& va = t.value(a);
    const Tensor& vb = t.value(b);
    if (va.rank() != 4 || vb.rank() != 4) {
        throw ShapeError("concat_channels expects rank-4 inputs");
    }
    for (int i = 0; i < 3; ++i) {
        if (va.dim(i) != vb.dim(i)) {
            throw ShapeError("concat_channels mismatch: " + va.shape().str() + " vs " + vb.shape().str());
        }
    }
    const int ca = va.dim(3);
    const int cb = vb.dim(3);
    const std::int64_t pixels = va.size() / ca;
    Tensor out(Shape{va.dim(0), va.dim(1), va.dim(2), ca + cb});
    for (std::int64_t p = 0; p < pixels; ++p) {
        std::memcpy(out.data() + p * (ca + cb), va.data() + p * ca, static_cast<std::size_t>(ca) * sizeof(double));
        std::memcpy(out.data() + p * (ca + cb) + ca, vb.data() + p * cb,
                    static_cast<std::size_t>(cb) * sizeof(double));
    }
    const bool ga = t.needs_grad(a);
    const bool gb = t.needs_grad(b);
    if (!ga && !gb) return t.emit(std::move(out), false, nullptr);
    const NodeId outid = t.emit(std::move(out), true, nullptr);
    t.emit_step([a, b, ca, cb, pixels, ga, gb, outid](Tape& tp) {
        if (!tp.has_grad(outid)) return;
        const Tensor& g = tp.grad(outid);
        for (std::int64_t p = 0; p < pixels; ++p) {
            const double* gp = g.data() + p * (ca + cb);
            if (ga) {
                Tensor& gra = tp.grad_buffer(a);
                for (int c = 0; c < ca; ++c) gra[p * ca + c] += gp[c];
            }
            if (gb) {
                Tensor& grb = tp.grad_buffer(b);
                for (int c = 0; c < cb; ++c) grb[p * cb + c] += gp[ca + c];
            }
        }
    });
    return outid;
}

NodeId sum_all(Tape& t, NodeId x) {
    const Tensor& v = t.value(x);
    double s = 0.0;
    for (std::int64_t i = 0; i < v.size(); ++i) s += v[i];
    Tensor out = Tensor::scalar(s);
    if (!t.needs_grad(x)) return t.emit(std::move(out), false, nullptr);
    const NodeId outid = t.emit(std::move(out), true, nullptr);
    t.emit_step([x, outid](Tape& tp) {
        if (!tp.has_grad(outid)) return;
        const double g = tp.grad(outid)[0];
        Tensor& gx = tp.grad_buffer(x);
        for (std::int64_t i = 0; i < gx.size(); ++i) gx[i] += g;
    });
    return outid;
}

NodeId select_scalar(Tape& t, NodeId x, std::int64_t flat_index) {
    const Tensor& v = t.value(x);
    if (flat_index < 0 || flat_index >= v.size()) {
        throw ValueError("select_scalar index " + std::to_string(flat_index) + " out of range");
    }
    Tensor out = Tensor::scalar(v[flat_index]);
    if (!t.needs_grad(x)) return t.emit(std::move(out), false, nullptr);
    const NodeId outid = t.emit(std::move(out), true, nullptr);
    t.emit_step([x, flat_index, outid](Tape& tp) {
        if (!tp.has_grad(outid)) return;
        tp.grad_buffer(x)[flat_index] += tp.grad(outid)[0];
    });
    return outid;
}

NodeId dense(Tape& t, NodeId x, NodeId w, std::optional<NodeId> b) {
    const Tensor& vx = t.value(x);
    const Tensor& vw = t.value(w);
    if (vw.rank() != 2) throw ShapeError("dense weight must be rank-2, got " + vw.shape().str());
    if (vx.rank() != 1 && vx.rank() != 2) {
        throw ShapeError("dense input must be rank-1 or rank-2, got " + vx.shape().str());
    }
    const int features = vx.dim(vx.rank() - 1);
    const int rows_out = vw.dim(0);
    if (vw.dim(1) != features) {
        throw ShapeError("dense: weight " + vw.shape().str() + " does not match input length " +
                         std::to_string(features));
    }
    const std::int64_t samples = vx.rank() == 2 ? vx.dim(0) : 1;
    if (b && (t.value(*b).rank() != 1 || t.value(*b).dim(0) != rows_out)) {
        throw ShapeError("dense: bias length must equal weight rows");
    }

    Tensor out(vx.rank() == 2 ? Shape{static_cast<int>(samples), rows_out} : Shape{rows_out});
    const double* bias = b ? t.value(*b).data() : nullptr;
    for (std::int64_t n = 0; n < samples; ++n) {
        const double* xr = vx.data() + n * features;
        double* yr = out.data() + n * rows_out;
        for (int o = 0; o < rows_out; ++o) {
            double acc = bias ? bias[o] : 0.0;
            const double* wr = vw.data() + static_cast<std::int64_t>(o) * features;
            for (int f = 0; f < features; ++f) acc += wr[f] * xr[f];
            yr[o] = acc;
        }
    }

    const bool gx = t.needs_grad(x);
    const bool gw = t.needs_grad(w);
    const bool gb = b && t.needs_grad(*b);
    if (!gx && !gw && !gb) return t.emit(std::move(out), false, nullptr);
    const NodeId outid = t.emit(std::move(out), true, nullptr);
    const NodeId bid = b ? *b : -1;
    t.emit_step([x, w, bid, samples, features, rows_out, gx, gw, gb, outid](Tape& tp) {
        if (!tp.has_grad(outid)) return;
        const Tensor& g = tp.grad(outid);
        const Tensor& vx2 = tp.value(x);
        const Tensor& vw2 = tp.value(w);
        for (std::int64_t n = 0; n < samples; ++n) {
            const double* gr = g.data() + n * rows_out;
            const double* xr = vx2.data() + n * features;
            for (int o = 0; o < rows_out; ++o) {
                const double gv = gr[o];
                if (gv == 0.0) continue;
                const double* wr = vw2.data() + static_cast<std::int64_t>(o) * features;
                if (gx) {
                    double* gxr = tp.grad_buffer(x).data() + n * features;
                    for (int f = 0; f < features; ++f) gxr[f] += gv * wr[f];
                }
                if (gw) {
                    double* gwr = tp.grad_buffer(w).data() + static_cast<std::int64_t>(o) * features;
                    for (int f = 0; f < features; ++f) gwr[f] += gv * xr[f];
                }
                if (gb) tp.grad_buffer(bid)[o] += gv;
            }
        }
    });
    return outid;
}

NodeId dropout(Tape& t, NodeId x, double rate, bool training, std::uint64_t seed) {
    if (rate < 0.0 || rate >= 1.0) {
        throw ValueError("dropout rate must be in [0, 1), got " + std::to_string(rate));
    }
    const Tensor& v = t.value(x);
    if (!training || rate == 0.0) {
        Tensor out = v;
        if (!t.needs_grad(x)) return t.emit(std::move(out), false, nullptr);
        const NodeId outid = t.emit(std::move(out), true, nullptr);
        t.emit_step([x, outid](Tape& tp) {
            if (!tp.has_grad(outid)) return;
            const Tensor& g = tp.grad(outid);
            Tensor& gx = tp.grad_buffer(x);
            for (std::int64_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        });
        return outid;
    }

    const double scale = 1.0 / (1.0 - rate);
    Rng rng(seed);
    Tensor mask(v.shape());
    Tensor out(v.shape());
    for (std::int64_t i = 0; i < v.size(); ++i) {
        const double keep = rng.uniform() >= rate ? scale : 0.0;
        mask[i] = keep;
        out[i] = v[i] * keep;
    }
    if (!t.needs_grad(x)) return t.emit(std::move(out), false, nullptr);
    const NodeId outid = t.emit(std::move(out), true, nullptr);
    t.emit_step([x, outid, mask = std::move(mask)](Tape& tp) {
        if (!tp.has_grad(outid)) return;
        const Tensor& g = tp.grad(outid);
        Tensor& gx = tp.grad_buffer(x);
        for (std::int64_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
    });
    return outid;
}

} // namespace fga
