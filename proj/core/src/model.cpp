#include "fga/model.hpp"

#include <cmath>

#include "fga/rng.hpp"

namespace fga {

const char* attention_kind_name(AttentionKind k) {
    switch (k) {
        case AttentionKind::None: return "none";
        case AttentionKind::Fga: return "fga";
        case AttentionKind::Cbam: return "cbam";
    }
    return "?";
}

AttentionKind attention_kind_from(const std::string& name) {
    if (name == "none") return AttentionKind::None;
    if (name == "fga") return AttentionKind::Fga;
    if (name == "cbam") return AttentionKind::Cbam;
    throw ValueError("unknown attention kind '" + name + "' (expected none|fga|cbam)");
}

void ModelSpec::validate() const {
    if (classes < 2) throw ValueError("model needs at least 2 classes");
    if (dropout < 0.0 || dropout >= 1.0) throw ValueError("dropout must lie in [0, 1)");
    if (fuse_channels < 1) throw ValueError("fuse_channels must be >= 1");
    if (backbone_a.empty() || backbone_b.empty()) throw ValueError("backbones need at least one stage");
    for (int c : backbone_a) {
        if (c < 1) throw ValueError("backbone_a stage channels must be >= 1");
    }
    for (int c : backbone_b) {
        if (c < 1) throw ValueError("backbone_b stage channels must be >= 1");
    }
    for (const char which : {'a', 'b'}) {
        const int stages = static_cast<int>(which == 'a' ? backbone_a.size() : backbone_b.size());
        const int stride = 1 << stages;
        if (input_h % stride != 0 || input_w % stride != 0) {
            throw ShapeError(std::string("input ") + std::to_string(input_h) + "x" + std::to_string(input_w) +
                             " not divisible by backbone_" + which + " total pool stride " + std::to_string(stride));
        }
    }
    if (attention != AttentionKind::None) {
        attention_config(backbone_output_channels('a')).validate();
        attention_config(backbone_output_channels('b')).validate();
    }
    if (!class_names.empty() && static_cast<int>(class_names.size()) != classes) {
        throw ValueError("class_names size " + std::to_string(class_names.size()) + " does not match classes " +
                         std::to_string(classes));
    }
}

std::string ModelSpec::class_name(int index) const {
    if (index < 0 || index >= classes) throw ValueError("class index out of range");
    if (!class_names.empty()) return class_names[static_cast<std::size_t>(index)];
    return "class" + std::to_string(index);
}

AttentionConfig ModelSpec::attention_config(int channels) const {
    AttentionConfig cfg;
    cfg.channels = channels;
    cfg.reduction = attention_reduction;
    cfg.spatial_kernel = attention_spatial_kernel;
    cfg.gate_hidden = attention_gate_hidden;
    cfg.include_bias = include_bias;
    return cfg;
}

std::pair<int, int> ModelSpec::backbone_output_hw(char which) const {
    const int stages = static_cast<int>(which == 'a' ? backbone_a.size() : backbone_b.size());
    return {input_h >> stages, input_w >> stages};
}

int ModelSpec::backbone_output_channels(char which) const {
    return which == 'a' ? backbone_a.back() : backbone_b.back();
}

Model::Model(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    spec_.validate();
    std::uint64_t idx = 0;
    const auto next = [&] { return derive_seed(seed, idx++); };

    int cin = 3;
    for (const int ch : spec_.backbone_a) {
        std::array<ConvParam, 2> stage;
        stage[0].w = Variable(tensor_init(Shape{3, 3, cin, ch}, InitScheme::he_uniform(9 * cin, next())));
        stage[0].b = Variable(Tensor::zeros(Shape{ch}));
        stage[1].w = Variable(tensor_init(Shape{3, 3, ch, ch}, InitScheme::he_uniform(9 * ch, next())));
        stage[1].b = Variable(Tensor::zeros(Shape{ch}));
        params_.stages_a.push_back(std::move(stage));
        cin = ch;
    }
    cin = 3;
    for (const int ch : spec_.backbone_b) {
        ModelParams::SepStage stage;
        stage.depth.w = Variable(tensor_init(Shape{3, 3, 1, cin}, InitScheme::he_uniform(9, next())));
        stage.depth.b = Variable(Tensor::zeros(Shape{cin}));
        stage.point.w = Variable(tensor_init(Shape{1, 1, cin, ch}, InitScheme::he_uniform(cin, next())));
        stage.point.b = Variable(Tensor::zeros(Shape{ch}));
        params_.stages_b.push_back(std::move(stage));
        cin = ch;
    }

    if (spec_.attention == AttentionKind::Fga) {
        params_.fga_a = FgaParams::init(spec_.attention_config(spec_.backbone_output_channels('a')), next());
        params_.fga_b = FgaParams::init(spec_.attention_config(spec_.backbone_output_channels('b')), next());
    } else if (spec_.attention == AttentionKind::Cbam) {
        params_.cbam_a = CbamParams::init(spec_.attention_config(spec_.backbone_output_channels('a')), next());
        params_.cbam_b = CbamParams::init(spec_.attention_config(spec_.backbone_output_channels('b')), next());
    }

    const int concat_ch = spec_.backbone_output_channels('a') + spec_.backbone_output_channels('b');
    params_.fuse.w = Variable(
        tensor_init(Shape{1, 1, concat_ch, spec_.fuse_channels}, InitScheme::he_uniform(concat_ch, next())));
    params_.fuse.b = Variable(Tensor::zeros(Shape{spec_.fuse_channels}));
    // The classifier head starts at zero so an untrained model emits uniform
    // probabilities; its gradient dW = dz * f is nonzero from step one.
    params_.cls_w = Variable(Tensor::zeros(Shape{spec_.classes, spec_.fuse_channels}));
    params_.cls_b = Variable(Tensor::zeros(Shape{spec_.classes}));
}

std::vector<std::pair<std::string, Variable*>> Model::named_params() {
    std::vector<std::pair<std::string, Variable*>> out;
    const bool bias = spec_.include_bias;
    const auto push = [&](const std::string& name, Variable& v) { out.emplace_back(name, &v); };
    for (std::size_t s = 0; s < params_.stages_a.size(); ++s) {
        for (int c = 0; c < 2; ++c) {
            const std::string base = "backbone_a.s" + std::to_string(s) + ".conv" + std::to_string(c);
            push(base + ".w", params_.stages_a[s][static_cast<std::size_t>(c)].w);
            if (bias) push(base + ".b", params_.stages_a[s][static_cast<std::size_t>(c)].b);
        }
    }
    if (params_.fga_a) {
        for (auto& [name, var] : params_.fga_a->named()) {
            if (!bias && (name.ends_with(".b1") || name.ends_with(".b2") || name.ends_with(".b"))) continue;
            push("attention_a." + name, *var);
        }
    }
    if (params_.cbam_a) {
        for (auto& [name, var] : params_.cbam_a->named()) {
            if (!bias && (name.ends_with(".b1") || name.ends_with(".b2") || name.ends_with(".b"))) continue;
            push("attention_a." + name, *var);
        }
    }
    for (std::size_t s = 0; s < params_.stages_b.size(); ++s) {
        const std::string base = "backbone_b.s" + std::to_string(s);
        push(base + ".depthwise.w", params_.stages_b[s].depth.w);
        if (bias) push(base + ".depthwise.b", params_.stages_b[s].depth.b);
        push(base + ".pointwise.w", params_.stages_b[s].point.w);
        if (bias) push(base + ".pointwise.b", params_.stages_b[s].point.b);
    }
    if (params_.fga_b) {
        for (auto& [name, var] : params_.fga_b->named()) {
            if (!bias && (name.ends_with(".b1") || name.ends_with(".b2") || name.ends_with(".b"))) continue;
            push("attention_b." + name, *var);
        }
    }
    if (params_.cbam_b) {
        for (auto& [name, var] : params_.cbam_b->named()) {
            if (!bias && (name.ends_with(".b1") || name.ends_with(".b2") || name.ends_with(".b"))) continue;
            push("attention_b." + name, *var);
        }
    }
    push("fuse.w", params_.fuse.w);
    if (bias) push("fuse.b", params_.fuse.b);
    push("classifier.w", params_.cls_w);
    if (bias) push("classifier.b", params_.cls_b);
    return out;
}

std::int64_t Model::parameter_count() {
    std::int64_t n = 0;
    for (auto& [name, var] : named_params()) n += var->value.size();
    return n;
}

void Model::reset_grads() {
    for (auto& [name, var] : named_params()) var->reset_grad();
}

std::optional<NodeId> Model::maybe_bias(Tape& t, Variable& b) const {
    if (!spec_.include_bias) return std::nullopt;
    return t.param(b);
}

NodeId Model::backbone_forward(Tape& t, NodeId x, char which) {
    const Tensor& v = t.value(x);
    if (v.rank() != 4 || v.dim(3) != 3) {
        throw ShapeError("backbone expects NxHxWx3 input, got " + v.shape().str());
    }
    if (v.dim(1) != spec_.input_h || v.dim(2) != spec_.input_w) {
        throw ShapeError("input " + v.shape().str() + " does not match spec input " +
                         std::to_string(spec_.input_h) + "x" + std::to_string(spec_.input_w));
    }
    NodeId h = x;
    if (which == 'a') {
        for (auto& stage : params_.stages_a) {
            h = relu(t, conv2d(t, h, t.param(stage[0].w), maybe_bias(t, stage[0].b), {}));
            h = relu(t, conv2d(t, h, t.param(stage[1].w), maybe_bias(t, stage[1].b), {}));
            h = pool(t, h, PoolKind::MaxPool2x2);
        }
    } else if (which == 'b') {
        for (auto& stage : params_.stages_b) {
            Conv2dOptions dw;
            dw.depthwise = true;
            h = conv2d(t, h, t.param(stage.depth.w), maybe_bias(t, stage.depth.b), dw);
            h = relu(t, conv2d(t, h, t.param(stage.point.w), maybe_bias(t, stage.point.b), {}));
            h = pool(t, h, PoolKind::MaxPool2x2);
        }
    } else {
        throw ValueError("backbone selector must be 'a' or 'b'");
    }
    return h;
}

NodeId Model::ForwardResult::tap(const std::string& name) const {
    for (const auto& [n, id] : taps) {
        if (n == name) return id;
    }
    throw ValueError("unknown tap '" + name + "'; available: " + tap_names());
}

std::string Model::ForwardResult::tap_names() const {
    std::string s;
    for (const auto& [n, id] : taps) {
        if (!s.empty()) s += ", ";
        s += n;
    }
    return s;
}

Model::ForwardResult Model::forward(Tape& t, NodeId x, bool training, std::uint64_t dropout_seed) {
    ForwardResult r;
    const NodeId fa = backbone_forward(t, x, 'a');
    const NodeId fb = backbone_forward(t, x, 'b');
    r.taps.emplace_back("backbone_a", fa);
    r.taps.emplace_back("backbone_b", fb);

    NodeId aa = fa;
    NodeId ab = fb;
    if (spec_.attention == AttentionKind::Fga) {
        aa = fga_block(t, fa, spec_.attention_config(spec_.backbone_output_channels('a')), *params_.fga_a).out;
        ab = fga_block(t, fb, spec_.attention_config(spec_.backbone_output_channels('b')), *params_.fga_b).out;
    } else if (spec_.attention == AttentionKind::Cbam) {
        aa = cbam_block(t, fa, spec_.attention_config(spec_.backbone_output_channels('a')), *params_.cbam_a,
                        spec_.cbam_residual)
                 .out;
        ab = cbam_block(t, fb, spec_.attention_config(spec_.backbone_output_channels('b')), *params_.cbam_b,
                        spec_.cbam_residual)
                 .out;
    }
    r.taps.emplace_back("attention_a", aa);
    r.taps.emplace_back("attention_b", ab);

    // Align spatial extents by resizing the smaller map to the larger.
    const Tensor& va = t.value(aa);
    const Tensor& vb = t.value(ab);
    NodeId la = aa;
    NodeId lb = ab;
    if (va.dim(1) != vb.dim(1) || va.dim(2) != vb.dim(2)) {
        const std::int64_t area_a = static_cast<std::int64_t>(va.dim(1)) * va.dim(2);
        const std::int64_t area_b = static_cast<std::int64_t>(vb.dim(1)) * vb.dim(2);
        if (area_a < area_b) {
            la = resize(t, aa, vb.dim(1), vb.dim(2), ResizeKind::Bilinear);
        } else {
            lb = resize(t, ab, va.dim(1), va.dim(2), ResizeKind::Bilinear);
        }
    }
    r.taps.emplace_back("align_a", la);
    r.taps.emplace_back("align_b", lb);

    const NodeId cat = concat_channels(t, la, lb);
    r.taps.emplace_back("concat", cat);
    const NodeId fused = relu(t, conv2d(t, cat, t.param(params_.fuse.w), maybe_bias(t, params_.fuse.b), {}));
    r.taps.emplace_back("fuse", fused);

    const NodeId pooled = pool(t, fused, PoolKind::GlobalAvg);
    const int n = t.value(pooled).dim(0);
    NodeId flat = reshape(t, pooled, Shape{n, spec_.fuse_channels});
    r.taps.emplace_back("pool", flat);
    flat = dropout(t, flat, spec_.dropout, training, dropout_seed);
    r.logits = dense(t, flat, t.param(params_.cls_w), maybe_bias(t, params_.cls_b));
    r.taps.emplace_back("logits", r.logits);
    r.probs = softmax(t, r.logits);
    r.taps.emplace_back("probs", r.probs);
    return r;
}

Prediction Model::predict(const Tensor& image) {
    Tensor batch;
    if (image.rank() == 3) {
        batch = Tensor(Shape{1, image.dim(0), image.dim(1), image.dim(2)}, image.values());
    } else if (image.rank() == 4 && image.dim(0) == 1) {
        batch = image;
    } else {
        throw ShapeError("predict expects one HxWx3 image, got " + image.shape().str());
    }
    Tape t;
    const ForwardResult r = forward(t, t.constant(batch), false, 0);
    const Tensor& p = t.value(r.probs);
    Prediction pred;
    pred.probs.assign(p.data(), p.data() + p.size());
    pred.class_index = argmax(p.data(), spec_.classes);
    pred.confidence = pred.probs[static_cast<std::size_t>(pred.class_index)];
    return pred;
}

} // namespace fga
