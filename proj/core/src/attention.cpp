#include "fga/attention.hpp"

#include <string>

#include "fga/fft.hpp"
#include "fga/rng.hpp"

namespace fga {

void AttentionConfig::validate() const {
    if (channels < 1) throw ValueError("attention channels must be >= 1");
    if (reduction < 1) throw ValueError("attention reduction must be >= 1");
    if (spatial_kernel < 1 || spatial_kernel % 2 == 0) {
        throw ValueError("attention spatial kernel must be odd, got " + std::to_string(spatial_kernel));
    }
    if (gate_hidden < 1) throw ValueError("attention gate hidden width must be >= 1");
}

FgaParams FgaParams::init(const AttentionConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const int c = cfg.channels;
    const int cr = cfg.bottleneck();
    const int k = cfg.spatial_kernel;
    const int g = cfg.gate_hidden;
    FgaParams p;
    p.channel_w1 = Variable(tensor_init(Shape{cr, c}, InitScheme::he_uniform(c, derive_seed(seed, 0))));
    p.channel_b1 = Variable(Tensor::zeros(Shape{cr}));
    p.channel_w2 = Variable(tensor_init(Shape{c, cr}, InitScheme::glorot_uniform(cr, c, derive_seed(seed, 1))));
    p.channel_b2 = Variable(Tensor::zeros(Shape{c}));
    p.spatial_w = Variable(
        tensor_init(Shape{k, k, 2, 1}, InitScheme::glorot_uniform(k * k * 2, k * k, derive_seed(seed, 2))));
    p.spatial_b = Variable(Tensor::zeros(Shape{1}));
    p.freq_reduce_w = Variable(tensor_init(Shape{1, 1, c, cr}, InitScheme::he_uniform(c, derive_seed(seed, 3))));
    p.freq_reduce_b = Variable(Tensor::zeros(Shape{cr}));
    p.freq_expand_w =
        Variable(tensor_init(Shape{3, 3, cr, c}, InitScheme::he_uniform(9 * cr, derive_seed(seed, 4))));
    p.freq_expand_b = Variable(Tensor::zeros(Shape{c}));
    p.gate_w1 = Variable(tensor_init(Shape{g, c}, InitScheme::he_uniform(c, derive_seed(seed, 5))));
    p.gate_b1 = Variable(Tensor::zeros(Shape{g}));
    p.gate_w2 = Variable(tensor_init(Shape{1, g}, InitScheme::glorot_uniform(g, 1, derive_seed(seed, 6))));
    p.gate_b2 = Variable(Tensor::zeros(Shape{1}));
    return p;
}

std::vector<std::pair<std::string, Variable*>> FgaParams::named() {
    return {
        {"channel.w1", &channel_w1}, {"channel.b1", &channel_b1},
        {"channel.w2", &channel_w2}, {"channel.b2", &channel_b2},
        {"spatial.w", &spatial_w},   {"spatial.b", &spatial_b},
        {"freq.reduce.w", &freq_reduce_w}, {"freq.reduce.b", &freq_reduce_b},
        {"freq.expand.w", &freq_expand_w}, {"freq.expand.b", &freq_expand_b},
        {"gate.w1", &gate_w1},       {"gate.b1", &gate_b1},
        {"gate.w2", &gate_w2},       {"gate.b2", &gate_b2},
    };
}

std::int64_t FgaParams::parameter_count(const AttentionConfig& cfg) {
    const std::int64_t c = cfg.channels;
    const std::int64_t cr = cfg.bottleneck();
    const std::int64_t k = cfg.spatial_kernel;
    const std::int64_t g = cfg.gate_hidden;
    std::int64_t n = cr * c + c * cr;          // channel bottleneck
    n += k * k * 2;                            // spatial conv
    n += c * cr + 9 * cr * c;                  // frequency convs
    n += g * c + g;                            // gate dense pair
    if (cfg.include_bias) n += cr + c + 1 + cr + c + g + 1;
    return n;
}

CbamParams CbamParams::init(const AttentionConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const int c = cfg.channels;
    const int cr = cfg.bottleneck();
    const int k = cfg.spatial_kernel;
    CbamParams p;
    p.mlp_w1 = Variable(tensor_init(Shape{cr, c}, InitScheme::he_uniform(c, derive_seed(seed, 10))));
    p.mlp_b1 = Variable(Tensor::zeros(Shape{cr}));
    p.mlp_w2 = Variable(tensor_init(Shape{c, cr}, InitScheme::glorot_uniform(cr, c, derive_seed(seed, 11))));
    p.mlp_b2 = Variable(Tensor::zeros(Shape{c}));
    p.spatial_w = Variable(
        tensor_init(Shape{k, k, 2, 1}, InitScheme::glorot_uniform(k * k * 2, k * k, derive_seed(seed, 12))));
    p.spatial_b = Variable(Tensor::zeros(Shape{1}));
    return p;
}

std::vector<std::pair<std::string, Variable*>> CbamParams::named() {
    return {
        {"mlp.w1", &mlp_w1}, {"mlp.b1", &mlp_b1}, {"mlp.w2", &mlp_w2}, {"mlp.b2", &mlp_b2},
        {"spatial.w", &spatial_w}, {"spatial.b", &spatial_b},
    };
}

std::int64_t CbamParams::parameter_count(const AttentionConfig& cfg) {
    const std::int64_t c = cfg.channels;
    const std::int64_t cr = cfg.bottleneck();
    const std::int64_t k = cfg.spatial_kernel;
    std::int64_t n = cr * c + c * cr + k * k * 2;
    if (cfg.include_bias) n += cr + c + 1;
    return n;
}

namespace {

std::optional<NodeId> maybe_bias(Tape& t, const AttentionConfig& cfg, Variable& b) {
    if (!cfg.include_bias) return std::nullopt;
    return t.param(b);
}

void check_channels(const Tensor& v, const AttentionConfig& cfg, const char* who) {
    if (v.rank() != 4) throw ShapeError(std::string(who) + " expects rank-4 NHWC input, got " + v.shape().str());
    if (v.dim(3) != cfg.channels) {
        throw ShapeError(std::string(who) + ": input has " + std::to_string(v.dim(3)) + " channels, config says " +
                         std::to_string(cfg.channels));
    }
}

// sigmoid(Conv_kxk(concat(avg, max))) over an arbitrary feature map.
NodeId spatial_mask_of(Tape& t, NodeId x, NodeId w, std::optional<NodeId> b) {
    const NodeId avg = pool(t, x, PoolKind::ChannelAvg);
    const NodeId mx = pool(t, x, PoolKind::ChannelMax);
    const NodeId stacked = concat_channels(t, avg, mx);
    return sigmoid(t, conv2d(t, stacked, w, b, {}));
}

// Bottleneck MLP applied to an N x 1 x 1 x C descriptor; returns N x C logits.
NodeId bottleneck_mlp(Tape& t, NodeId descriptor, NodeId w1, std::optional<NodeId> b1,
                      NodeId w2, std::optional<NodeId> b2) {
    const Tensor& d = t.value(descriptor);
    const NodeId flat = reshape(t, descriptor, Shape{d.dim(0), d.dim(3)});
    return dense(t, relu(t, dense(t, flat, w1, b1)), w2, b2);
}

} // namespace

AttnPair channel_attention(Tape& t, NodeId x, const AttentionConfig& cfg, FgaParams& p) {
    check_channels(t.value(x), cfg, "channel_attention");
    const int n = t.value(x).dim(0);
    const NodeId gap = pool(t, x, PoolKind::GlobalAvg);
    const NodeId logits = bottleneck_mlp(t, gap, t.param(p.channel_w1), maybe_bias(t, cfg, p.channel_b1),
                                         t.param(p.channel_w2), maybe_bias(t, cfg, p.channel_b2));
    const NodeId mask = reshape(t, sigmoid(t, logits), Shape{n, 1, 1, cfg.channels});
    return {mask, mul(t, x, mask)};
}

AttnPair spatial_attention(Tape& t, NodeId x, const AttentionConfig& cfg, FgaParams& p) {
    check_channels(t.value(x), cfg, "spatial_attention");
    const NodeId mask = spatial_mask_of(t, x, t.param(p.spatial_w), maybe_bias(t, cfg, p.spatial_b));
    return {mask, mul(t, x, mask)};
}

AttnPair frequency_attention(Tape& t, NodeId x, const AttentionConfig& cfg, FgaParams& p) {
    check_channels(t.value(x), cfg, "frequency_attention");
    const NodeId mag = fft_magnitude(t, x);
    const NodeId reduced =
        relu(t, conv2d(t, mag, t.param(p.freq_reduce_w), maybe_bias(t, cfg, p.freq_reduce_b), {}));
    const NodeId expanded =
        relu(t, conv2d(t, reduced, t.param(p.freq_expand_w), maybe_bias(t, cfg, p.freq_expand_b), {}));
    const NodeId mask = sigmoid(t, expanded);
    return {mask, mul(t, x, mask)};
}

NodeId dynamic_gate(Tape& t, NodeId x_co, const AttentionConfig& cfg, FgaParams& p) {
    check_channels(t.value(x_co), cfg, "dynamic_gate");
    const int n = t.value(x_co).dim(0);
    const NodeId gap = pool(t, x_co, PoolKind::GlobalAvg);
    const NodeId flat = reshape(t, gap, Shape{n, cfg.channels});
    const NodeId hidden = relu(t, dense(t, flat, t.param(p.gate_w1), maybe_bias(t, cfg, p.gate_b1)));
    const NodeId g = sigmoid(t, dense(t, hidden, t.param(p.gate_w2), maybe_bias(t, cfg, p.gate_b2)));
    return reshape(t, g, Shape{n, 1, 1, 1});
}

FgaTaps fga_block(Tape& t, NodeId x, const AttentionConfig& cfg, FgaParams& p) {
    check_channels(t.value(x), cfg, "fga_block");
    const int n = t.value(x).dim(0);
    FgaTaps taps{};
    const AttnPair ch = channel_attention(t, x, cfg, p);
    taps.channel_mask = ch.mask;
    taps.channel_refined = ch.refined;
    const AttnPair sp = spatial_attention(t, x, cfg, p);
    taps.spatial_mask = sp.mask;
    taps.spatial_refined = sp.refined;
    taps.co = mul(t, ch.refined, sp.refined);
    const AttnPair fr = frequency_attention(t, x, cfg, p);
    taps.freq_mask = fr.mask;
    taps.freq_refined = fr.refined;
    taps.gate = dynamic_gate(t, taps.co, cfg, p);
    const NodeId ones = t.constant(Tensor::constant(Shape{n, 1, 1, 1}, 1.0));
    const NodeId inverse_gate = sub(t, ones, taps.gate);
    taps.fused = add(t, mul(t, taps.co, taps.gate), mul(t, fr.refined, inverse_gate));
    taps.out = add(t, x, taps.fused);
    return taps;
}

CbamTaps cbam_block(Tape& t, NodeId x, const AttentionConfig& cfg, CbamParams& p, bool residual) {
    check_channels(t.value(x), cfg, "cbam_block");
    const int n = t.value(x).dim(0);
    const NodeId w1 = t.param(p.mlp_w1);
    const NodeId w2 = t.param(p.mlp_w2);
    const std::optional<NodeId> b1 = maybe_bias(t, cfg, p.mlp_b1);
    const std::optional<NodeId> b2 = maybe_bias(t, cfg, p.mlp_b2);
    const NodeId from_avg = bottleneck_mlp(t, pool(t, x, PoolKind::GlobalAvg), w1, b1, w2, b2);
    const NodeId from_max = bottleneck_mlp(t, pool(t, x, PoolKind::GlobalMax), w1, b1, w2, b2);
    CbamTaps taps{};
    taps.channel_mask = reshape(t, sigmoid(t, add(t, from_avg, from_max)), Shape{n, 1, 1, cfg.channels});
    const NodeId refined_c = mul(t, x, taps.channel_mask);
    taps.spatial_mask =
        spatial_mask_of(t, refined_c, t.param(p.spatial_w), maybe_bias(t, cfg, p.spatial_b));
    const NodeId refined_cs = mul(t, refined_c, taps.spatial_mask);
    taps.out = residual ? add(t, x, refined_cs) : refined_cs;
    return taps;
}

} // namespace fga
