#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fga/ops.hpp"
#include "fga/tape.hpp"

namespace fga {

/// Parameters shared by the FGA and CBAM blocks: channel count, bottleneck
/// reduction ratio r, spatial kernel size and the gate's hidden width.
struct AttentionConfig {
    int channels = 0;
    int reduction = 16;
    int spatial_kernel = 7;
    int gate_hidden = 32;
    bool include_bias = true;

    /// Bottleneck width C/r, floored with a minimum of 1.
    int bottleneck() const { return channels / reduction > 0 ? channels / reduction : 1; }
    void validate() const;
};

/// All learnable tensors of one FGA block. Shapes derive solely from the
/// AttentionConfig.
struct FgaParams {
    Variable channel_w1, channel_b1;  // C -> C/r, ReLU
    Variable channel_w2, channel_b2;  // C/r -> C, sigmoid
    Variable spatial_w, spatial_b;    // k x k x 2 -> 1, sigmoid
    Variable freq_reduce_w, freq_reduce_b;  // 1x1, C -> C/r, ReLU
    Variable freq_expand_w, freq_expand_b;  // 3x3, C/r -> C, ReLU
    Variable gate_w1, gate_b1;        // C -> gate_hidden, ReLU
    Variable gate_w2, gate_b2;        // gate_hidden -> 1, sigmoid

    static FgaParams init(const AttentionConfig& cfg, std::uint64_t seed);
    std::vector<std::pair<std::string, Variable*>> named();
    static std::int64_t parameter_count(const AttentionConfig& cfg);
};

/// CBAM baseline parameters: a bottleneck MLP shared by the average and max
/// descriptors, plus the spatial convolution.
struct CbamParams {
    Variable mlp_w1, mlp_b1;  // C -> C/r
    Variable mlp_w2, mlp_b2;  // C/r -> C
    Variable spatial_w, spatial_b;

    static CbamParams init(const AttentionConfig& cfg, std::uint64_t seed);
    std::vector<std::pair<std::string, Variable*>> named();
    static std::int64_t parameter_count(const AttentionConfig& cfg);
};

struct AttnPair {
    NodeId mask;
    NodeId refined;
};

/// M_c = sigmoid(W2 ReLU(W1 GAP(x))), broadcast over H and W; refined = x * M_c.
AttnPair channel_attention(Tape& t, NodeId x, const AttentionConfig& cfg, FgaParams& p);

/// M_s = sigmoid(Conv_kxk(concat(channel_avg, channel_max))); refined = x * M_s.
AttnPair spatial_attention(Tape& t, NodeId x, const AttentionConfig& cfg, FgaParams& p);

/// M_f = sigmoid(ReLU(Conv3x3(ReLU(Conv1x1(|FFT2D(x)|))))); refined = x * M_f.
/// The sigmoid of a ReLU output pins every mask entry into [0.5, 1).
AttnPair frequency_attention(Tape& t, NodeId x, const AttentionConfig& cfg, FgaParams& p);

/// Per-sample scalar gate G = sigmoid(Dense_1(ReLU(Dense_h(GAP(x_co))))),
/// shaped N x 1 x 1 x 1 for broadcasting.
NodeId dynamic_gate(Tape& t, NodeId x_co, const AttentionConfig& cfg, FgaParams& p);

/// Every intermediate of the block, exposed for the invariant suite.
struct FgaTaps {
    NodeId channel_mask, channel_refined;
    NodeId spatial_mask, spatial_refined;
    NodeId co;
    NodeId freq_mask, freq_refined;
    NodeId gate;
    NodeId fused;
    NodeId out;
};

/// X_co = X_c * X_s; X_fuse = X_co * G + X_f * (1 - G); X_out = X + X_fuse.
FgaTaps fga_block(Tape& t, NodeId x, const AttentionConfig& cfg, FgaParams& p);

struct CbamTaps {
    NodeId channel_mask;
    NodeId spatial_mask;
    NodeId out;
};

/// Sequential channel-then-spatial attention with a shared bottleneck over
/// average and max descriptors. The residual add keeps architectural parity
/// with fga_block and can be switched off.
CbamTaps cbam_block(Tape& t, NodeId x, const AttentionConfig& cfg, CbamParams& p, bool residual = true);

} // namespace fga
