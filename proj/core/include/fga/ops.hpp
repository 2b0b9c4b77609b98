#pragma once

#include <cstdint>
#include <optional>

#include "fga/tape.hpp"

namespace fga {

// Elementwise arithmetic. b must have a's rank with every extent equal to
// a's or 1; extent-1 axes broadcast by repetition (channel masks 1x1xC,
// spatial masks HxWx1, per-sample gates 1x1x1). Output takes a's shape.
NodeId add(Tape& t, NodeId a, NodeId b);
NodeId sub(Tape& t, NodeId a, NodeId b);
NodeId mul(Tape& t, NodeId a, NodeId b);

// Activations. relu's subgradient at 0 is 0. softmax runs over the last
// axis with max-subtraction.
NodeId relu(Tape& t, NodeId x);
NodeId sigmoid(Tape& t, NodeId x);
NodeId softmax(Tape& t, NodeId x);

// Shape plumbing.
NodeId reshape(Tape& t, NodeId x, const Shape& shape);
NodeId concat_channels(Tape& t, NodeId a, NodeId b);
NodeId sum_all(Tape& t, NodeId x);
NodeId select_scalar(Tape& t, NodeId x, std::int64_t flat_index);

/// y = W x (+ b) applied per sample. x is rank-1 (features) or rank-2
/// (samples x features); W is rows x columns with columns matching the
/// feature count.
NodeId dense(Tape& t, NodeId x, NodeId w, std::optional<NodeId> b = {});

enum class Padding { Same, Valid };

struct Conv2dOptions {
    int stride = 1;
    Padding padding = Padding::Same;
    bool depthwise = false;
};

/// 2-D convolution over N x H x W x Cin with kernel k x k x Cin x Cout
/// (k odd). Same padding pads (k-1)/2 zeros per side, giving
/// ceil(H/stride) output rows. Depthwise kernels are k x k x 1 x C with
/// one filter per channel and Cout = Cin.
NodeId conv2d(Tape& t, NodeId x, NodeId w, std::optional<NodeId> b, const Conv2dOptions& opts = {});

enum class PoolKind { MaxPool2x2, GlobalAvg, GlobalMax, ChannelAvg, ChannelMax };

/// MaxPool2x2 halves even H and W; GlobalAvg/GlobalMax reduce to N x 1 x 1 x C;
/// ChannelAvg/ChannelMax reduce to N x H x W x 1. Max gradients route to the
/// first maximal element in scan order.
NodeId pool(Tape& t, NodeId x, PoolKind kind);

enum class ResizeKind { Bilinear, Bicubic };

/// Per-channel spatial resampling with align-corners-false center mapping and
/// edge-clamped taps; bicubic uses the Catmull-Rom kernel (a = -0.5).
NodeId resize(Tape& t, NodeId x, int out_h, int out_w, ResizeKind kind);

/// Non-differentiating resize for preprocessing; accepts rank 2, 3 or 4.
Tensor resize_values(const Tensor& x, int out_h, int out_w, ResizeKind kind);

/// Inverted dropout: training mode zeroes elements with probability rate and
/// scales survivors by 1/(1-rate); inference is the identity.
NodeId dropout(Tape& t, NodeId x, double rate, bool training, std::uint64_t seed);

} // namespace fga
