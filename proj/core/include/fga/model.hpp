#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fga/attention.hpp"
#include "fga/ops.hpp"
#include "fga/tape.hpp"

namespace fga {

enum class AttentionKind { None, Fga, Cbam };

const char* attention_kind_name(AttentionKind k);
AttentionKind attention_kind_from(const std::string& name);

/// Fully determines every parameter shape of the classifier: two mini
/// backbones (a VGG-style stack and a depthwise-separable stack), one
/// attention block per backbone, the 1x1 fusion width, dropout and the
/// class count.
struct ModelSpec {
    int input_h = 64;
    int input_w = 64;                       // input channels fixed at 3
    std::vector<int> backbone_a{8, 16};     // stage output channels, stage = 2x conv3x3 + maxpool
    std::vector<int> backbone_b{8, 16};     // stage = depthwise3x3 + pointwise1x1 + maxpool
    int fuse_channels = 64;
    double dropout = 0.3;
    int classes = 4;
    AttentionKind attention = AttentionKind::Fga;
    int attention_reduction = 16;
    int attention_spatial_kernel = 7;
    int attention_gate_hidden = 32;
    bool include_bias = true;
    bool cbam_residual = true;
    /// Optional display names (folder order); empty means class0..classN-1.
    /// Never affects parameter shapes.
    std::vector<std::string> class_names;

    void validate() const;
    std::string class_name(int index) const;
    AttentionConfig attention_config(int channels) const;
    /// Spatial extent after a backbone's pooling stack.
    std::pair<int, int> backbone_output_hw(char which) const;
    int backbone_output_channels(char which) const;
};

struct ConvParam {
    Variable w, b;
};

/// All Variables of the model, addressable by a stable dotted path.
struct ModelParams {
    std::vector<std::array<ConvParam, 2>> stages_a;
    struct SepStage {
        ConvParam depth, point;
    };
    std::vector<SepStage> stages_b;
    std::optional<FgaParams> fga_a, fga_b;
    std::optional<CbamParams> cbam_a, cbam_b;
    ConvParam fuse;
    Variable cls_w, cls_b;
};

struct Prediction {
    int class_index = 0;
    double confidence = 0.0;
    std::vector<double> probs;
};

class Model {
public:
    Model(ModelSpec spec, std::uint64_t seed);

    const ModelSpec& spec() const { return spec_; }
    ModelParams& params() { return params_; }

    /// Stable name -> Variable registry; order and shapes depend only on the
    /// spec. Used by optimizers, checkpoints and reports.
    std::vector<std::pair<std::string, Variable*>> named_params();
    std::int64_t parameter_count();
    void reset_grads();

    struct ForwardResult {
        NodeId logits = -1;
        NodeId probs = -1;
        std::vector<std::pair<std::string, NodeId>> taps;
        NodeId tap(const std::string& name) const;
        std::string tap_names() const;
    };

    /// Full dual-backbone forward pass. Taps expose the backbone outputs,
    /// attention outputs, spatial alignment, concat, post-fuse map, pooled
    /// features and logits.
    ForwardResult forward(Tape& t, NodeId x, bool training = false, std::uint64_t dropout_seed = 0);

    /// One backbone in isolation.
    NodeId backbone_forward(Tape& t, NodeId x, char which);

    /// Inference on one rank-3 HxWx3 image (or rank-4 single-sample batch).
    /// Ties break toward the lowest class index.
    Prediction predict(const Tensor& image);

private:
    ModelSpec spec_;
    ModelParams params_;
    std::optional<NodeId> maybe_bias(Tape& t, Variable& b) const;
};

} // namespace fga
