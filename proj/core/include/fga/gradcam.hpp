#pragma once

#include <array>
#include <string>

#include "fga/image.hpp"
#include "fga/model.hpp"

namespace fga {

/// Class-discriminative localization map in [0, 1], plus a copy upsampled to
/// the model's input size. max == 1 unless the map is identically zero.
struct Heatmap {
    int h = 0, w = 0;
    std::vector<double> values;
    std::string tap;
    int target_class = 0;
    int up_h = 0, up_w = 0;
    std::vector<double> upsampled;
};

/// alpha_k = spatial mean of d logit_c / d A_k over the tapped map A;
/// heatmap = ReLU(sum_k alpha_k A_k), max-normalized, bilinearly upsampled.
/// Gradients are taken w.r.t. the pre-softmax logit.
Heatmap gradcam(Model& model, const Tensor& image, int target_class, const std::string& tap = "fuse");

/// Fixed blue -> green -> red piecewise-linear colormap on [0, 1].
std::array<double, 3> cam_colormap(double t);

/// Alpha-blends the colorized heatmap over the grayscale-rendered input and
/// writes an 8-bit RGB PNG.
void overlay_emit(const Tensor& image, const Heatmap& map, double alpha, const std::string& path);

/// The blended overlay as an image (what overlay_emit writes).
ImageU8 render_overlay(const Tensor& image, const Heatmap& map, double alpha);

} // namespace fga
