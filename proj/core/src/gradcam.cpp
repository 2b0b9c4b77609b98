#include "fga/gradcam.hpp"

#include <algorithm>
#include <cmath>

namespace fga {

Heatmap gradcam(Model& model, const Tensor& image, int target_class, const std::string& tap) {
    if (target_class < 0 || target_class >= model.spec().classes) {
        throw ValueError("target class " + std::to_string(target_class) + " out of range [0, " +
                         std::to_string(model.spec().classes) + ")");
    }
    Tensor batch;
    if (image.rank() == 3) {
        batch = Tensor(Shape{1, image.dim(0), image.dim(1), image.dim(2)}, image.values());
    } else if (image.rank() == 4 && image.dim(0) == 1) {
        batch = image;
    } else {
        throw ShapeError("gradcam expects one HxWx3 image, got " + image.shape().str());
    }

    Tape t;
    auto r = model.forward(t, t.constant(batch), false, 0);
    const NodeId tap_node = r.tap(tap);
    if (t.value(tap_node).rank() != 4) {
        throw ValueError("tap '" + tap + "' is not a spatial feature map; pick one of the convolutional taps");
    }
    const NodeId target_logit = select_scalar(t, r.logits, target_class);
    t.backward(target_logit);
    const Tensor& activation = t.value(tap_node);
    const Tensor& grad = t.grad(tap_node);

    const int h = activation.dim(1), w = activation.dim(2), k = activation.dim(3);
    std::vector<double> alpha(static_cast<std::size_t>(k), 0.0);
    for (int c = 0; c < k; ++c) {
        double sum = 0.0;
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) sum += grad.at(0, i, j, c);
        alpha[static_cast<std::size_t>(c)] = sum / (static_cast<double>(h) * w);
    }

    Heatmap map;
    map.h = h;
    map.w = w;
    map.tap = tap;
    map.target_class = target_class;
    map.values.resize(static_cast<std::size_t>(h) * w);
    double peak = 0.0;
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            double acc = 0.0;
            for (int c = 0; c < k; ++c) acc += alpha[static_cast<std::size_t>(c)] * activation.at(0, i, j, c);
            const double v = acc > 0.0 ? acc : 0.0;
            map.values[static_cast<std::size_t>(i) * w + j] = v;
            peak = std::max(peak, v);
        }
    }
    if (peak > 0.0) {
        for (double& v : map.values) v /= peak;
    }

    map.up_h = model.spec().input_h;
    map.up_w = model.spec().input_w;
    const Tensor up = resize_values(Tensor(Shape{h, w}, map.values), map.up_h, map.up_w, ResizeKind::Bilinear);
    map.upsampled.assign(up.data(), up.data() + up.size());
    // Bilinear interpolation of a [0,1] map stays in [0,1]; clamp anyway for
    // the exact-range contract.
    for (double& v : map.upsampled) v = std::min(1.0, std::max(0.0, v));
    return map;
}

std::array<double, 3> cam_colormap(double t) {
    t = std::min(1.0, std::max(0.0, t));
    const double r = std::max(0.0, 2.0 * t - 1.0);
    const double g = 1.0 - std::abs(2.0 * t - 1.0);
    const double b = std::max(0.0, 1.0 - 2.0 * t);
    return {r, g, b};
}

ImageU8 render_overlay(const Tensor& image, const Heatmap& map, double alpha) {
    if (alpha < 0.0 || alpha > 1.0) throw ValueError("overlay alpha must lie in [0, 1]");
    if (image.rank() != 3 || image.dim(2) != 3) {
        throw ShapeError("overlay expects an HxWx3 image, got " + image.shape().str());
    }
    const int h = image.dim(0), w = image.dim(1);
    if (map.up_h != h || map.up_w != w) {
        throw ShapeError("heatmap upsampled size " + std::to_string(map.up_h) + "x" + std::to_string(map.up_w) +
                         " does not match image " + std::to_string(h) + "x" + std::to_string(w));
    }
    ImageU8 out;
    out.width = w;
    out.height = h;
    out.channels = 3;
    out.pixels.resize(static_cast<std::size_t>(h) * w * 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::int64_t base = (static_cast<std::int64_t>(y) * w + x) * 3;
            const double gray = (image[base] + image[base + 1] + image[base + 2]) / 3.0;
            const auto color = cam_colormap(map.upsampled[static_cast<std::size_t>(y) * w + x]);
            for (int c = 0; c < 3; ++c) {
                const double v = (1.0 - alpha) * gray + alpha * color[static_cast<std::size_t>(c)];
                const double clamped = std::min(1.0, std::max(0.0, v));
                out.pixels[static_cast<std::size_t>(base + c)] =
                    static_cast<std::uint8_t>(std::lround(clamped * 255.0));
            }
        }
    }
    return out;
}

void overlay_emit(const Tensor& image, const Heatmap& map, double alpha, const std::string& path) {
    write_png(render_overlay(image, map, alpha), path);
}

} // namespace fga
