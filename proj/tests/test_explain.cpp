#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "fga/gradcam.hpp"
#include "fga/rng.hpp"
#include "fga/train.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace fga;

namespace {

ModelSpec toy_spec(int fuse = 8) {
    ModelSpec s;
    s.input_h = 16;
    s.input_w = 16;
    s.backbone_a = {4, 8};
    s.backbone_b = {4, 8};
    s.fuse_channels = fuse;
    s.classes = 4;
    s.attention_reduction = 4;
    s.attention_gate_hidden = 4;
    s.attention_spatial_kernel = 3;
    return s;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

} // namespace

TEST_CASE("heatmap range and normalization") {
    Model m(toy_spec(), 3);
    Rng rng(5);
    // Nonzero classifier so the logit actually depends on the tap.
    for (std::int64_t i = 0; i < m.params().cls_w.value.size(); ++i) {
        m.params().cls_w.value[i] = rng.uniform(-1.0, 1.0);
    }
    const Tensor img = oracle::random_tensor(Shape{16, 16, 3}, rng, 0.0, 1.0);
    const Heatmap map = gradcam(m, img, 1, "fuse");
    double peak = 0.0;
    for (double v : map.values) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        peak = std::max(peak, v);
    }
    CHECK((peak == 1.0 || peak == 0.0));
    for (double v : map.upsampled) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    CHECK(map.up_h == 16);
    CHECK(map.up_w == 16);

    // Normalizing an already normalized map changes nothing.
    std::vector<double> renorm = map.values;
    if (peak > 0.0) {
        for (double& v : renorm) v /= peak;
    }
    CHECK(renorm == map.values);
}

TEST_CASE("closed-form single-channel case") {
    // With one fuse channel and a positive classifier weight, the logit is a
    // positive multiple of GAP(A), so the heatmap must equal the normalized
    // ReLU of the tapped map.
    Model m(toy_spec(1), 7);
    m.params().cls_w.value.fill(0.0);
    m.params().cls_w.value.at(2, 0) = 2.0;  // target class 2, weight +2
    Rng rng(9);
    const Tensor img = oracle::random_tensor(Shape{16, 16, 3}, rng, 0.0, 1.0);

    const Heatmap map = gradcam(m, img, 2, "fuse");

    Tape t;
    auto r = m.forward(t, t.constant(Tensor(Shape{1, 16, 16, 3}, img.values())), false, 0);
    const Tensor& a = t.value(r.tap("fuse"));  // 1 x h x w x 1
    std::vector<double> expected(map.values.size());
    double peak = 0.0;
    for (std::size_t i = 0; i < expected.size(); ++i) {
        expected[i] = std::max(0.0, a[static_cast<std::int64_t>(i)]);
        peak = std::max(peak, expected[i]);
    }
    REQUIRE(peak > 0.0);
    for (std::size_t i = 0; i < expected.size(); ++i) {
        CHECK(std::abs(map.values[i] - expected[i] / peak) <= 1e-9);
    }
}

TEST_CASE("gradcam reuses the standard backward path bitwise") {
    Model m(toy_spec(), 11);
    Rng rng(13);
    for (std::int64_t i = 0; i < m.params().cls_w.value.size(); ++i) {
        m.params().cls_w.value[i] = rng.uniform(-1.0, 1.0);
    }
    const Tensor img = oracle::random_tensor(Shape{16, 16, 3}, rng, 0.0, 1.0);
    const int target = 3;
    const Heatmap map = gradcam(m, img, target, "fuse");

    // Recompute d logit / d A with a plain tape and rebuild the map.
    Tape t;
    auto r = m.forward(t, t.constant(Tensor(Shape{1, 16, 16, 3}, img.values())), false, 0);
    t.backward(select_scalar(t, r.logits, target));
    const Tensor& a = t.value(r.tap("fuse"));
    const Tensor& g = t.grad(r.tap("fuse"));
    const int h = a.dim(1), w = a.dim(2), k = a.dim(3);
    std::vector<double> alpha(static_cast<std::size_t>(k), 0.0);
    for (int c = 0; c < k; ++c) {
        double sum = 0.0;
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) sum += g.at(0, i, j, c);
        alpha[static_cast<std::size_t>(c)] = sum / (static_cast<double>(h) * w);
    }
    std::vector<double> raw(static_cast<std::size_t>(h) * w, 0.0);
    double peak = 0.0;
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            double acc = 0.0;
            for (int c = 0; c < k; ++c) acc += alpha[static_cast<std::size_t>(c)] * a.at(0, i, j, c);
            raw[static_cast<std::size_t>(i) * w + j] = std::max(0.0, acc);
            peak = std::max(peak, raw[static_cast<std::size_t>(i) * w + j]);
        }
    REQUIRE(peak > 0.0);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        CHECK(map.values[i] == raw[i] / peak);  // bitwise
    }
}

TEST_CASE("different target classes give different heatmaps on a trained model") {
    const LabeledDataset data = synthetic::make_grating_dataset(8, 16, 17);
    Model m(toy_spec(), 19);
    TrainConfig cfg;
    cfg.lr = 3e-3;
    cfg.batch_size = 8;
    cfg.epochs = 8;
    cfg.early_stop_patience = 8;
    cfg.seed = 21;
    train_loop(m, data, cfg);

    const Tensor& img = data.images[0];
    const Prediction p = m.predict(img);
    int least = 0;
    for (int c = 1; c < 4; ++c) {
        if (p.probs[static_cast<std::size_t>(c)] < p.probs[static_cast<std::size_t>(least)]) least = c;
    }
    REQUIRE(p.class_index != least);
    const Heatmap top = gradcam(m, img, p.class_index);
    const Heatmap bottom = gradcam(m, img, least);
    double dist = 0.0;
    for (std::size_t i = 0; i < top.values.size(); ++i) {
        const double d = top.values[i] - bottom.values[i];
        dist += d * d;
    }
    CHECK(std::sqrt(dist) > 0.0);
}

TEST_CASE("unknown tap lists the available taps") {
    Model m(toy_spec(), 23);
    const Tensor img = Tensor::constant(Shape{16, 16, 3}, 0.5);
    CHECK_THROWS_WITH_AS(gradcam(m, img, 0, "missing"), doctest::Contains("fuse"), ValueError);
    CHECK_THROWS_AS(gradcam(m, img, 7, "fuse"), ValueError);
}

TEST_CASE("overlay rendering") {
    Rng rng(29);
    const int h = 12, w = 10;
    const Tensor img = oracle::random_tensor(Shape{h, w, 3}, rng, 0.0, 1.0);
    Heatmap map;
    map.h = h;
    map.w = w;
    map.up_h = h;
    map.up_w = w;
    map.values.assign(static_cast<std::size_t>(h) * w, 0.5);
    map.upsampled = map.values;

    SUBCASE("alpha 0 reproduces the grayscale rendering") {
        const ImageU8 out = render_overlay(img, map, 0.0);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const std::int64_t base = (static_cast<std::int64_t>(y) * w + x) * 3;
                const double gray = (img[base] + img[base + 1] + img[base + 2]) / 3.0;
                const auto expect = static_cast<std::uint8_t>(std::lround(gray * 255.0));
                for (int c = 0; c < 3; ++c) CHECK(out.at(y, x, c) == expect);
            }
    }
    SUBCASE("alpha 1 with a saturated map is pure red") {
        Heatmap hot = map;
        for (double& v : hot.upsampled) v = 1.0;
        const ImageU8 out = render_overlay(img, hot, 1.0);
        for (std::size_t i = 0; i < out.pixels.size(); i += 3) {
            CHECK(out.pixels[i] == 255);
            CHECK(out.pixels[i + 1] == 0);
            CHECK(out.pixels[i + 2] == 0);
        }
    }
    SUBCASE("colormap waypoints") {
        CHECK(cam_colormap(0.0) == std::array<double, 3>{0.0, 0.0, 1.0});
        CHECK(cam_colormap(0.5) == std::array<double, 3>{0.0, 1.0, 0.0});
        CHECK(cam_colormap(1.0) == std::array<double, 3>{1.0, 0.0, 0.0});
    }
    SUBCASE("emitted file round-trips bit-exactly") {
        const ImageU8 out = render_overlay(img, map, 0.4);
        const std::string path = temp_path("fga_overlay_test.cam.png");
        overlay_emit(img, map, 0.4, path);
        const ImageU8 back = read_image(path);
        CHECK(back.width == out.width);
        CHECK(back.height == out.height);
        CHECK(back.channels == out.channels);
        CHECK(back.pixels == out.pixels);
        std::remove(path.c_str());
    }
    SUBCASE("invalid alpha") {
        CHECK_THROWS_AS(render_overlay(img, map, 1.5), ValueError);
    }
}
