#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "fga/checkpoint.hpp"
#include "fga/config.hpp"
#include "fga/dataset.hpp"
#include "fga/image.hpp"
#include "fga/rng.hpp"
#include "support/oracles.hpp"

using namespace fga;
namespace fs = std::filesystem;

namespace {

ImageU8 random_image(int h, int w, int channels, Rng& rng) {
    ImageU8 img;
    img.width = w;
    img.height = h;
    img.channels = channels;
    img.pixels.resize(static_cast<std::size_t>(h) * w * channels);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.index(256));
    return img;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write_bytes(const fs::path& p, const std::string& bytes) {
    std::ofstream f(p, std::ios::binary);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

ImageU8 solid_image(int h, int w, std::uint8_t value) {
    ImageU8 img;
    img.width = w;
    img.height = h;
    img.channels = 1;
    img.pixels.assign(static_cast<std::size_t>(h) * w, value);
    return img;
}

ModelSpec small_spec() {
    ModelSpec s;
    s.input_h = 8;
    s.input_w = 8;
    s.backbone_a = {4};
    s.backbone_b = {4};
    s.fuse_channels = 4;
    s.classes = 4;
    s.attention_reduction = 4;
    s.attention_gate_hidden = 4;
    s.attention_spatial_kernel = 3;
    return s;
}

} // namespace

TEST_CASE("png round trip is bit exact") {
    Rng rng(3);
    for (const int channels : {1, 3, 4}) {
        for (int trial = 0; trial < 5; ++trial) {
            const int h = 1 + static_cast<int>(rng.index(24));
            const int w = 1 + static_cast<int>(rng.index(24));
            const ImageU8 img = random_image(h, w, channels, rng);
            const std::vector<std::uint8_t> bytes = encode_png(img);
            const ImageU8 back = decode_png(bytes.data(), bytes.size());
            CHECK(back.width == w);
            CHECK(back.height == h);
            CHECK(back.channels == channels);
            CHECK(back.pixels == img.pixels);
        }
    }
    // Identical input gives identical bytes.
    const ImageU8 img = random_image(9, 7, 3, rng);
    CHECK(encode_png(img) == encode_png(img));
}

TEST_CASE("png error paths") {
    const std::uint8_t junk[16] = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16};
    CHECK_THROWS_AS(decode_png(junk, sizeof junk), IoError);
    Rng rng(5);
    const std::vector<std::uint8_t> good = encode_png(random_image(6, 6, 3, rng));
    CHECK_THROWS_WITH_AS(decode_png(good.data(), good.size() - 8), doctest::Contains("truncated"), IoError);
}

TEST_CASE("pnm decoding") {
    SUBCASE("ascii pgm with comments") {
        const std::string p2 = "P2\n# a comment\n3 2\n255\n0 128 255\n5 6 7\n";
        const ImageU8 img = decode_pnm(reinterpret_cast<const std::uint8_t*>(p2.data()), p2.size());
        CHECK(img.width == 3);
        CHECK(img.height == 2);
        CHECK(img.channels == 1);
        CHECK(img.at(0, 2, 0) == 255);
        CHECK(img.at(1, 0, 0) == 5);
    }
    SUBCASE("binary ppm") {
        std::string p6 = "P6\n2 1\n255\n";
        const std::uint8_t px[6] = {10, 20, 30, 40, 50, 60};
        p6.append(reinterpret_cast<const char*>(px), 6);
        const ImageU8 img = decode_pnm(reinterpret_cast<const std::uint8_t*>(p6.data()), p6.size());
        CHECK(img.channels == 3);
        CHECK(img.at(0, 1, 2) == 60);
    }
    SUBCASE("16-bit rejected") {
        const std::string p5 = "P5\n2 2\n65535\n";
        CHECK_THROWS_AS(decode_pnm(reinterpret_cast<const std::uint8_t*>(p5.data()), p5.size()), IoError);
    }
    SUBCASE("gray replicates to three tensor channels") {
        const std::string p2 = "P2\n1 1\n255\n77\n";
        const ImageU8 img = decode_pnm(reinterpret_cast<const std::uint8_t*>(p2.data()), p2.size());
        const Tensor t = image_to_tensor(img);
        CHECK(t.shape() == Shape({1, 1, 3}));
        for (int c = 0; c < 3; ++c) CHECK(t[c] == 77.0);
    }
}

TEST_CASE("dataset loading") {
    TempDir dir("fga_ds_fixture");
    // 4 classes; 3/5/2/4 files ->总 14, sorted folder order fixes indices.
    const std::vector<std::pair<std::string, int>> layout{
        {"glioma", 3}, {"meningioma", 5}, {"notumor", 2}, {"pituitary", 4}};
    Rng rng(7);
    for (const auto& [cls, count] : layout) {
        fs::create_directories(dir.path / cls);
        for (int i = 0; i < count; ++i) {
            const ImageU8 img = random_image(10, 10, 1, rng);
            write_png(img, (dir.path / cls / ("img" + std::to_string(i) + ".png")).string());
        }
    }
    // Endpoint-value fixtures.
    write_png(solid_image(10, 10, 255), (dir.path / "glioma" / "white.png").string());
    write_png(solid_image(10, 10, 0), (dir.path / "glioma" / "black.png").string());

    SUBCASE("four-class layout, counts and one-hot labels") {
        const LabeledDataset data = load_dataset(dir.path.string(), 10, 10, ClassMode::Four);
        CHECK(data.size() == 16);
        CHECK(data.class_names == std::vector<std::string>{"glioma", "meningioma", "notumor", "pituitary"});
        std::vector<int> counts(4, 0);
        for (int l : data.labels) counts[static_cast<std::size_t>(l)]++;
        CHECK(counts == std::vector<int>{5, 5, 2, 4});
        // Label 2 of 4 -> [0,0,1,0].
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (data.labels[i] == 2) {
                CHECK(data.onehot[i] == std::vector<double>{0, 0, 1, 0});
                break;
            }
        }
        data.validate();
    }
    SUBCASE("pixel scaling endpoints") {
        const LabeledDataset data = load_dataset(dir.path.string(), 10, 10, ClassMode::Four);
        bool saw_white = false, saw_black = false;
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (data.paths[i].ends_with("white.png")) {
                saw_white = true;
                for (std::int64_t j = 0; j < data.images[i].size(); ++j) CHECK(data.images[i][j] == 1.0);
            }
            if (data.paths[i].ends_with("black.png")) {
                saw_black = true;
                for (std::int64_t j = 0; j < data.images[i].size(); ++j) CHECK(data.images[i][j] == 0.0);
            }
        }
        CHECK(saw_white);
        CHECK(saw_black);
    }
    SUBCASE("deterministic across loads") {
        const LabeledDataset a = load_dataset(dir.path.string(), 8, 8, ClassMode::Four);
        const LabeledDataset b = load_dataset(dir.path.string(), 8, 8, ClassMode::Four);
        REQUIRE(a.size() == b.size());
        CHECK(a.paths == b.paths);
        CHECK(a.labels == b.labels);
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.images[i].same_values(b.images[i]));
    }
    SUBCASE("three-class mode drops exactly the no-tumor folder") {
        const LabeledDataset data = load_dataset(dir.path.string(), 8, 8, ClassMode::Three);
        CHECK(data.size() == 14);  // 16 - 2
        CHECK(data.class_names == std::vector<std::string>{"glioma", "meningioma", "pituitary"});
    }
    SUBCASE("two-class mode merges tumors and keeps the total") {
        const LabeledDataset data = load_dataset(dir.path.string(), 8, 8, ClassMode::Two);
        CHECK(data.size() == 16);
        CHECK(data.class_names == std::vector<std::string>{"notumor", "tumor"});
        std::vector<int> counts(2, 0);
        for (int l : data.labels) counts[static_cast<std::size_t>(l)]++;
        CHECK(counts == std::vector<int>{2, 14});
    }
    SUBCASE("undecodable files are skipped and counted") {
        write_bytes(dir.path / "glioma" / "broken.png", "not a png at all");
        const LabeledDataset data = load_dataset(dir.path.string(), 8, 8, ClassMode::Four);
        CHECK(data.skipped == 1);
        CHECK(data.size() == 16);
    }
    SUBCASE("missing no-tumor folder fails modes 3 and 2") {
        TempDir plain("fga_ds_plain");
        for (const char* cls : {"alpha", "beta"}) {
            fs::create_directories(plain.path / cls);
            write_png(solid_image(4, 4, 9), (plain.path / cls / "x.png").string());
        }
        CHECK_THROWS_AS(load_dataset(plain.path.string(), 8, 8, ClassMode::Three), ValueError);
        CHECK_NOTHROW(load_dataset(plain.path.string(), 8, 8, ClassMode::Four));
    }
    SUBCASE("root errors") {
        CHECK_THROWS_AS(load_dataset((dir.path / "nope").string(), 8, 8, ClassMode::Four), IoError);
        TempDir empty("fga_ds_empty");
        CHECK_THROWS_AS(load_dataset(empty.path.string(), 8, 8, ClassMode::Four), IoError);
    }
}

TEST_CASE("checkpoint io") {
    TempDir dir("fga_ckpt");
    const std::string path = (dir.path / "model.fga").string();
    Model m(small_spec(), 41);
    // Make every parameter distinctive.
    Rng rng(43);
    for (auto& [name, var] : m.named_params()) {
        for (std::int64_t i = 0; i < var->value.size(); ++i) var->value[i] = rng.uniform(-2.0, 2.0);
    }
    save_checkpoint(m, path);

    SUBCASE("round trip is bitwise exact") {
        Model loaded = load_checkpoint(path);
        CHECK(loaded.spec().classes == 4);
        auto a = m.named_params();
        auto b = loaded.named_params();
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].first == b[i].first);
            CHECK(a[i].second->value.same_values(b[i].second->value));
        }
    }
    SUBCASE("truncated file names the offset") {
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        const std::string cut = bytes.substr(0, bytes.size() / 2);
        const std::string cut_path = (dir.path / "cut.fga").string();
        write_bytes(cut_path, cut);
        CHECK_THROWS_WITH_AS(load_checkpoint(cut_path), doctest::Contains("byte"), IoError);
    }
    SUBCASE("bad magic rejected") {
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        bytes[0] = 'X';
        const std::string bad = (dir.path / "bad.fga").string();
        write_bytes(bad, bytes);
        CHECK_THROWS_WITH_AS(load_checkpoint(bad), doctest::Contains("magic"), IoError);
    }
    SUBCASE("future version rejected") {
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        bytes[4] = static_cast<char>(kCheckpointVersion + 1);
        const std::string bad = (dir.path / "badver.fga").string();
        write_bytes(bad, bytes);
        CHECK_THROWS_WITH_AS(load_checkpoint(bad), doctest::Contains("version"), IoError);
    }
}

TEST_CASE("config json") {
    SUBCASE("model spec round trip") {
        ModelSpec s = small_spec();
        s.attention = AttentionKind::Cbam;
        s.dropout = 0.25;
        const ModelSpec back = model_spec_from_json(model_spec_to_json(s));
        CHECK(back.input_h == s.input_h);
        CHECK(back.backbone_a == s.backbone_a);
        CHECK(back.attention == AttentionKind::Cbam);
        CHECK(back.dropout == s.dropout);
        CHECK(back.cbam_residual == s.cbam_residual);
    }
    SUBCASE("train config round trip") {
        TrainConfig c;
        c.optimizer = OptimizerKind::Adamax;
        c.lr = 5e-4;
        c.batch_size = 16;
        c.epochs = 20;
        c.seed = 99;
        const TrainConfig back = train_config_from_json(train_config_to_json(c));
        CHECK(back.optimizer == OptimizerKind::Adamax);
        CHECK(back.lr == c.lr);
        CHECK(back.batch_size == 16);
        CHECK(back.seed == 99);
    }
    SUBCASE("run config carries the class mode into the model") {
        const std::string text = R"({"data":"/tmp/x","classes":3,"model":{"backbone_a":[4],"backbone_b":[4]},"seed":5})";
        const RunConfig c = run_config_from_json(text);
        CHECK(c.class_mode == 3);
        CHECK(c.model.classes == 3);
        CHECK(c.seed == 5);
    }
    SUBCASE("unknown keys rejected") {
        CHECK_THROWS_WITH_AS(run_config_from_json(R"({"datA":"/tmp/x"})"), doctest::Contains("datA"), ValueError);
        CHECK_THROWS_AS(model_spec_from_json(R"({"fuse_chanels":4})"), ValueError);
    }
    SUBCASE("invalid json") {
        CHECK_THROWS_AS(run_config_from_json("{"), IoError);
    }
}
