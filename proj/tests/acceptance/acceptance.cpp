// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Heavier, end-to-end counterpart of the unit suites.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "fga/attention.hpp"
#include "fga/checkpoint.hpp"
#include "fga/fft.hpp"
#include "fga/gradcam.hpp"
#include "fga/gradcheck.hpp"
#include "fga/image.hpp"
#include "fga/metrics.hpp"
#include "fga/model.hpp"
#include "fga/rng.hpp"
#include "fga/train.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace fga;
namespace fs = std::filesystem;
using clock_type = std::chrono::steady_clock;

namespace {

struct Criterion {
    std::string name;
    bool pass = true;
    std::string detail;
};

std::vector<Criterion> g_results;

void report(const std::string& name, bool pass, const std::string& detail, double seconds) {
    std::ostringstream line;
    line << (pass ? "[PASS] " : "[FAIL] ") << name << " (" << std::fixed << std::setprecision(1) << seconds
         << "s) " << detail;
    std::cout << line.str() << std::endl;
    g_results.push_back(Criterion{name, pass, detail});
}

template <typename Fn>
void criterion(const std::string& name, Fn&& fn) {
    const auto t0 = clock_type::now();
    bool pass = false;
    std::string detail;
    try {
        detail = fn(pass);
    } catch (const std::exception& e) {
        pass = false;
        detail = std::string("exception: ") + e.what();
    }
    report(name, pass, detail, std::chrono::duration<double>(clock_type::now() - t0).count());
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(3) << v;
    return os.str();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

ModelSpec tiny_spec() {
    ModelSpec s;
    s.input_h = 8;
    s.input_w = 8;
    s.backbone_a = {3, 6};
    s.backbone_b = {3, 6};
    s.fuse_channels = 6;
    s.classes = 4;
    s.attention_reduction = 4;
    s.attention_gate_hidden = 4;
    s.attention_spatial_kernel = 3;
    return s;
}

ModelSpec texture_spec() {
    ModelSpec s;
    s.input_h = 32;
    s.input_w = 32;
    s.backbone_a = {6, 12};
    s.backbone_b = {6, 12};
    s.fuse_channels = 32;
    s.classes = 4;
    s.dropout = 0.2;
    s.attention_reduction = 4;
    s.attention_gate_hidden = 32;
    s.attention_spatial_kernel = 7;
    return s;
}

// ---------------------------------------------------------------------------

std::string check_gradient_integrity(bool& pass) {
    Rng rng(401);
    double worst_op = 0.0;

    // Every differentiable operation on random small tensors.
    for (int trial = 0; trial < 4; ++trial) {
        const Tensor x = oracle::random_tensor(Shape{2, 4, 4, 3}, rng, 0.1, 1.0);
        const Tensor mask = oracle::random_tensor(Shape{2, 1, 1, 3}, rng);
        const Tensor w = oracle::random_tensor(Shape{3, 3, 3, 2}, rng);
        const Tensor wd = oracle::random_tensor(Shape{3, 3, 1, 3}, rng);
        const Tensor smw = oracle::random_tensor(Shape{2, 48}, rng);
        const std::vector<ScalarProgram> programs{
            [&](Tape& t, NodeId in) { return sum_all(t, add(t, in, t.constant(mask))); },
            [&](Tape& t, NodeId in) { return sum_all(t, sub(t, in, t.constant(mask))); },
            [&](Tape& t, NodeId in) { return sum_all(t, mul(t, in, t.constant(mask))); },
            [&](Tape& t, NodeId in) { return sum_all(t, conv2d(t, in, t.constant(w), {}, {})); },
            [&](Tape& t, NodeId in) {
                Conv2dOptions o;
                o.depthwise = true;
                return sum_all(t, conv2d(t, in, t.constant(wd), {}, o));
            },
            [&](Tape& t, NodeId in) { return sum_all(t, pool(t, in, PoolKind::GlobalAvg)); },
            [&](Tape& t, NodeId in) { return sum_all(t, pool(t, in, PoolKind::GlobalMax)); },
            [&](Tape& t, NodeId in) { return sum_all(t, pool(t, in, PoolKind::ChannelAvg)); },
            [&](Tape& t, NodeId in) { return sum_all(t, pool(t, in, PoolKind::ChannelMax)); },
            [&](Tape& t, NodeId in) { return sum_all(t, pool(t, in, PoolKind::MaxPool2x2)); },
            [&](Tape& t, NodeId in) { return sum_all(t, relu(t, in)); },
            [&](Tape& t, NodeId in) { return sum_all(t, sigmoid(t, in)); },
            [&](Tape& t, NodeId in) {
                return sum_all(t, mul(t, softmax(t, reshape(t, in, Shape{2, 48})), t.constant(smw)));
            },
            [&](Tape& t, NodeId in) { return sum_all(t, resize(t, in, 7, 5, ResizeKind::Bilinear)); },
            [&](Tape& t, NodeId in) { return sum_all(t, resize(t, in, 9, 6, ResizeKind::Bicubic)); },
            [&](Tape& t, NodeId in) { return sum_all(t, dropout(t, in, 0.4, true, 99)); },
            [&](Tape& t, NodeId in) { return sum_all(t, concat_channels(t, in, mul(t, in, in))); },
            [&](Tape& t, NodeId in) { return sum_all(t, fft_magnitude(t, in)); },
        };
        for (const auto& f : programs) worst_op = std::max(worst_op, finite_diff_check(f, x));

        // dense w.r.t. input, weight and bias.
        const Tensor xv = oracle::random_tensor(Shape{3, 6}, rng);
        const Tensor dw = oracle::random_tensor(Shape{4, 6}, rng);
        const Tensor db = oracle::random_tensor(Shape{4}, rng);
        worst_op = std::max(worst_op, finite_diff_check(
                                          [&](Tape& t, NodeId in) {
                                              return sum_all(t, dense(t, in, t.constant(dw), t.constant(db)));
                                          },
                                          xv));
        worst_op = std::max(worst_op, finite_diff_check(
                                          [&](Tape& t, NodeId in) {
                                              return sum_all(t, dense(t, t.constant(xv), in, t.constant(db)));
                                          },
                                          dw));
    }

    // Full FGA block on a 2x8x8x8 input. Fresh streams per section keep the
    // draws in general position (away from relu/argmax kinks, which central
    // differences cannot probe).
    Rng block_rng(403);
    AttentionConfig cfg;
    cfg.channels = 8;
    cfg.reduction = 4;
    cfg.spatial_kernel = 7;
    cfg.gate_hidden = 8;
    FgaParams params = FgaParams::init(cfg, 11);
    const Tensor block_in = oracle::random_tensor(Shape{2, 8, 8, 8}, block_rng, 0.1, 1.0);
    const double fga_err = finite_diff_check(
        [&](Tape& t, NodeId in) { return sum_all(t, fga_block(t, in, cfg, params).out); }, block_in);

    CbamParams cbam = CbamParams::init(cfg, 13);
    const double cbam_err = finite_diff_check(
        [&](Tape& t, NodeId in) { return sum_all(t, cbam_block(t, in, cfg, cbam).out); }, block_in);

    // Full tiny model, gradient w.r.t. the input image.
    Rng model_rng(418);
    Model model(tiny_spec(), 17);
    for (std::int64_t i = 0; i < model.params().cls_w.value.size(); ++i) {
        model.params().cls_w.value[i] = model_rng.uniform(-0.5, 0.5);
    }
    const Tensor target = oracle::random_tensor(Shape{1, 4}, model_rng);
    const Tensor img = oracle::random_tensor(Shape{1, 8, 8, 3}, model_rng, 0.1, 1.0);
    const double model_err = finite_diff_check(
        [&](Tape& t, NodeId in) {
            auto r = model.forward(t, in, false, 0);
            return sum_all(t, mul(t, r.probs, t.constant(target)));
        },
        img);

    pass = worst_op < 1e-5 && fga_err < 1e-5 && cbam_err < 1e-5 && model_err < 1e-4;
    return "max rel err: ops " + fmt(worst_op) + ", fga " + fmt(fga_err) + ", cbam " + fmt(cbam_err) + ", model " +
           fmt(model_err);
}

std::string check_spectral_oracle(bool& pass) {
    Rng rng(421);
    double worst = 0.0, parseval = 0.0, conj = 0.0;
    int cases = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const int h = 1 + static_cast<int>(rng.index(16));
        const int w = 1 + static_cast<int>(rng.index(16));
        const Tensor x = oracle::random_tensor(Shape{h, w}, rng);
        const ComplexPlane fast = fft2d(x);
        const ComplexPlane naive = dft2d_naive(x);
        for (std::size_t i = 0; i < fast.re.size(); ++i) {
            worst = std::max(worst, std::abs(fast.re[i] - naive.re[i]));
            worst = std::max(worst, std::abs(fast.im[i] - naive.im[i]));
        }
        double spatial = 0.0, spectral = 0.0;
        for (std::int64_t i = 0; i < x.size(); ++i) spatial += x[i] * x[i];
        for (std::size_t i = 0; i < fast.re.size(); ++i) spectral += fast.re[i] * fast.re[i] + fast.im[i] * fast.im[i];
        parseval = std::max(parseval, std::abs(spatial - spectral / (static_cast<double>(h) * w)));
        for (int u = 0; u < h; ++u)
            for (int v = 0; v < w; ++v) {
                const std::size_t a = fast.idx(u, v);
                const std::size_t b = fast.idx((h - u) % h, (w - v) % w);
                conj = std::max(conj, std::abs(fast.re[a] - fast.re[b]));
                conj = std::max(conj, std::abs(fast.im[a] + fast.im[b]));
            }
        ++cases;
    }
    pass = worst <= 1e-9 && parseval <= 1e-9 && conj <= 1e-9;
    return std::to_string(cases) + " cases; |fft-naive| " + fmt(worst) + ", parseval " + fmt(parseval) +
           ", conj-sym " + fmt(conj);
}

std::string check_fga_invariants(bool& pass) {
    AttentionConfig cfg;
    cfg.channels = 8;
    cfg.reduction = 4;
    cfg.spatial_kernel = 7;
    cfg.gate_hidden = 8;
    FgaParams params = FgaParams::init(cfg, 23);
    Rng rng(431);
    int violations = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const Tensor x = oracle::random_tensor(Shape{1, 6, 6, 8}, rng, -2.0, 2.0);
        Tape t;
        const FgaTaps taps = fga_block(t, t.constant(x), cfg, params);
        const Tensor& mc = t.value(taps.channel_mask);
        const Tensor& ms = t.value(taps.spatial_mask);
        const Tensor& mf = t.value(taps.freq_mask);
        const Tensor& g = t.value(taps.gate);
        const Tensor& co = t.value(taps.co);
        const Tensor& xf = t.value(taps.freq_refined);
        const Tensor& fuse = t.value(taps.fused);
        const Tensor& out = t.value(taps.out);
        for (std::int64_t i = 0; i < mc.size(); ++i) {
            if (!(mc[i] > 0.0 && mc[i] < 1.0)) ++violations;
        }
        for (std::int64_t i = 0; i < ms.size(); ++i) {
            if (!(ms[i] > 0.0 && ms[i] < 1.0)) ++violations;
        }
        for (std::int64_t i = 0; i < mf.size(); ++i) {
            if (!(mf[i] >= 0.5 && mf[i] < 1.0)) ++violations;
        }
        for (std::int64_t i = 0; i < g.size(); ++i) {
            if (!(g[i] > 0.0 && g[i] < 1.0)) ++violations;
        }
        for (std::int64_t i = 0; i < out.size(); ++i) {
            if (out[i] != x[i] + fuse[i]) ++violations;  // bitwise residual identity
            if (fuse[i] < std::min(co[i], xf[i]) || fuse[i] > std::max(co[i], xf[i])) ++violations;
        }
    }
    pass = violations == 0;
    return "1000 random inputs, " + std::to_string(violations) + " violations";
}

std::string check_metric_oracles(bool& pass) {
    Rng rng(443);
    double worst = 0.0;
    int cm_mismatches = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int classes = 2 + static_cast<int>(rng.index(4));
        const int n = 30 + static_cast<int>(rng.index(120));
        std::vector<int> truth(static_cast<std::size_t>(n)), pred(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            truth[static_cast<std::size_t>(i)] = static_cast<int>(rng.index(static_cast<std::uint64_t>(classes)));
            pred[static_cast<std::size_t>(i)] = static_cast<int>(rng.index(static_cast<std::uint64_t>(classes)));
        }
        const ConfusionMatrix cm = confusion_matrix(truth, pred, classes);
        const auto ref = oracle::confusion_loops(truth, pred, classes);
        for (std::size_t i = 0; i < ref.size(); ++i) {
            if (cm.counts[i] != ref[i]) ++cm_mismatches;
        }
        const MetricsReport r = classification_metrics(cm);
        std::int64_t diag = 0;
        double macro_p = 0.0, macro_r = 0.0, macro_f = 0.0;
        for (int k = 0; k < classes; ++k) {
            std::int64_t tp = cm.at(k, k), col = 0, row = 0;
            diag += tp;
            for (int i = 0; i < classes; ++i) {
                col += cm.at(i, k);
                row += cm.at(k, i);
            }
            const double p = col == 0 ? 0.0 : static_cast<double>(tp) / col;
            const double rc = row == 0 ? 0.0 : static_cast<double>(tp) / row;
            const double f1 = p + rc == 0.0 ? 0.0 : 2.0 * p * rc / (p + rc);
            macro_p += p;
            macro_r += rc;
            macro_f += f1;
        }
        worst = std::max(worst, std::abs(r.accuracy - static_cast<double>(diag) / cm.total()));
        worst = std::max(worst, std::abs(r.macro_precision - macro_p / classes));
        worst = std::max(worst, std::abs(r.macro_recall - macro_r / classes));
        worst = std::max(worst, std::abs(r.macro_f1 - macro_f / classes));
    }
    // AUC against the O(n^2) pairwise-ranking oracle.
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 50;
        std::vector<std::vector<double>> scores;
        std::vector<int> labels;
        std::vector<double> s0;
        std::vector<bool> pos;
        int npos = 0;
        for (int i = 0; i < n; ++i) {
            const double s = std::floor(rng.uniform() * 10.0) / 10.0;  // ties on purpose
            const int label = rng.uniform() < 0.35 + 0.3 * s ? 0 : 1;
            scores.push_back({s, 1.0 - s});
            labels.push_back(label);
            s0.push_back(s);
            pos.push_back(label == 0);
            npos += label == 0;
        }
        if (npos == 0 || npos == n) continue;
        const auto curves = roc_auc(scores, labels, 2);
        worst = std::max(worst, std::abs(curves[0].auc - oracle::auc_pairwise(s0, pos)));
    }
    pass = worst <= 1e-12 && cm_mismatches == 0;
    return "200 cases; confusion mismatches " + std::to_string(cm_mismatches) + ", max metric err " + fmt(worst);
}

std::string check_overfit_smoke(bool& pass) {
    ModelSpec spec = tiny_spec();
    spec.input_h = 16;
    spec.input_w = 16;
    spec.backbone_a = {4, 8};
    spec.backbone_b = {4, 8};
    spec.fuse_channels = 8;
    spec.dropout = 0.1;
    Model model(spec, 31);
    const LabeledDataset data = synthetic::make_grating_dataset(16, 16, 451);  // 64 images, 4 classes
    TrainConfig cfg;
    cfg.lr = 3e-3;
    cfg.batch_size = 8;
    cfg.epochs = 200;
    cfg.early_stop_patience = 60;
    cfg.val_fraction = 0.25;
    cfg.seed = 7;
    const TrainHistory h = train_loop(model, data, cfg);
    double best_train = 0.0;
    int first_perfect = -1;
    for (std::size_t e = 0; e < h.epochs.size(); ++e) {
        if (h.epochs[e].train_acc > best_train) best_train = h.epochs[e].train_acc;
        if (first_perfect < 0 && h.epochs[e].train_acc == 1.0) first_perfect = static_cast<int>(e) + 1;
    }
    pass = best_train == 1.0;
    return "train acc " + fmt(best_train) + (first_perfect > 0 ? " at epoch " + std::to_string(first_perfect) : "") +
           " of " + std::to_string(h.epochs.size());
}

std::string check_mechanism(bool& pass) {
    const ModelSpec spec = texture_spec();
    std::vector<double> fga_acc, none_acc;
    for (int s = 0; s < 5; ++s) {
        const LabeledDataset data = synthetic::make_grating_dataset(75, 32, 1000 + s, 4, 0.25);
        TrainConfig cfg;
        cfg.lr = 1e-3;
        cfg.batch_size = 16;
        cfg.epochs = 20;
        cfg.early_stop_patience = 4;
        cfg.val_fraction = 1.0 / 3.0;  // 200 train / 100 val
        cfg.seed = 50 + s;
        const auto [tr, va] = stratified_split(data.labels, cfg.val_fraction, cfg.seed);
        for (const AttentionKind kind : {AttentionKind::Fga, AttentionKind::None}) {
            ModelSpec ms = spec;
            ms.attention = kind;
            Model m(ms, derive_seed(77, static_cast<std::uint64_t>(s)));
            train_loop(m, data, cfg, tr, va);
            const EvalPass val = eval_pass(m, data, va);
            (kind == AttentionKind::Fga ? fga_acc : none_acc).push_back(val.accuracy);
        }
    }
    const double fga_med = median(fga_acc);
    const double none_med = median(none_acc);
    pass = fga_med >= none_med && fga_med >= 0.90;
    return "median val acc over 5 seeds: fga " + fmt(fga_med) + ", baseline " + fmt(none_med) + " (margin " +
           fmt(fga_med - none_med) + ")";
}

std::string check_sweep_directional(bool& pass) {
    const ModelSpec spec = texture_spec();
    const std::vector<SweepCell> grid{{OptimizerKind::Adam, 16, 1e-4}, {OptimizerKind::Sgd, 16, 1e-5}};
    std::vector<double> adam, sgd;
    for (int s = 0; s < 3; ++s) {
        const LabeledDataset data = synthetic::make_grating_dataset(75, 32, 2000 + s, 4, 0.25);
        TrainConfig base;
        base.epochs = 60;
        base.early_stop_patience = 60;
        base.val_fraction = 1.0 / 3.0;
        base.seed = 60 + s;
        const auto rows = sensitivity_sweep(spec, data, grid, base);
        for (const SweepRow& r : rows) {
            if (r.failed) {
                pass = false;
                return "cell failed: " + r.error;
            }
            (r.optimizer == OptimizerKind::Adam ? adam : sgd).push_back(r.accuracy);
        }
    }
    const double adam_med = median(adam);
    const double sgd_med = median(sgd);
    pass = adam_med - sgd_med >= 0.20;
    return "median over 3 seeds: adam@1e-4 " + fmt(adam_med) + ", sgd@1e-5 " + fmt(sgd_med) + " (gap " +
           fmt(adam_med - sgd_med) + ")";
}

std::string check_crossval_protocol(bool& pass) {
    // Plan-level invariants over random label sets.
    Rng rng(461);
    int violations = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const int classes = 2 + static_cast<int>(rng.index(3));
        std::vector<int> labels;
        for (int c = 0; c < classes; ++c) {
            const int per = 5 + static_cast<int>(rng.index(40));
            labels.insert(labels.end(), static_cast<std::size_t>(per), c);
        }
        const FoldPlan plan = kfold_partition(labels, 5, trial);
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (plan.fold_of[i] < 0 || plan.fold_of[i] >= 5) ++violations;
        }
        for (int c = 0; c < classes; ++c) {
            std::vector<int> sizes(5, 0);
            for (std::size_t i = 0; i < labels.size(); ++i) {
                if (labels[i] == c) sizes[static_cast<std::size_t>(plan.fold_of[i])]++;
            }
            const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
            if (*hi - *lo > 1) ++violations;
        }
        // Disjoint and exhaustive by construction of fold_of; verify the
        // index recovery round trip.
        std::size_t total = 0;
        for (int f = 0; f < 5; ++f) total += plan.fold_indices(f).size();
        if (total != labels.size()) ++violations;
    }

    // Report format: 5 fold rows plus an arithmetic-mean row from the CLI.
    const fs::path dir = fs::temp_directory_path() / "fga_acc_cv";
    fs::remove_all(dir);
    fs::create_directories(dir / "data");
    const char* names[4] = {"glioma", "meningioma", "notumor", "pituitary"};
    Rng prng(7);
    for (int k = 0; k < 4; ++k) {
        fs::create_directories(dir / "data" / names[k]);
        for (int i = 0; i < 10; ++i) {
            ImageU8 img;
            img.width = 8;
            img.height = 8;
            img.channels = 1;
            img.pixels.assign(64, static_cast<std::uint8_t>(k * 70 + prng.index(12)));
            write_png(img, (dir / "data" / names[k] / ("s" + std::to_string(i) + ".png")).string());
        }
    }
    {
        std::ofstream cfg(dir / "cfg.json");
        cfg << R"({"data":")" << (dir / "data").string() << R"(","out":")" << dir.string()
            << R"(","classes":4,"seed":3,)"
            << R"("model":{"input_h":8,"input_w":8,"backbone_a":[4],"backbone_b":[4],"fuse_channels":6,)"
            << R"("attention_reduction":4,"attention_gate_hidden":4,"attention_spatial_kernel":3},)"
            << R"("train":{"lr":0.005,"batch_size":8,"epochs":2,"early_stop_patience":5,"val_fraction":0.25}})";
    }
    const std::string cmd = std::string(FGA_BIN) + " crossval --config " + (dir / "cfg.json").string() +
                            " --k 5 > /dev/null 2>&1";
    if (WEXITSTATUS(std::system(cmd.c_str())) != 0) {
        pass = false;
        return "crossval command failed";
    }
    std::ifstream csv(dir / "crossval.csv");
    std::string line;
    std::vector<std::vector<std::string>> rows;
    while (std::getline(csv, line)) {
        std::vector<std::string> fields;
        std::istringstream ss(line);
        std::string part;
        while (std::getline(ss, part, ',')) fields.push_back(part);
        rows.push_back(fields);
    }
    bool format_ok = rows.size() == 7 && rows[0][0] == "fold" && rows[6][0] == "mean";
    if (format_ok) {
        for (int col = 1; col <= 4; ++col) {
            double sum = 0.0;
            for (int f = 1; f <= 5; ++f) sum += std::stod(rows[static_cast<std::size_t>(f)][static_cast<std::size_t>(col)]);
            if (std::abs(std::stod(rows[6][static_cast<std::size_t>(col)]) - sum / 5.0) > 1e-12) format_ok = false;
        }
    }
    fs::remove_all(dir);
    pass = violations == 0 && format_ok;
    return std::to_string(violations) + " plan violations; report format " + (format_ok ? "ok" : "BAD");
}

std::string check_gradcam(bool& pass) {
    Rng rng(471);
    ModelSpec spec = tiny_spec();
    spec.input_h = 16;
    spec.input_w = 16;
    spec.backbone_a = {4, 8};
    spec.backbone_b = {4, 8};
    spec.fuse_channels = 8;

    bool range_ok = true;
    {
        Model m(spec, 41);
        for (std::int64_t i = 0; i < m.params().cls_w.value.size(); ++i) {
            m.params().cls_w.value[i] = rng.uniform(-1.0, 1.0);
        }
        for (int trial = 0; trial < 25; ++trial) {
            const Tensor img = oracle::random_tensor(Shape{16, 16, 3}, rng, 0.0, 1.0);
            const Heatmap map = gradcam(m, img, static_cast<int>(rng.index(4)), "fuse");
            double peak = 0.0;
            for (double v : map.values) {
                if (v < 0.0 || v > 1.0) range_ok = false;
                peak = std::max(peak, v);
            }
            if (!(peak == 1.0 || peak == 0.0)) range_ok = false;
            for (double v : map.upsampled) {
                if (v < 0.0 || v > 1.0) range_ok = false;
            }
        }
    }

    // Closed-form toy case: single fuse channel, positive classifier weight.
    double toy_err = 0.0;
    {
        ModelSpec toy = spec;
        toy.fuse_channels = 1;
        Model m(toy, 43);
        m.params().cls_w.value.fill(0.0);
        m.params().cls_w.value.at(1, 0) = 3.0;
        const Tensor img = oracle::random_tensor(Shape{16, 16, 3}, rng, 0.0, 1.0);
        const Heatmap map = gradcam(m, img, 1, "fuse");
        Tape t;
        auto r = m.forward(t, t.constant(Tensor(Shape{1, 16, 16, 3}, img.values())), false, 0);
        const Tensor& a = t.value(r.tap("fuse"));
        double peak = 0.0;
        std::vector<double> expected(map.values.size());
        for (std::size_t i = 0; i < expected.size(); ++i) {
            expected[i] = std::max(0.0, a[static_cast<std::int64_t>(i)]);
            peak = std::max(peak, expected[i]);
        }
        if (peak > 0.0) {
            for (std::size_t i = 0; i < expected.size(); ++i) {
                toy_err = std::max(toy_err, std::abs(map.values[i] - expected[i] / peak));
            }
        } else {
            toy_err = 1.0;
        }
    }

    // Overlay PNG round trip through the module's own decoder.
    bool roundtrip_ok = true;
    {
        Model m(spec, 47);
        for (std::int64_t i = 0; i < m.params().cls_w.value.size(); ++i) {
            m.params().cls_w.value[i] = rng.uniform(-1.0, 1.0);
        }
        const Tensor img = oracle::random_tensor(Shape{16, 16, 3}, rng, 0.0, 1.0);
        const Heatmap map = gradcam(m, img, 0, "fuse");
        const ImageU8 rendered = render_overlay(img, map, 0.4);
        const fs::path path = fs::temp_directory_path() / "fga_acc_overlay.cam.png";
        overlay_emit(img, map, 0.4, path.string());
        const ImageU8 back = read_image(path.string());
        roundtrip_ok = back.pixels == rendered.pixels && back.width == rendered.width &&
                       back.height == rendered.height && back.channels == rendered.channels;
        fs::remove(path);
    }

    pass = range_ok && toy_err <= 1e-9 && roundtrip_ok;
    return std::string("range ") + (range_ok ? "ok" : "BAD") + ", toy err " + fmt(toy_err) + ", overlay round trip " +
           (roundtrip_ok ? "exact" : "BAD");
}

std::string slurp_file(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::string check_reproducibility(bool& pass) {
    const fs::path dir = fs::temp_directory_path() / "fga_acc_repro";
    fs::remove_all(dir);
    fs::create_directories(dir / "data");
    const char* names[4] = {"glioma", "meningioma", "notumor", "pituitary"};
    Rng prng(11);
    for (int k = 0; k < 4; ++k) {
        fs::create_directories(dir / "data" / names[k]);
        for (int i = 0; i < 6; ++i) {
            ImageU8 img;
            img.width = 8;
            img.height = 8;
            img.channels = 1;
            img.pixels.resize(64);
            for (auto& p : img.pixels) p = static_cast<std::uint8_t>(k * 60 + prng.index(40));
            write_png(img, (dir / "data" / names[k] / ("s" + std::to_string(i) + ".png")).string());
        }
    }
    const auto config_for = [&](const fs::path& out) {
        const fs::path cfg = out / "cfg.json";
        fs::create_directories(out);
        std::ofstream f(cfg);
        f << R"({"data":")" << (dir / "data").string() << R"(","out":")" << out.string()
          << R"(","classes":4,"seed":1234,)"
          << R"("model":{"input_h":8,"input_w":8,"backbone_a":[4],"backbone_b":[4],"fuse_channels":6,)"
          << R"("attention_reduction":4,"attention_gate_hidden":4,"attention_spatial_kernel":3},)"
          << R"("train":{"lr":0.005,"batch_size":8,"epochs":6,"early_stop_patience":10,"val_fraction":0.25}})";
        return cfg.string();
    };
    const std::string bin = FGA_BIN;
    const auto sh = [](const std::string& cmd) { return WEXITSTATUS(std::system((cmd + " > /dev/null 2>&1").c_str())); };

    for (const char* run : {"r1", "r2"}) {
        const fs::path out = dir / run;
        if (sh(bin + " train --config " + config_for(out)) != 0) {
            pass = false;
            return "train failed";
        }
        if (sh(bin + " eval --checkpoint " + (out / "model.fga").string() + " --data " + (dir / "data").string() +
               " --out " + out.string()) != 0) {
            pass = false;
            return "eval failed";
        }
        if (sh(bin + " heatmap --checkpoint " + (out / "model.fga").string() + " --out " + out.string() + " " +
               (dir / "data" / "glioma" / "s0.png").string()) != 0) {
            pass = false;
            return "heatmap failed";
        }
    }
    const bool ckpt = slurp_file(dir / "r1" / "model.fga") == slurp_file(dir / "r2" / "model.fga");
    const bool hist = slurp_file(dir / "r1" / "history.csv") == slurp_file(dir / "r2" / "history.csv");
    const bool eval_json = slurp_file(dir / "r1" / "eval.json") == slurp_file(dir / "r2" / "eval.json");
    const bool heat =
        slurp_file(dir / "r1" / "s0.glioma.cam.png") == slurp_file(dir / "r2" / "s0.glioma.cam.png");
    const bool nonempty = !slurp_file(dir / "r1" / "model.fga").empty();
    fs::remove_all(dir);
    pass = ckpt && hist && eval_json && heat && nonempty;
    std::string detail = "checkpoint ";
    detail += ckpt ? "==" : "!=";
    detail += ", history ";
    detail += hist ? "==" : "!=";
    detail += ", eval ";
    detail += eval_json ? "==" : "!=";
    detail += ", heatmap ";
    detail += heat ? "==" : "!=";
    return detail;
}

} // namespace

int main(int argc, char** argv) {
    const std::string filter = argc > 1 ? argv[1] : "";
    const auto want = [&](const std::string& name) { return filter.empty() || name.find(filter) != std::string::npos; };

    const auto t0 = clock_type::now();
    if (want("gradient-integrity")) criterion("gradient-integrity", check_gradient_integrity);
    if (want("spectral-oracle")) criterion("spectral-oracle", check_spectral_oracle);
    if (want("fga-invariants")) criterion("fga-invariants", check_fga_invariants);
    if (want("metric-oracles")) criterion("metric-oracles", check_metric_oracles);
    if (want("overfit-smoke")) criterion("overfit-smoke", check_overfit_smoke);
    if (want("mechanism-check")) criterion("mechanism-check", check_mechanism);
    if (want("sweep-directional")) criterion("sweep-directional", check_sweep_directional);
    if (want("crossval-protocol")) criterion("crossval-protocol", check_crossval_protocol);
    if (want("gradcam")) criterion("gradcam", check_gradcam);
    if (want("reproducibility")) criterion("reproducibility", check_reproducibility);

    int failures = 0;
    for (const Criterion& c : g_results) failures += c.pass ? 0 : 1;
    std::cout << g_results.size() - static_cast<std::size_t>(failures) << "/" << g_results.size()
              << " criteria passed in " << std::fixed << std::setprecision(1)
              << std::chrono::duration<double>(clock_type::now() - t0).count() << "s" << std::endl;
    return failures == 0 ? 0 : 1;
}
