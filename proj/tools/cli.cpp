#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "fga/attention.hpp"
#include "fga/checkpoint.hpp"
#include "fga/config.hpp"
#include "fga/dataset.hpp"
#include "fga/gradcam.hpp"
#include "fga/image.hpp"
#include "fga/metrics.hpp"
#include "fga/rng.hpp"
#include "fga/train.hpp"

namespace fs = std::filesystem;

namespace fga::cli {

namespace {

struct Options {
    std::string config_path;
    std::string data_dir;
    std::string checkpoint_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    bool seed_set = false;
    int classes = 0;  // 0 = take from config
    int k = 5;
    std::string tap = "fuse";
    double alpha = 0.4;
    std::vector<std::string> images;
    std::string optimizers, batches, lrs;  // sweep grid overrides
    int repeats = 9;
    std::string shapes = "16x16x16,16x16x32,32x32x16";
};

RunConfig effective_config(const Options& o) {
    RunConfig rc;
    if (!o.config_path.empty()) rc = run_config_from_file(o.config_path);
    if (!o.data_dir.empty()) rc.data_root = o.data_dir;
    if (o.out_dir != ".") rc.out_dir = o.out_dir;
    else if (rc.out_dir.empty()) rc.out_dir = ".";
    if (o.seed_set) rc.seed = o.seed;
    if (o.classes != 0) {
        rc.class_mode = o.classes;
        rc.model.classes = o.classes;
    }
    rc.train.seed = rc.seed;
    return rc;
}

LabeledDataset load_for(const RunConfig& rc) {
    if (rc.data_root.empty()) throw ValueError("--data <dir> is required (or a config with a data entry)");
    LabeledDataset data =
        load_dataset(rc.data_root, rc.model.input_h, rc.model.input_w, class_mode_from(rc.class_mode));
    if (data.classes() != rc.model.classes) {
        throw ValueError("dataset resolves to " + std::to_string(data.classes()) + " classes, config says " +
                         std::to_string(rc.model.classes));
    }
    return data;
}

Tensor preprocess_for(const Model& model, const std::string& path) {
    const ImageU8 img = read_image(path);
    Tensor t = image_to_tensor(img);
    t = resize_values(t, model.spec().input_h, model.spec().input_w, ResizeKind::Bicubic);
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] /= 255.0;
    return t;
}

int cmd_train(const Options& o) {
    RunConfig rc = effective_config(o);
    LabeledDataset data = load_for(rc);
    rc.model.class_names = data.class_names;
    rc.validate();
    fs::create_directories(rc.out_dir);

    Model model(rc.model, derive_seed(rc.seed, 0xA0DE1));
    const TrainHistory history = train_loop(model, data, rc.train);
    const std::string ckpt = (fs::path(rc.out_dir) / "model.fga").string();
    save_checkpoint(model, ckpt);
    history.write_csv((fs::path(rc.out_dir) / "history.csv").string());
    history.write_json((fs::path(rc.out_dir) / "history.json").string());

    const auto& best = history.epochs[static_cast<std::size_t>(history.best_epoch)];
    std::cout << "trained " << history.epochs.size() << " epochs (best " << history.best_epoch + 1 << ")"
              << (history.early_stopped ? ", early stopped" : "") << "\n"
              << "best val_loss " << format_double(best.val_loss) << " val_acc " << format_double(best.val_acc)
              << "\n"
              << "checkpoint " << ckpt << "\n";
    return 0;
}

int cmd_eval(const Options& o) {
    if (o.checkpoint_path.empty()) throw ValueError("--checkpoint <path> is required");
    Model model = load_checkpoint(o.checkpoint_path);
    RunConfig rc = effective_config(o);
    rc.class_mode = model.spec().classes;
    rc.model = model.spec();
    LabeledDataset data = load_for(rc);
    if (data.classes() != model.spec().classes) {
        throw ValueError("dataset has " + std::to_string(data.classes()) + " classes, checkpoint expects " +
                         std::to_string(model.spec().classes));
    }
    fs::create_directories(rc.out_dir);

    const EvalPass pass = eval_pass(model, data);
    EvalReport report = evaluate(pass.truth, pass.probs, data.class_names);
    report.skipped_files = data.skipped;
    report.write_json((fs::path(rc.out_dir) / "eval.json").string());
    report.write_confusion_csv((fs::path(rc.out_dir) / "confusion.csv").string());
    report.write_roc_csv((fs::path(rc.out_dir) / "roc.csv").string());
    std::cout << "samples " << data.size() << "\n"
              << "accuracy " << format_double(report.metrics.accuracy) << "\n"
              << "macro_f1 " << format_double(report.metrics.macro_f1) << "\n";
    return 0;
}

int cmd_crossval(const Options& o) {
    RunConfig rc = effective_config(o);
    LabeledDataset data = load_for(rc);
    rc.model.class_names = data.class_names;
    rc.validate();
    if (o.k < 2) throw ValueError("--k must be >= 2");
    fs::create_directories(rc.out_dir);

    const FoldPlan plan = kfold_partition(data.labels, o.k, rc.seed);
    struct Row {
        double acc, mp, mr, mf1;
    };
    std::vector<Row> rows;
    for (int fold = 0; fold < o.k; ++fold) {
        const std::vector<int> heldout = plan.fold_indices(fold);
        const std::vector<int> rest = plan.complement_indices(fold);
        // Early stopping needs its own validation split inside the fold's
        // training portion.
        std::vector<int> sub_labels;
        sub_labels.reserve(rest.size());
        for (int i : rest) sub_labels.push_back(data.labels[static_cast<std::size_t>(i)]);
        const auto [tr_local, va_local] =
            stratified_split(sub_labels, rc.train.val_fraction, derive_seed(rc.seed, 0x5011d, fold));
        std::vector<int> train_idx, val_idx;
        for (int i : tr_local) train_idx.push_back(rest[static_cast<std::size_t>(i)]);
        for (int i : va_local) val_idx.push_back(rest[static_cast<std::size_t>(i)]);

        TrainConfig cfg = rc.train;
        cfg.seed = derive_seed(rc.seed, 0x7e41, fold);
        Model model(rc.model, derive_seed(rc.seed, 0x30de1, fold));
        train_loop(model, data, cfg, train_idx, val_idx);
        const EvalPass pass = eval_pass(model, data, heldout);
        const EvalReport report = evaluate(pass.truth, pass.probs, data.class_names);
        rows.push_back(Row{report.metrics.accuracy, report.metrics.macro_precision, report.metrics.macro_recall,
                           report.metrics.macro_f1});
    }

    std::ofstream csv(fs::path(rc.out_dir) / "crossval.csv", std::ios::binary);
    if (!csv) throw IoError("cannot write crossval.csv");
    csv << "fold,accuracy,macro_precision,macro_recall,macro_f1\n";
    Row mean{0, 0, 0, 0};
    for (std::size_t f = 0; f < rows.size(); ++f) {
        const Row& r = rows[f];
        csv << (f + 1) << "," << format_double(r.acc) << "," << format_double(r.mp) << "," << format_double(r.mr)
            << "," << format_double(r.mf1) << "\n";
        std::cout << "fold " << (f + 1) << " accuracy " << format_double(r.acc) << " macro_f1 "
                  << format_double(r.mf1) << "\n";
        mean.acc += r.acc;
        mean.mp += r.mp;
        mean.mr += r.mr;
        mean.mf1 += r.mf1;
    }
    const double kd = static_cast<double>(rows.size());
    mean = Row{mean.acc / kd, mean.mp / kd, mean.mr / kd, mean.mf1 / kd};
    csv << "mean," << format_double(mean.acc) << "," << format_double(mean.mp) << "," << format_double(mean.mr)
        << "," << format_double(mean.mf1) << "\n";
    std::cout << "mean accuracy " << format_double(mean.acc) << " macro_f1 " << format_double(mean.mf1) << "\n";
    return 0;
}

std::vector<SweepCell> parse_grid(const Options& o) {
    if (o.optimizers.empty() && o.batches.empty() && o.lrs.empty()) return default_sweep_grid();
    const auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::size_t start = 0;
        while (start <= s.size()) {
            const std::size_t comma = s.find(',', start);
            if (comma == std::string::npos) {
                out.push_back(s.substr(start));
                break;
            }
            out.push_back(s.substr(start, comma - start));
            start = comma + 1;
        }
        return out;
    };
    std::vector<OptimizerKind> opts;
    for (const auto& name : split(o.optimizers.empty() ? "adam,adamax,sgd" : o.optimizers)) {
        opts.push_back(optimizer_from(name));
    }
    std::vector<int> batches;
    for (const auto& b : split(o.batches.empty() ? "16,32" : o.batches)) batches.push_back(std::stoi(b));
    std::vector<double> lrs;
    for (const auto& l : split(o.lrs.empty() ? "1e-5,1e-4" : o.lrs)) lrs.push_back(std::stod(l));
    std::vector<SweepCell> grid;
    for (const auto opt : opts)
        for (const int b : batches)
            for (const double lr : lrs) grid.push_back(SweepCell{opt, b, lr});
    return grid;
}

int cmd_sweep(const Options& o) {
    RunConfig rc = effective_config(o);
    LabeledDataset data = load_for(rc);
    rc.model.class_names = data.class_names;
    rc.validate();
    fs::create_directories(rc.out_dir);

    const std::vector<SweepCell> grid = parse_grid(o);
    const std::vector<SweepRow> rows = sensitivity_sweep(rc.model, data, grid, rc.train);
    write_sweep_csv(rows, (fs::path(rc.out_dir) / "sweep.csv").string());
    write_sweep_json(rows, (fs::path(rc.out_dir) / "sweep.json").string());
    for (const SweepRow& r : rows) {
        std::cout << optimizer_name(r.optimizer) << " batch " << r.batch_size << " lr " << format_double(r.lr);
        if (r.failed) {
            std::cout << " FAILED: " << r.error << "\n";
        } else {
            std::cout << " acc " << format_double(r.accuracy) << " macro_f1 " << format_double(r.macro_f1) << "\n";
        }
    }
    return 0;
}

int cmd_infer(const Options& o) {
    if (o.checkpoint_path.empty()) throw ValueError("--checkpoint <path> is required");
    if (o.images.empty()) throw ValueError("at least one image path is required");
    Model model = load_checkpoint(o.checkpoint_path);
    for (const std::string& path : o.images) {
        const Tensor input = preprocess_for(model, path);
        const Prediction p = model.predict(input);
        std::cout << path << "\t" << model.spec().class_name(p.class_index) << "\t" << format_double(p.confidence)
                  << "\n";
    }
    return 0;
}

int cmd_heatmap(const Options& o) {
    if (o.checkpoint_path.empty()) throw ValueError("--checkpoint <path> is required");
    if (o.images.empty()) throw ValueError("at least one image path is required");
    Model model = load_checkpoint(o.checkpoint_path);
    fs::create_directories(o.out_dir);
    for (const std::string& path : o.images) {
        const Tensor input = preprocess_for(model, path);
        const Prediction p = model.predict(input);
        const Heatmap map = gradcam(model, input, p.class_index, o.tap);
        const std::string name =
            fs::path(path).stem().string() + "." + model.spec().class_name(p.class_index) + ".cam.png";
        const std::string out_path = (fs::path(o.out_dir) / name).string();
        overlay_emit(input, map, o.alpha, out_path);
        std::cout << out_path << "\t" << model.spec().class_name(p.class_index) << "\t"
                  << format_double(p.confidence) << "\n";
    }
    return 0;
}

struct BenchShape {
    int h, w, c;
};

std::vector<BenchShape> parse_shapes(const std::string& text) {
    std::vector<BenchShape> shapes;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t comma = text.find(',', start);
        if (comma == std::string::npos) comma = text.size();
        const std::string part = text.substr(start, comma - start);
        BenchShape s{};
        if (std::sscanf(part.c_str(), "%dx%dx%d", &s.h, &s.w, &s.c) != 3 || s.h < 1 || s.w < 1 || s.c < 1) {
            throw ValueError("bad shape '" + part + "' (expected HxWxC)");
        }
        shapes.push_back(s);
        start = comma + 1;
    }
    if (shapes.empty()) throw ValueError("empty shape grid");
    return shapes;
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double iqr_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto quartile = [&](double q) {
        const double pos = q * static_cast<double>(v.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, v.size() - 1);
        return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
    };
    return quartile(0.75) - quartile(0.25);
}

int cmd_bench(const Options& o) {
    if (o.repeats < 3) throw ValueError("--repeats must be >= 3");
    fs::create_directories(o.out_dir);
    std::ofstream csv(fs::path(o.out_dir) / "bench.csv", std::ios::binary);
    if (!csv) throw IoError("cannot write bench.csv");
    csv << "h,w,c,block,params,fwd_median_us,fwd_iqr_us,fwdbwd_median_us,fwdbwd_iqr_us\n";

    using clock = std::chrono::steady_clock;
    const auto us_since = [](clock::time_point t0) {
        return std::chrono::duration<double, std::micro>(clock::now() - t0).count();
    };

    for (const BenchShape& shape : parse_shapes(o.shapes)) {
        AttentionConfig cfg;
        cfg.channels = shape.c;
        Rng rng(derive_seed(o.seed, static_cast<std::uint64_t>(shape.h * shape.w * shape.c)));
        Tensor x(Shape{1, shape.h, shape.w, shape.c});
        for (std::int64_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.0, 1.0);

        for (const std::string block : {"none", "cbam", "fga"}) {
            FgaParams fga_params;
            CbamParams cbam_params;
            std::int64_t params = 0;
            if (block == "fga") {
                fga_params = FgaParams::init(cfg, 7);
                params = FgaParams::parameter_count(cfg);
            } else if (block == "cbam") {
                cbam_params = CbamParams::init(cfg, 7);
                params = CbamParams::parameter_count(cfg);
            }
            const auto run_once = [&](bool backward) {
                Tape t;
                const NodeId in = backward ? t.input(x) : t.constant(x);
                NodeId out = in;
                if (block == "fga") {
                    out = fga_block(t, in, cfg, fga_params).out;
                } else if (block == "cbam") {
                    out = cbam_block(t, in, cfg, cbam_params).out;
                }
                if (backward) t.backward(sum_all(t, out));
                return t.value(out)[0];
            };
            std::vector<double> fwd, both;
            double sink = 0.0;
            for (int r = 0; r < o.repeats; ++r) {
                const auto t0 = clock::now();
                sink += run_once(false);
                fwd.push_back(us_since(t0));
                const auto t1 = clock::now();
                sink += run_once(true);
                both.push_back(us_since(t1));
            }
            (void)sink;
            csv << shape.h << "," << shape.w << "," << shape.c << "," << block << "," << params << ","
                << format_double(median_of(fwd)) << "," << format_double(iqr_of(fwd)) << ","
                << format_double(median_of(both)) << "," << format_double(iqr_of(both)) << "\n";
            std::cout << shape.h << "x" << shape.w << "x" << shape.c << " " << block << " params " << params
                      << " fwd_us " << median_of(fwd) << " fwdbwd_us " << median_of(both) << "\n";
        }
    }
    return 0;
}

void add_common(CLI::App* cmd, Options& o) {
    cmd->add_option("--config", o.config_path, "JSON run configuration");
    cmd->add_option("--data", o.data_dir, "dataset root (one folder per class)");
    cmd->add_option("--checkpoint", o.checkpoint_path, "model checkpoint path");
    cmd->add_option("--out", o.out_dir, "output directory");
    cmd->add_option("--seed", o.seed, "master seed")->each([&o](const std::string&) { o.seed_set = true; });
    cmd->add_option("--classes", o.classes, "class mode: 4, 3 or 2")->check(CLI::IsMember({2, 3, 4}));
}

} // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"fganet: dual-backbone image classifier with frequency-gated attention"};
    app.require_subcommand(1);
    Options o;
    int rc = 0;

    CLI::App* train = app.add_subcommand("train", "fit a model and write checkpoint + history");
    add_common(train, o);
    train->callback([&] { rc = cmd_train(o); });

    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint: confusion, metrics, ROC/AUC");
    add_common(eval, o);
    eval->callback([&] { rc = cmd_eval(o); });

    CLI::App* crossval = app.add_subcommand("crossval", "stratified k-fold cross-validation");
    add_common(crossval, o);
    crossval->add_option("--k", o.k, "number of folds")->check(CLI::PositiveNumber);
    crossval->callback([&] { rc = cmd_crossval(o); });

    CLI::App* sweep = app.add_subcommand("sweep", "optimizer / batch size / learning rate sensitivity table");
    add_common(sweep, o);
    sweep->add_option("--optimizers", o.optimizers, "comma list (default adam,adamax,sgd)");
    sweep->add_option("--batch-sizes", o.batches, "comma list (default 16,32)");
    sweep->add_option("--lrs", o.lrs, "comma list (default 1e-5,1e-4)");
    sweep->callback([&] { rc = cmd_sweep(o); });

    CLI::App* infer = app.add_subcommand("infer", "classify images: path, class, confidence per line");
    add_common(infer, o);
    infer->add_option("images", o.images, "image files (PNG/PGM/PPM)");
    infer->callback([&] { rc = cmd_infer(o); });

    CLI::App* heatmap = app.add_subcommand("heatmap", "emit Grad-CAM overlay PNGs");
    add_common(heatmap, o);
    heatmap->add_option("--tap", o.tap, "feature tap to explain (default fuse)");
    heatmap->add_option("--alpha", o.alpha, "overlay blend weight")->check(CLI::Range(0.0, 1.0));
    heatmap->add_option("images", o.images, "image files (PNG/PGM/PPM)");
    heatmap->callback([&] { rc = cmd_heatmap(o); });

    CLI::App* bench = app.add_subcommand("bench", "attention block timing and parameter table");
    add_common(bench, o);
    bench->add_option("--repeats", o.repeats, "timing repeats (>= 3)");
    bench->add_option("--shapes", o.shapes, "comma list of HxWxC shapes");
    bench->callback([&] { rc = cmd_bench(o); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return rc;
}

int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("fga");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

} // namespace fga::cli
