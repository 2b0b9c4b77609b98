#include "fga/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include <json.hpp>

#include "fga/metrics.hpp"
#include "fga/rng.hpp"

namespace fga {

namespace {
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr double kLogEps = 1e-12;
} // namespace

const char* optimizer_name(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::Adam: return "adam";
        case OptimizerKind::Adamax: return "adamax";
        case OptimizerKind::Sgd: return "sgd";
    }
    return "?";
}

OptimizerKind optimizer_from(const std::string& name) {
    if (name == "adam") return OptimizerKind::Adam;
    if (name == "adamax") return OptimizerKind::Adamax;
    if (name == "sgd") return OptimizerKind::Sgd;
    throw ValueError("unknown optimizer '" + name + "' (expected adam|adamax|sgd)");
}

void TrainConfig::validate() const {
    if (lr <= 0.0) throw ValueError("learning rate must be positive");
    if (batch_size < 1) throw ValueError("batch size must be >= 1");
    if (epochs < 1) throw ValueError("epochs must be >= 1");
    if (early_stop_patience < 0) throw ValueError("patience must be >= 0");
    if (val_fraction <= 0.0 || val_fraction >= 1.0) throw ValueError("val fraction must lie in (0, 1)");
}

NodeId cross_entropy(Tape& t, NodeId probs, NodeId onehot) {
    const Tensor& p = t.value(probs);
    const Tensor& y = t.value(onehot);
    if (p.rank() != 2 || y.rank() != 2 || p.shape() != y.shape()) {
        throw ShapeError("cross_entropy expects matching NxC probs and one-hot tensors, got " + p.shape().str() +
                         " vs " + y.shape().str());
    }
    const int n = p.dim(0), c = p.dim(1);
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < c; ++k) {
            const double yv = y.at(i, k);
            if (yv != 0.0) loss -= yv * std::log(p.at(i, k) + kLogEps);
        }
    }
    loss /= n;
    Tensor out = Tensor::scalar(loss);
    if (!t.needs_grad(probs)) return t.emit(std::move(out), false);
    const NodeId outid = t.emit(std::move(out), true);
    t.emit_step([probs, onehot, n, c, outid](Tape& tp) {
        if (!tp.has_grad(outid)) return;
        const double g = tp.grad(outid)[0];
        const Tensor& p2 = tp.value(probs);
        const Tensor& y2 = tp.value(onehot);
        Tensor& gp = tp.grad_buffer(probs);
        for (int i = 0; i < n; ++i) {
            for (int k = 0; k < c; ++k) {
                const double yv = y2.at(i, k);
                if (yv != 0.0) gp.at(i, k) -= g * yv / ((p2.at(i, k) + kLogEps) * n);
            }
        }
    });
    return outid;
}

void optimizer_step(const std::vector<std::pair<std::string, Variable*>>& params, OptimizerState& state,
                    OptimizerKind kind, double lr) {
    if (state.slots.empty()) {
        state.slots.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (kind != OptimizerKind::Sgd) {
                state.slots[i].m = Tensor(params[i].second->value.shape(), 0.0);
                state.slots[i].v = Tensor(params[i].second->value.shape(), 0.0);
            }
        }
    }
    if (state.slots.size() != params.size()) {
        throw ValueError("optimizer state does not match the parameter registry");
    }
    state.step += 1;
    const double t = static_cast<double>(state.step);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Variable& var = *params[i].second;
        if (!var.trainable) continue;
        if (var.grad.shape() != var.value.shape()) {
            throw ValueError("missing gradient for parameter " + params[i].first);
        }
        Tensor& theta = var.value;
        const Tensor& g = var.grad;
        switch (kind) {
            case OptimizerKind::Sgd: {
                for (std::int64_t j = 0; j < theta.size(); ++j) theta[j] -= lr * g[j];
                break;
            }
            case OptimizerKind::Adam: {
                Tensor& m = state.slots[i].m;
                Tensor& v = state.slots[i].v;
                const double bc1 = 1.0 - std::pow(kAdamBeta1, t);
                const double bc2 = 1.0 - std::pow(kAdamBeta2, t);
                for (std::int64_t j = 0; j < theta.size(); ++j) {
                    m[j] = kAdamBeta1 * m[j] + (1.0 - kAdamBeta1) * g[j];
                    v[j] = kAdamBeta2 * v[j] + (1.0 - kAdamBeta2) * g[j] * g[j];
                    const double mhat = m[j] / bc1;
                    const double vhat = v[j] / bc2;
                    theta[j] -= lr * mhat / (std::sqrt(vhat) + kAdamEps);
                }
                break;
            }
            case OptimizerKind::Adamax: {
                Tensor& m = state.slots[i].m;
                Tensor& u = state.slots[i].v;
                const double bc1 = 1.0 - std::pow(kAdamBeta1, t);
                for (std::int64_t j = 0; j < theta.size(); ++j) {
                    m[j] = kAdamBeta1 * m[j] + (1.0 - kAdamBeta1) * g[j];
                    u[j] = std::max(kAdamBeta2 * u[j], std::abs(g[j]));
                    if (u[j] > 0.0) theta[j] -= (lr / bc1) * m[j] / u[j];
                }
                break;
            }
        }
    }
}

std::pair<std::vector<int>, std::vector<int>> stratified_split(const std::vector<int>& labels, double val_fraction,
                                                               std::uint64_t seed) {
    if (labels.empty()) throw ValueError("stratified_split: empty label vector");
    std::map<int, std::vector<int>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(static_cast<int>(i));
    std::vector<int> train, val;
    for (auto& [cls, idx] : by_class) {
        if (idx.size() < 2) {
            throw ValueError("class " + std::to_string(cls) + " has fewer than 2 samples");
        }
        Rng rng(derive_seed(seed, 0x59117 + static_cast<std::uint64_t>(cls)));
        rng.shuffle(idx);
        std::int64_t take = std::llround(static_cast<double>(idx.size()) * val_fraction);
        take = std::max<std::int64_t>(1, std::min<std::int64_t>(take, static_cast<std::int64_t>(idx.size()) - 1));
        for (std::size_t i = 0; i < idx.size(); ++i) {
            (i < static_cast<std::size_t>(take) ? val : train).push_back(idx[i]);
        }
    }
    std::sort(train.begin(), train.end());
    std::sort(val.begin(), val.end());
    return {train, val};
}

std::vector<int> FoldPlan::fold_indices(int fold) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
        if (fold_of[i] == fold) out.push_back(static_cast<int>(i));
    }
    return out;
}

std::vector<int> FoldPlan::complement_indices(int fold) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
        if (fold_of[i] != fold) out.push_back(static_cast<int>(i));
    }
    return out;
}

FoldPlan kfold_partition(const std::vector<int>& labels, int k, std::uint64_t seed) {
    if (k < 2) throw ValueError("k-fold needs k >= 2");
    if (labels.empty()) throw ValueError("kfold_partition: empty label vector");
    std::map<int, std::vector<int>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(static_cast<int>(i));
    FoldPlan plan;
    plan.k = k;
    plan.fold_of.assign(labels.size(), -1);
    for (auto& [cls, idx] : by_class) {
        if (static_cast<int>(idx.size()) < k) {
            throw ValueError("class " + std::to_string(cls) + " has " + std::to_string(idx.size()) +
                             " samples, fewer than k=" + std::to_string(k));
        }
        Rng rng(derive_seed(seed, 0xf01d + static_cast<std::uint64_t>(cls)));
        rng.shuffle(idx);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            plan.fold_of[static_cast<std::size_t>(idx[i])] = static_cast<int>(i % static_cast<std::size_t>(k));
        }
    }
    return plan;
}

namespace {

Tensor assemble_images(const LabeledDataset& data, const std::vector<int>& idx, std::size_t from, std::size_t count) {
    std::vector<const Tensor*> ptrs;
    ptrs.reserve(count);
    for (std::size_t i = from; i < from + count; ++i) {
        ptrs.push_back(&data.images[static_cast<std::size_t>(idx[i])]);
    }
    return stack(ptrs);
}

Tensor assemble_onehot(const LabeledDataset& data, const std::vector<int>& idx, std::size_t from, std::size_t count) {
    const int c = data.classes();
    Tensor y(Shape{static_cast<int>(count), c});
    for (std::size_t i = 0; i < count; ++i) {
        const auto& row = data.onehot[static_cast<std::size_t>(idx[from + i])];
        for (int j = 0; j < c; ++j) y.at(static_cast<int>(i), j) = row[static_cast<std::size_t>(j)];
    }
    return y;
}

std::vector<Tensor> snapshot_params(const std::vector<std::pair<std::string, Variable*>>& params) {
    std::vector<Tensor> out;
    out.reserve(params.size());
    for (const auto& [name, var] : params) out.push_back(var->value);
    return out;
}

void restore_params(const std::vector<std::pair<std::string, Variable*>>& params, const std::vector<Tensor>& snap) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i].second->value = snap[i];
}

} // namespace

EvalPass eval_pass(Model& model, const LabeledDataset& data, const std::vector<int>& indices) {
    std::vector<int> idx = indices;
    if (idx.empty()) {
        idx.resize(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) idx[i] = static_cast<int>(i);
    }
    EvalPass out;
    const int c = data.classes();
    double loss_sum = 0.0;
    std::int64_t correct = 0;
    const std::size_t batch = 32;
    for (std::size_t from = 0; from < idx.size(); from += batch) {
        const std::size_t count = std::min(batch, idx.size() - from);
        Tape t;
        const NodeId x = t.constant(assemble_images(data, idx, from, count));
        const NodeId y = t.constant(assemble_onehot(data, idx, from, count));
        const auto r = model.forward(t, x, false, 0);
        const NodeId loss = cross_entropy(t, r.probs, y);
        loss_sum += t.value(loss)[0] * static_cast<double>(count);
        const Tensor& p = t.value(r.probs);
        for (std::size_t i = 0; i < count; ++i) {
            const int label = data.labels[static_cast<std::size_t>(idx[from + i])];
            std::vector<double> row(p.data() + static_cast<std::int64_t>(i) * c,
                                    p.data() + static_cast<std::int64_t>(i + 1) * c);
            const int pred = argmax(row.data(), c);
            if (pred == label) ++correct;
            out.truth.push_back(label);
            out.probs.push_back(std::move(row));
        }
    }
    out.loss = loss_sum / static_cast<double>(idx.size());
    out.accuracy = static_cast<double>(correct) / static_cast<double>(idx.size());
    return out;
}

TrainHistory train_loop(Model& model, const LabeledDataset& data, const TrainConfig& cfg) {
    const auto [train_idx, val_idx] = stratified_split(data.labels, cfg.val_fraction, cfg.seed);
    return train_loop(model, data, cfg, train_idx, val_idx);
}

TrainHistory train_loop(Model& model, const LabeledDataset& data, const TrainConfig& cfg,
                        const std::vector<int>& train_idx, const std::vector<int>& val_idx) {
    cfg.validate();
    data.validate();
    if (train_idx.empty() || val_idx.empty()) throw ValueError("train_loop: empty train or validation set");

    auto params = model.named_params();
    OptimizerState state;
    TrainHistory history;
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<Tensor> best_snapshot = snapshot_params(params);
    int bad_epochs = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<int> order = train_idx;
        Rng shuffle_rng(derive_seed(cfg.seed, 0xe90c4, static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        std::int64_t correct = 0;
        std::size_t step = 0;
        for (std::size_t from = 0; from < order.size(); from += static_cast<std::size_t>(cfg.batch_size), ++step) {
            const std::size_t count = std::min(static_cast<std::size_t>(cfg.batch_size), order.size() - from);
            Tape t;
            const NodeId x = t.constant(assemble_images(data, order, from, count));
            const NodeId y = t.constant(assemble_onehot(data, order, from, count));
            const auto r = model.forward(t, x, true,
                                         derive_seed(cfg.seed, 0xd20b0 + static_cast<std::uint64_t>(epoch), step));
            const NodeId loss = cross_entropy(t, r.probs, y);
            const double loss_value = t.value(loss)[0];
            if (!std::isfinite(loss_value)) {
                throw ValueError("non-finite loss at epoch " + std::to_string(epoch) + " step " +
                                 std::to_string(step));
            }
            model.reset_grads();
            t.backward(loss);
            optimizer_step(params, state, cfg.optimizer, cfg.lr);

            loss_sum += loss_value * static_cast<double>(count);
            const Tensor& p = t.value(r.probs);
            for (std::size_t i = 0; i < count; ++i) {
                const int label = data.labels[static_cast<std::size_t>(order[from + i])];
                if (argmax(p.data() + static_cast<std::int64_t>(i) * data.classes(), data.classes()) == label) {
                    ++correct;
                }
            }
        }

        EpochStats stats;
        stats.train_loss = loss_sum / static_cast<double>(order.size());
        stats.train_acc = static_cast<double>(correct) / static_cast<double>(order.size());
        const EvalPass val = eval_pass(model, data, val_idx);
        stats.val_loss = val.loss;
        stats.val_acc = val.accuracy;
        history.epochs.push_back(stats);

        if (stats.val_loss < best_val) {
            best_val = stats.val_loss;
            history.best_epoch = epoch;
            best_snapshot = snapshot_params(params);
            bad_epochs = 0;
        } else {
            ++bad_epochs;
            if (bad_epochs > cfg.early_stop_patience) {
                history.early_stopped = true;
                break;
            }
        }
    }
    restore_params(params, best_snapshot);
    return history;
}

void TrainHistory::write_csv(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << "epoch,train_loss,train_acc,val_loss,val_acc\n";
    for (std::size_t e = 0; e < epochs.size(); ++e) {
        f << e << "," << format_double(epochs[e].train_loss) << "," << format_double(epochs[e].train_acc) << ","
          << format_double(epochs[e].val_loss) << "," << format_double(epochs[e].val_acc) << "\n";
    }
}

std::string TrainHistory::to_json() const {
    nlohmann::json j;
    j["best_epoch"] = best_epoch;
    j["early_stopped"] = early_stopped;
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t e = 0; e < epochs.size(); ++e) {
        rows.push_back({{"epoch", e},
                        {"train_loss", epochs[e].train_loss},
                        {"train_acc", epochs[e].train_acc},
                        {"val_loss", epochs[e].val_loss},
                        {"val_acc", epochs[e].val_acc}});
    }
    j["epochs"] = rows;
    return j.dump(2);
}

void TrainHistory::write_json(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << to_json() << "\n";
}

std::vector<SweepCell> default_sweep_grid() {
    std::vector<SweepCell> grid;
    for (const OptimizerKind opt : {OptimizerKind::Adamax, OptimizerKind::Sgd, OptimizerKind::Adam}) {
        for (const int batch : {16, 32}) {
            for (const double lr : {1e-5, 1e-4}) {
                grid.push_back(SweepCell{opt, batch, lr});
            }
        }
    }
    return grid;
}

std::vector<SweepRow> sensitivity_sweep(const ModelSpec& spec, const LabeledDataset& data,
                                        const std::vector<SweepCell>& grid, const TrainConfig& base) {
    if (grid.empty()) throw ValueError("sensitivity_sweep: empty grid");
    std::vector<SweepRow> rows;
    for (const SweepCell& cell : grid) {
        SweepRow row;
        row.optimizer = cell.optimizer;
        row.batch_size = cell.batch_size;
        row.lr = cell.lr;
        try {
            TrainConfig cfg = base;
            cfg.optimizer = cell.optimizer;
            cfg.batch_size = cell.batch_size;
            cfg.lr = cell.lr;
            // Every cell starts from the same initialization and split.
            Model model(spec, base.seed);
            const auto [train_idx, val_idx] = stratified_split(data.labels, cfg.val_fraction, cfg.seed);
            train_loop(model, data, cfg, train_idx, val_idx);
            const EvalPass val = eval_pass(model, data, val_idx);
            const EvalReport report = evaluate(val.truth, val.probs, data.class_names);
            row.accuracy = report.metrics.accuracy;
            row.macro_precision = report.metrics.macro_precision;
            row.macro_recall = report.metrics.macro_recall;
            row.macro_f1 = report.metrics.macro_f1;
        } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string sweep_to_json(const std::vector<SweepRow>& rows) {
    nlohmann::json arr = nlohmann::json::array();
    for (const SweepRow& r : rows) {
        arr.push_back({{"optimizer", optimizer_name(r.optimizer)},
                       {"batch", r.batch_size},
                       {"lr", r.lr},
                       {"acc", r.accuracy},
                       {"macroP", r.macro_precision},
                       {"macroR", r.macro_recall},
                       {"macroF1", r.macro_f1},
                       {"failed", r.failed},
                       {"error", r.error}});
    }
    return nlohmann::json{{"cells", arr}}.dump(2);
}

void write_sweep_json(const std::vector<SweepRow>& rows, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << sweep_to_json(rows) << "\n";
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << "optimizer,batch,lr,acc,macroP,macroR,macroF1,failed,error\n";
    for (const SweepRow& r : rows) {
        f << optimizer_name(r.optimizer) << "," << r.batch_size << "," << format_double(r.lr) << ","
          << format_double(r.accuracy) << "," << format_double(r.macro_precision) << ","
          << format_double(r.macro_recall) << "," << format_double(r.macro_f1) << "," << (r.failed ? 1 : 0) << ","
          << r.error << "\n";
    }
}

} // namespace fga
