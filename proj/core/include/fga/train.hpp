#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fga/dataset.hpp"
#include "fga/model.hpp"
#include "fga/tape.hpp"

namespace fga {

enum class OptimizerKind { Adam, Adamax, Sgd };

const char* optimizer_name(OptimizerKind k);
OptimizerKind optimizer_from(const std::string& name);

struct TrainConfig {
    OptimizerKind optimizer = OptimizerKind::Adam;
    double lr = 1e-4;
    int batch_size = 32;
    int epochs = 30;
    int early_stop_patience = 5;
    double val_fraction = 0.2;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Mean over the batch of -sum_k y_k log(p_k + 1e-12). probs rows must come
/// from a softmax; onehot rows are one-hot label vectors.
NodeId cross_entropy(Tape& t, NodeId probs, NodeId onehot);

/// First/second-moment (or infinity-norm) buffers per parameter, aligned
/// with the model's registry order.
struct OptimizerState {
    struct Slot {
        Tensor m, v;
    };
    std::vector<Slot> slots;
    std::int64_t step = 0;
};

/// Adam (b1 0.9, b2 0.999, eps 1e-8, bias correction), Adamax (b1 0.9,
/// b2 0.999) or plain SGD. A zero gradient leaves parameters untouched.
void optimizer_step(const std::vector<std::pair<std::string, Variable*>>& params, OptimizerState& state,
                    OptimizerKind kind, double lr);

/// Per class: round(n_c * val_fraction) samples (at least 1) to validation
/// after a seeded shuffle; rest to training. Disjoint and exhaustive.
std::pair<std::vector<int>, std::vector<int>> stratified_split(const std::vector<int>& labels, double val_fraction,
                                                               std::uint64_t seed);

struct FoldPlan {
    int k = 0;
    std::vector<int> fold_of;  // sample index -> fold id

    std::vector<int> fold_indices(int fold) const;
    std::vector<int> complement_indices(int fold) const;
};

/// Stratified k-fold assignment: per-class seeded shuffle then round-robin,
/// so per-class fold sizes differ by at most one.
FoldPlan kfold_partition(const std::vector<int>& labels, int k, std::uint64_t seed);

struct EpochStats {
    double train_loss = 0.0, train_acc = 0.0;
    double val_loss = 0.0, val_acc = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    int best_epoch = -1;
    bool early_stopped = false;

    void write_csv(const std::string& path) const;
    std::string to_json() const;
    void write_json(const std::string& path) const;
};

/// Epoch loop over seeded-shuffled minibatches with early stopping on the
/// validation loss; the best epoch's parameters are restored at the end.
TrainHistory train_loop(Model& model, const LabeledDataset& data, const TrainConfig& cfg);
TrainHistory train_loop(Model& model, const LabeledDataset& data, const TrainConfig& cfg,
                        const std::vector<int>& train_idx, const std::vector<int>& val_idx);

struct EvalPass {
    std::vector<int> truth;
    std::vector<std::vector<double>> probs;
    double loss = 0.0;
    double accuracy = 0.0;
};

/// Inference pass over the given samples (all samples when empty).
EvalPass eval_pass(Model& model, const LabeledDataset& data, const std::vector<int>& indices = {});

struct SweepCell {
    OptimizerKind optimizer;
    int batch_size;
    double lr;
};

struct SweepRow {
    OptimizerKind optimizer = OptimizerKind::Adam;
    int batch_size = 0;
    double lr = 0.0;
    double accuracy = 0.0, macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
    bool failed = false;
    std::string error;
};

/// One train/eval run per grid cell; every cell starts from the same seeded
/// initialization and split. A failing cell is recorded, not fatal.
std::vector<SweepRow> sensitivity_sweep(const ModelSpec& spec, const LabeledDataset& data,
                                        const std::vector<SweepCell>& grid, const TrainConfig& base);

std::vector<SweepCell> default_sweep_grid();
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);
std::string sweep_to_json(const std::vector<SweepRow>& rows);
void write_sweep_json(const std::vector<SweepRow>& rows, const std::string& path);

} // namespace fga
