#pragma once

#include <string>

#include "fga/dataset.hpp"
#include "fga/model.hpp"
#include "fga/train.hpp"

namespace fga {

/// JSON round trip for the model and training configurations. The key set is
/// documented in the README; unknown keys are rejected to catch typos.
std::string model_spec_to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const std::string& text);

std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& text);

/// One experiment: dataset root, class mode, model and training settings,
/// output directory and the master seed.
struct RunConfig {
    std::string data_root;
    std::string out_dir = ".";
    int class_mode = 4;
    ModelSpec model;
    TrainConfig train;
    std::uint64_t seed = 0;

    void validate() const;
};

std::string run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const std::string& text);
RunConfig run_config_from_file(const std::string& path);

} // namespace fga
