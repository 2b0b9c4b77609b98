#include "fga/config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

namespace fga {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        if (!allowed.contains(key)) {
            throw ValueError("unknown key '" + key + "' in " + where + " config");
        }
    }
}

json parse(const std::string& text, const std::string& what) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw IoError("invalid JSON in " + what);
    return j;
}

} // namespace

std::string model_spec_to_json(const ModelSpec& s) {
    json j;
    j["input_h"] = s.input_h;
    j["input_w"] = s.input_w;
    j["backbone_a"] = s.backbone_a;
    j["backbone_b"] = s.backbone_b;
    j["fuse_channels"] = s.fuse_channels;
    j["dropout"] = s.dropout;
    j["classes"] = s.classes;
    j["attention"] = attention_kind_name(s.attention);
    j["attention_reduction"] = s.attention_reduction;
    j["attention_spatial_kernel"] = s.attention_spatial_kernel;
    j["attention_gate_hidden"] = s.attention_gate_hidden;
    j["include_bias"] = s.include_bias;
    j["cbam_residual"] = s.cbam_residual;
    if (!s.class_names.empty()) j["class_names"] = s.class_names;
    return j.dump(2);
}

namespace {

ModelSpec model_spec_from(const json& j) {
    static const std::set<std::string> keys{"input_h",
                                            "input_w",
                                            "backbone_a",
                                            "backbone_b",
                                            "fuse_channels",
                                            "dropout",
                                            "classes",
                                            "attention",
                                            "attention_reduction",
                                            "attention_spatial_kernel",
                                            "attention_gate_hidden",
                                            "include_bias",
                                            "cbam_residual",
                                            "class_names"};
    reject_unknown_keys(j, keys, "model");
    ModelSpec s;
    s.input_h = j.value("input_h", s.input_h);
    s.input_w = j.value("input_w", s.input_w);
    if (j.contains("backbone_a")) s.backbone_a = j.at("backbone_a").get<std::vector<int>>();
    if (j.contains("backbone_b")) s.backbone_b = j.at("backbone_b").get<std::vector<int>>();
    s.fuse_channels = j.value("fuse_channels", s.fuse_channels);
    s.dropout = j.value("dropout", s.dropout);
    s.classes = j.value("classes", s.classes);
    if (j.contains("attention")) s.attention = attention_kind_from(j.at("attention").get<std::string>());
    s.attention_reduction = j.value("attention_reduction", s.attention_reduction);
    s.attention_spatial_kernel = j.value("attention_spatial_kernel", s.attention_spatial_kernel);
    s.attention_gate_hidden = j.value("attention_gate_hidden", s.attention_gate_hidden);
    s.include_bias = j.value("include_bias", s.include_bias);
    s.cbam_residual = j.value("cbam_residual", s.cbam_residual);
    if (j.contains("class_names")) s.class_names = j.at("class_names").get<std::vector<std::string>>();
    return s;
}

TrainConfig train_config_from(const json& j) {
    static const std::set<std::string> keys{"optimizer",  "lr",   "batch_size", "epochs",
                                            "early_stop_patience", "val_fraction", "seed"};
    reject_unknown_keys(j, keys, "train");
    TrainConfig c;
    if (j.contains("optimizer")) c.optimizer = optimizer_from(j.at("optimizer").get<std::string>());
    c.lr = j.value("lr", c.lr);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
    c.val_fraction = j.value("val_fraction", c.val_fraction);
    c.seed = j.value("seed", c.seed);
    return c;
}

} // namespace

ModelSpec model_spec_from_json(const std::string& text) { return model_spec_from(parse(text, "model spec")); }

std::string train_config_to_json(const TrainConfig& c) {
    json j;
    j["optimizer"] = optimizer_name(c.optimizer);
    j["lr"] = c.lr;
    j["batch_size"] = c.batch_size;
    j["epochs"] = c.epochs;
    j["early_stop_patience"] = c.early_stop_patience;
    j["val_fraction"] = c.val_fraction;
    j["seed"] = c.seed;
    return j.dump(2);
}

TrainConfig train_config_from_json(const std::string& text) {
    return train_config_from(parse(text, "train config"));
}

void RunConfig::validate() const {
    class_mode_from(class_mode);
    if (model.classes != class_mode) {
        throw ValueError("model classes (" + std::to_string(model.classes) + ") disagree with class mode (" +
                         std::to_string(class_mode) + ")");
    }
    model.validate();
    train.validate();
}

std::string run_config_to_json(const RunConfig& c) {
    json j;
    j["data"] = c.data_root;
    j["out"] = c.out_dir;
    j["classes"] = c.class_mode;
    j["model"] = json::parse(model_spec_to_json(c.model));
    j["train"] = json::parse(train_config_to_json(c.train));
    j["seed"] = c.seed;
    return j.dump(2);
}

RunConfig run_config_from_json(const std::string& text) {
    const json j = parse(text, "run config");
    static const std::set<std::string> keys{"data", "out", "classes", "model", "train", "seed"};
    reject_unknown_keys(j, keys, "run");
    RunConfig c;
    c.data_root = j.value("data", c.data_root);
    c.out_dir = j.value("out", c.out_dir);
    c.class_mode = j.value("classes", c.class_mode);
    if (j.contains("model")) c.model = model_spec_from(j.at("model"));
    if (j.contains("train")) c.train = train_config_from(j.at("train"));
    c.seed = j.value("seed", c.seed);
    c.model.classes = c.class_mode;
    return c;
}

RunConfig run_config_from_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open config " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return run_config_from_json(text);
}

} // namespace fga
