#include "map2seq/model/config.hpp"

#include "map2seq/errors.hpp"

namespace map2seq::model {

std::string mode_name(Mode m) { return m == Mode::kGraph ? "graph" : "seq2seq"; }

Mode mode_from_name(const std::string& name) {
    if (name == "graph") return Mode::kGraph;
    if (name == "seq2seq") return Mode::kSeq2Seq;
    throw ConfigError("unknown model mode '" + name + "' (expected graph or seq2seq)");
}

void ModelConfig::validate() const {
    if (d_model == 0) throw ConfigError("d_model must be positive");
    if (heads == 0 || d_model % heads != 0)
        throw ConfigError("d_model " + std::to_string(d_model) + " is not divisible by heads " + std::to_string(heads));
    if (layers == 0) throw ConfigError("layers must be at least 1");
    if (d_ff == 0) throw ConfigError("d_ff must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
    if (leaky_slope < 0.0) throw ConfigError("leaky_slope must be non-negative");
}

nlohmann::json to_json(const ModelConfig& c) {
    return {{"mode", mode_name(c.mode)}, {"d_model", c.d_model},   {"heads", c.heads},
            {"layers", c.layers},        {"d_ff", c.d_ff},         {"dropout", c.dropout},
            {"leaky_slope", c.leaky_slope}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    try {
        c.mode = mode_from_name(j.value("mode", mode_name(c.mode)));
        c.d_model = j.value("d_model", c.d_model);
        c.heads = j.value("heads", c.heads);
        c.layers = j.value("layers", c.layers);
        c.d_ff = j.value("d_ff", c.d_ff);
        c.dropout = j.value("dropout", c.dropout);
        c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("model config: ") + e.what());
    }
    c.validate();
    return c;
}

void TrainConfig::validate() const {
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (max_epochs == 0) throw ConfigError("max_epochs must be positive");
    if (!(lr > 0.0)) throw ConfigError("lr must be positive");
    if (stop_at_accuracy && (*stop_at_accuracy <= 0.0 || *stop_at_accuracy > 1.0))
        throw ConfigError("stop_at_accuracy must be in (0, 1]");
}

nlohmann::json to_json(const TrainConfig& c) {
    nlohmann::json j = {{"batch_size", c.batch_size}, {"max_epochs", c.max_epochs}, {"patience", c.patience},
                        {"lr", c.lr},                 {"warmup", c.warmup},         {"constant_lr", c.constant_lr},
                        {"seed", c.seed}};
    j["stop_at_accuracy"] = c.stop_at_accuracy ? nlohmann::json(*c.stop_at_accuracy) : nlohmann::json(nullptr);
    return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    try {
        c.batch_size = j.value("batch_size", c.batch_size);
        c.max_epochs = j.value("max_epochs", c.max_epochs);
        c.patience = j.value("patience", c.patience);
        c.lr = j.value("lr", c.lr);
        c.warmup = j.value("warmup", c.warmup);
        c.constant_lr = j.value("constant_lr", c.constant_lr);
        c.seed = j.value("seed", c.seed);
        if (j.contains("stop_at_accuracy") && !j["stop_at_accuracy"].is_null())
            c.stop_at_accuracy = j["stop_at_accuracy"].get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("train config: ") + e.what());
    }
    c.validate();
    return c;
}

}  // namespace map2seq::model
