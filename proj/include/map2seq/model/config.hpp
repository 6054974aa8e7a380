#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "json.hpp"

namespace map2seq::model {

enum class Mode { kGraph, kSeq2Seq };

std::string mode_name(Mode m);
Mode mode_from_name(const std::string& name);

struct ModelConfig {
    Mode mode = Mode::kGraph;
    std::size_t d_model = 256;
    std::size_t heads = 8;
    std::size_t layers = 6;
    std::size_t d_ff = 1024;
    double dropout = 0.1;
    double leaky_slope = 0.2;

    // Throws ConfigError on d_model % heads != 0, zero layers and the like.
    void validate() const;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct TrainConfig {
    std::size_t batch_size = 12;
    std::size_t max_epochs = 100;
    std::size_t patience = 10;
    double lr = 0.5;             // scale on the warmup schedule, or the raw rate with constant_lr
    std::size_t warmup = 4000;
    bool constant_lr = false;
    std::uint64_t seed = 1;
    // Ends training at the first epoch whose dev token accuracy reaches this.
    std::optional<double> stop_at_accuracy;

    void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct DecodeConfig {
    std::size_t beam = 4;
    std::size_t max_len = 120;
};

}  // namespace map2seq::model
