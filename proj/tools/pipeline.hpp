#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "map2seq/model/config.hpp"
#include "map2seq/street_graph.hpp"

namespace map2seq::pipeline {

struct GeoRect {
    double min_lat = 0, min_lon = 0, max_lat = 0, max_lon = 0;

    bool contains(const geo::GeoPoint& p) const {
        return p.lat >= min_lat && p.lat <= max_lat && p.lon >= min_lon && p.lon <= max_lon;
    }
};

struct SplitConfig {
    std::optional<GeoRect> unseen_rect;
    std::size_t partially_seen = 700;
};

// Every default below is either a published setting or a documented choice;
// help_text() lists which.
struct PipelineConfig {
    double spacing = 10.0;
    double visibility_radius = 30.0;
    double goal_radius = 30.0;
    std::size_t min_nodes = 35;
    std::size_t max_nodes = 45;
    std::size_t min_intersections = 3;
    std::size_t routes = 1000;
    std::size_t pretrain_pairs = 20000;
    std::uint64_t seed = 1;
    model::ModelConfig model;
    model::TrainConfig train;
    model::DecodeConfig decode;
    SplitConfig split;

    void validate() const;
    streets::RouteConstraints constraints() const;
};

// Missing keys keep their defaults; unknown keys are rejected.
PipelineConfig config_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const PipelineConfig& c);
PipelineConfig load_config(const std::string& path);

// Defaults with provenance, for --help.
std::string defaults_help();

struct Split {
    std::vector<std::string> train;
    std::vector<std::string> dev;
    std::vector<std::string> test_seen;
    std::vector<std::string> test_unseen;
};

// Routes entirely inside the rectangle are unseen test, routes crossing its
// border are dev, the rest train; then `partially_seen` seeded picks move
// from train to the seen test set. Lists keep input order.
Split split_routes(const std::vector<streets::Route>& routes, const streets::StreetGraph& g,
                   const SplitConfig& config, std::uint64_t seed, std::vector<std::string>* warnings = nullptr);

nlohmann::ordered_json to_json(const Split& s);

}  // namespace map2seq::pipeline
