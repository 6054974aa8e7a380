#include "pipeline.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "map2seq/errors.hpp"
#include "map2seq/jsonl.hpp"
#include "map2seq/rng.hpp"

namespace map2seq::pipeline {

void PipelineConfig::validate() const {
    if (!(spacing > 0)) throw ConfigError("spacing must be positive");
    if (!(visibility_radius > 0)) throw ConfigError("visibility_radius must be positive");
    if (!(goal_radius > 0)) throw ConfigError("goal_radius must be positive");
    if (min_nodes < 2 || min_nodes > max_nodes) throw ConfigError("route length bounds must satisfy 2 <= min_nodes <= max_nodes");
    if (routes == 0) throw ConfigError("routes must be positive");
    if (split.unseen_rect) {
        const auto& r = *split.unseen_rect;
        if (!(r.min_lat < r.max_lat) || !(r.min_lon < r.max_lon)) throw ConfigError("split.unseen_rect is empty");
    }
    model.validate();
    train.validate();
    if (decode.beam == 0 || decode.max_len == 0) throw ConfigError("decode beam and max_len must be positive");
}

streets::RouteConstraints PipelineConfig::constraints() const {
    streets::RouteConstraints c;
    c.min_nodes = min_nodes;
    c.max_nodes = max_nodes;
    c.min_intersections = min_intersections;
    c.goal_radius = goal_radius;
    return c;
}

PipelineConfig config_from_json(const nlohmann::json& j) {
    static const std::set<std::string> kKeys{"spacing",        "visibility_radius", "goal_radius", "min_nodes",
                                             "max_nodes",      "min_intersections", "routes",      "pretrain_pairs",
                                             "seed",           "model",             "train",       "decode",
                                             "split"};
    if (!j.is_object()) throw ConfigError("pipeline config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (!kKeys.count(key)) throw ConfigError("unknown config key '" + key + "'");
    }
    PipelineConfig c;
    try {
        c.spacing = j.value("spacing", c.spacing);
        c.visibility_radius = j.value("visibility_radius", c.visibility_radius);
        c.goal_radius = j.value("goal_radius", c.goal_radius);
        c.min_nodes = j.value("min_nodes", c.min_nodes);
        c.max_nodes = j.value("max_nodes", c.max_nodes);
        c.min_intersections = j.value("min_intersections", c.min_intersections);
        c.routes = j.value("routes", c.routes);
        c.pretrain_pairs = j.value("pretrain_pairs", c.pretrain_pairs);
        c.seed = j.value("seed", c.seed);
        if (j.contains("model")) c.model = model::model_config_from_json(j["model"]);
        if (j.contains("train")) c.train = model::train_config_from_json(j["train"]);
        if (j.contains("decode")) {
            c.decode.beam = j["decode"].value("beam", c.decode.beam);
            c.decode.max_len = j["decode"].value("max_len", c.decode.max_len);
        }
        if (j.contains("split")) {
            const auto& s = j["split"];
            c.split.partially_seen = s.value("partially_seen", c.split.partially_seen);
            if (s.contains("unseen_rect") && !s["unseen_rect"].is_null()) {
                const auto& r = s["unseen_rect"];
                c.split.unseen_rect = GeoRect{r.at("min_lat").get<double>(), r.at("min_lon").get<double>(),
                                              r.at("max_lat").get<double>(), r.at("max_lon").get<double>()};
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("pipeline config: ") + e.what());
    }
    c.validate();
    return c;
}

nlohmann::ordered_json to_json(const PipelineConfig& c) {
    nlohmann::ordered_json j;
    j["spacing"] = c.spacing;
    j["visibility_radius"] = c.visibility_radius;
    j["goal_radius"] = c.goal_radius;
    j["min_nodes"] = c.min_nodes;
    j["max_nodes"] = c.max_nodes;
    j["min_intersections"] = c.min_intersections;
    j["routes"] = c.routes;
    j["pretrain_pairs"] = c.pretrain_pairs;
    j["seed"] = c.seed;
    j["model"] = model::to_json(c.model);
    j["train"] = model::to_json(c.train);
    j["decode"] = {{"beam", c.decode.beam}, {"max_len", c.decode.max_len}};
    nlohmann::ordered_json split;
    split["partially_seen"] = c.split.partially_seen;
    if (c.split.unseen_rect) {
        const auto& r = *c.split.unseen_rect;
        split["unseen_rect"] = {{"min_lat", r.min_lat}, {"min_lon", r.min_lon}, {"max_lat", r.max_lat}, {"max_lon", r.max_lon}};
    } else {
        split["unseen_rect"] = nullptr;
    }
    j["split"] = std::move(split);
    return j;
}

PipelineConfig load_config(const std::string& path) { return config_from_json(read_json(path)); }

std::string defaults_help() {
    PipelineConfig c;
    std::ostringstream o;
    o << "Config defaults ([published] = setting reported for the original system, [chosen] = this implementation):\n";
    auto line = [&](const std::string& key, const std::string& value, const char* tag) {
        o << "  " << key << " = " << value << "  [" << tag << "]\n";
    };
    auto num = [](double v) {
        std::ostringstream s;
        s << v;
        return s.str();
    };
    line("spacing", num(c.spacing) + " m", "published");
    line("visibility_radius", num(c.visibility_radius) + " m", "published");
    line("goal_radius", num(c.goal_radius) + " m", "published");
    line("min_nodes / max_nodes", num(c.min_nodes) + " / " + num(c.max_nodes), "published");
    line("min_intersections", num(c.min_intersections), "published");
    line("routes", num(c.routes), "chosen");
    line("pretrain_pairs", num(c.pretrain_pairs), "published");
    line("seed", num(c.seed), "chosen");
    line("model.d_model", num(c.model.d_model), "published");
    line("model.heads", num(c.model.heads), "published");
    line("model.layers", num(c.model.layers), "published");
    line("model.d_ff", num(c.model.d_ff), "chosen");
    line("model.dropout", num(c.model.dropout), "chosen");
    line("model.leaky_slope", num(c.model.leaky_slope), "chosen");
    line("train.batch_size", num(c.train.batch_size), "published");
    line("train.lr", num(c.train.lr), "published");
    line("train.warmup", num(c.train.warmup), "chosen");
    line("train.max_epochs", num(c.train.max_epochs), "chosen");
    line("train.patience", num(c.train.patience), "chosen");
    line("decode.beam", num(c.decode.beam), "chosen");
    line("decode.max_len", num(c.decode.max_len), "chosen");
    line("split.partially_seen", num(c.split.partially_seen), "published");
    line("split.unseen_rect", "none", "chosen");
    return o.str();
}

Split split_routes(const std::vector<streets::Route>& routes, const streets::StreetGraph& g,
                   const SplitConfig& config, std::uint64_t seed, std::vector<std::string>* warnings) {
    Split s;
    std::vector<std::string> remaining;
    for (const auto& r : routes) {
        std::size_t inside = 0;
        for (streets::NodeId id : r.node_ids) {
            if (config.unseen_rect && config.unseen_rect->contains(geo::unproject(g.node(id).position, g.projection_origin())))
                ++inside;
        }
        if (inside == r.node_ids.size() && !r.node_ids.empty() && config.unseen_rect) {
            s.test_unseen.push_back(r.route_id);
        } else if (inside > 0) {
            s.dev.push_back(r.route_id);
        } else {
            remaining.push_back(r.route_id);
        }
    }
    std::size_t k = config.partially_seen;
    if (k > remaining.size()) {
        if (warnings) {
            warnings->push_back("requested " + std::to_string(k) + " partially seen routes but only " +
                                std::to_string(remaining.size()) + " training routes exist; all moved to test_seen");
        }
        k = remaining.size();
    }
    std::vector<std::size_t> order(remaining.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    CounterRng rng(mix64(seed ^ 0x5917ULL));
    rng.shuffle(order);
    std::vector<bool> seen(remaining.size(), false);
    for (std::size_t i = 0; i < k; ++i) seen[order[i]] = true;
    for (std::size_t i = 0; i < remaining.size(); ++i) (seen[i] ? s.test_seen : s.train).push_back(remaining[i]);
    return s;
}

nlohmann::ordered_json to_json(const Split& s) {
    nlohmann::ordered_json j;
    j["train"] = s.train;
    j["dev"] = s.dev;
    j["test_seen"] = s.test_seen;
    j["test_unseen"] = s.test_unseen;
    return j;
}

}  // namespace map2seq::pipeline
