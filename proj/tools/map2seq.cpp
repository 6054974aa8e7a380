// map2seq command line: one subcommand per pipeline stage, each reading and
// writing the JSON/JSONL artifacts of the previous stages.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "map2seq/errors.hpp"
#include "map2seq/eval/metrics.hpp"
#include "map2seq/jsonl.hpp"
#include "map2seq/model/trainer.hpp"
#include "map2seq/model/vocab.hpp"
#include "map2seq/osm_ingest.hpp"
#include "map2seq/route_graph.hpp"
#include "map2seq/rule_gen.hpp"
#include "map2seq/street_graph.hpp"
#include "map2seq/synth/city.hpp"
#include "pipeline.hpp"

namespace fs = std::filesystem;
using namespace map2seq;

namespace {

enum class Level { kQuiet = 0, kInfo = 1, kDebug = 2 };

Level log_level() {
    const char* v = std::getenv("MAP2SEQ_LOG");
    if (v == nullptr) return Level::kInfo;
    std::string s(v);
    if (s == "quiet" || s == "0") return Level::kQuiet;
    if (s == "debug" || s == "2") return Level::kDebug;
    return Level::kInfo;
}

void log(Level at, const std::string& msg) {
    if (static_cast<int>(log_level()) >= static_cast<int>(at)) std::cerr << "[map2seq] " << msg << '\n';
}

void warn_all(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) log(Level::kInfo, "warning: " + w);
}

fs::path ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
    return fs::path(dir);
}

void require_file(const std::string& path, const std::string& what) {
    if (path.empty()) throw ConfigError("missing --" + what);
    if (!fs::exists(path)) throw IoError(what + " file not found: " + path);
}

std::vector<streets::Route> read_routes(const std::string& path) {
    std::vector<streets::Route> out;
    for (const auto& j : read_jsonl(path)) out.push_back(streets::route_from_json(j));
    return out;
}

std::vector<routegraph::RouteGraph> read_graphs(const std::string& path) {
    std::vector<routegraph::RouteGraph> out;
    for (const auto& j : read_jsonl(path)) out.push_back(routegraph::deserialize(j));
    return out;
}

template <class T>
std::map<std::string, const T*> by_route_id(const std::vector<T>& items) {
    std::map<std::string, const T*> out;
    for (const auto& x : items) out[x.route_id] = &x;
    return out;
}

template <class T>
const T& lookup(const std::map<std::string, const T*>& index, const std::string& id, const std::string& what) {
    auto it = index.find(id);
    if (it == index.end()) throw SchemaError("no " + what + " for route '" + id + "'");
    return *it->second;
}

struct Common {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string out = ".";

    pipeline::PipelineConfig load() const {
        pipeline::PipelineConfig c = config_path.empty() ? pipeline::PipelineConfig{} : pipeline::load_config(config_path);
        if (seed_given) c.seed = seed;
        c.train.seed = c.seed;
        c.validate();
        return c;
    }
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config_path, "Pipeline config JSON");
    sub->add_option_function<std::uint64_t>(
        "--seed",
        [&c](const std::uint64_t& s) {
            c.seed = s;
            c.seed_given = true;
        },
        "Seed overriding the config seed");
    sub->add_option("--out", c.out, "Output directory")->capture_default_str();
}

// ---- stages ---------------------------------------------------------------

void run_synth_city(const Common& common, std::size_t blocks, double poi_probability) {
    auto cfg = common.load();
    synth::CityOptions o;
    o.blocks_x = o.blocks_y = blocks;
    o.poi_probability = poi_probability;
    o.seed = cfg.seed;
    fs::path out = ensure_dir(common.out) / "city.osm";
    write_text(out.string(), synth::to_osm_xml(synth::make_city(o)));
    log(Level::kInfo, "wrote " + out.string());
}

void run_ingest(const Common& common, const std::string& osm_path) {
    require_file(osm_path, "osm");
    osm::MapData map = osm::parse_osm_file(osm_path);
    osm::ValidationReport report = osm::validate(map);
    warn_all(report.dropped_buildings);
    warn_all(report.collapsed_segments);
    warn_all(report.dropped_pois);
    fs::path out = ensure_dir(common.out) / "map.json";
    write_json(out.string(), osm::to_json(map));
    log(Level::kInfo, "ingested " + std::to_string(map.street_polylines.size()) + " streets, " +
                          std::to_string(map.pois.size()) + " POIs, " + std::to_string(map.buildings.size()) +
                          " buildings -> " + out.string());
}

void run_discretize(const Common& common, const std::string& map_path) {
    auto cfg = common.load();
    require_file(map_path, "map");
    auto map = osm::map_from_json(read_json(map_path));
    auto g = streets::discretize(map, cfg.spacing);
    fs::path out = ensure_dir(common.out) / "streets.json";
    write_json(out.string(), streets::to_json(g));
    log(Level::kInfo, "street graph: " + std::to_string(g.size()) + " nodes, " + std::to_string(g.edge_count()) +
                          " edges -> " + out.string());
}

void run_sample_routes(const Common& common, const std::string& map_path, const std::string& streets_path,
                       std::size_t n) {
    auto cfg = common.load();
    require_file(map_path, "map");
    require_file(streets_path, "streets");
    auto map = osm::map_from_json(read_json(map_path));
    auto g = streets::street_graph_from_json(read_json(streets_path));
    auto result = streets::sample_routes(g, map, n > 0 ? n : cfg.routes, cfg.seed, cfg.constraints());
    warn_all(result.warnings);
    std::vector<nlohmann::ordered_json> records;
    for (const auto& r : result.routes) records.push_back(streets::to_json(r));
    fs::path out = ensure_dir(common.out) / "routes.jsonl";
    write_jsonl(out.string(), records);
    log(Level::kInfo, "sampled " + std::to_string(records.size()) + " routes -> " + out.string());
}

void run_build_graphs(const Common& common, const std::string& map_path, const std::string& streets_path,
                      const std::string& routes_path) {
    auto cfg = common.load();
    require_file(map_path, "map");
    require_file(streets_path, "streets");
    require_file(routes_path, "routes");
    auto map = osm::map_from_json(read_json(map_path));
    auto g = streets::street_graph_from_json(read_json(streets_path));
    routegraph::VisibilityIndex index(map);
    routegraph::BuildOptions options;
    options.visibility_radius = cfg.visibility_radius;
    std::vector<routegraph::RouteGraph> graphs;
    std::vector<nlohmann::ordered_json> records;
    for (const auto& r : read_routes(routes_path)) {
        graphs.push_back(routegraph::build_route_graph(r, g, index, options));
        records.push_back(routegraph::serialize(graphs.back()));
    }
    fs::path out = ensure_dir(common.out) / "graphs.jsonl";
    write_jsonl(out.string(), records);
    auto stats = routegraph::graph_stats(graphs);
    std::ostringstream msg;
    msg << "built " << graphs.size() << " graphs (mean " << stats.mean_nodes << " nodes, " << stats.mean_edges_per_node
        << " edges/node, " << stats.distinct_tokens << " node tokens) -> " << out.string();
    log(Level::kInfo, msg.str());
}

void run_rule_gen(const Common& common, const std::string& graphs_path) {
    require_file(graphs_path, "graphs");
    std::vector<InstructionRecord> records;
    for (const auto& g : read_graphs(graphs_path)) records.push_back({g.route_id, rules::rule_based_text(g)});
    fs::path out = ensure_dir(common.out) / "rule_based.jsonl";
    write_instructions(out.string(), records);
    log(Level::kInfo, "wrote " + std::to_string(records.size()) + " rule-based instructions -> " + out.string());
}

void run_pretrain_data(const Common& common, const std::string& graphs_path, std::size_t n) {
    auto cfg = common.load();
    require_file(graphs_path, "graphs");
    auto set = rules::make_pretraining_set(read_graphs(graphs_path), n > 0 ? n : cfg.pretrain_pairs, cfg.seed);
    warn_all(set.warnings);
    fs::path out = ensure_dir(common.out) / "pretrain.jsonl";
    write_instructions(out.string(), set.records);
    log(Level::kInfo, "wrote " + std::to_string(set.records.size()) + " pretraining pairs -> " + out.string());
}

void run_split(const Common& common, const std::string& routes_path, const std::string& streets_path) {
    auto cfg = common.load();
    require_file(routes_path, "routes");
    require_file(streets_path, "streets");
    auto g = streets::street_graph_from_json(read_json(streets_path));
    std::vector<std::string> warnings;
    auto split = pipeline::split_routes(read_routes(routes_path), g, cfg.split, cfg.seed, &warnings);
    warn_all(warnings);
    fs::path out = ensure_dir(common.out) / "split.json";
    write_json(out.string(), pipeline::to_json(split));
    log(Level::kInfo, "split: " + std::to_string(split.train.size()) + " train, " + std::to_string(split.dev.size()) +
                          " dev, " + std::to_string(split.test_seen.size()) + " partially seen, " +
                          std::to_string(split.test_unseen.size()) + " unseen -> " + out.string());
}

struct SourceTable {
    model::Mode mode = model::Mode::kGraph;
    std::map<std::string, const routegraph::RouteGraph*> graphs;
    std::map<std::string, const InstructionRecord*> rules;

    model::SourceInput source(const std::string& route_id) const {
        if (mode == model::Mode::kGraph) return model::graph_source(lookup(graphs, route_id, "route graph"));
        return model::sequence_source(model::tokenize(lookup(rules, route_id, "rule-based source").instruction_text));
    }
};

std::vector<model::Example> examples_for(const std::vector<InstructionRecord>& records, const SourceTable& sources) {
    std::vector<model::Example> out;
    for (const auto& r : records) out.push_back({r.route_id, sources.source(r.route_id), model::tokenize(r.instruction_text)});
    return out;
}

void run_train(const Common& common, const std::string& mode_name, const std::string& graphs_path,
               const std::string& train_path, const std::string& dev_path, const std::string& rules_path,
               const std::string& pretrain_path) {
    auto cfg = common.load();
    if (!mode_name.empty()) cfg.model.mode = model::mode_from_name(mode_name);
    require_file(train_path, "train");
    std::vector<routegraph::RouteGraph> graphs;
    std::vector<InstructionRecord> rule_records;
    SourceTable sources;
    sources.mode = cfg.model.mode;
    if (cfg.model.mode == model::Mode::kGraph) {
        require_file(graphs_path, "graphs");
        graphs = read_graphs(graphs_path);
        sources.graphs = by_route_id(graphs);
    } else {
        require_file(rules_path, "rules");
        rule_records = read_instructions(rules_path);
        sources.rules = by_route_id(rule_records);
    }
    auto train_set = examples_for(read_instructions(train_path), sources);
    std::vector<model::Example> dev_set;
    if (dev_path.empty()) {
        log(Level::kInfo, "no --dev given; early stopping uses the training set");
        dev_set = train_set;
    } else {
        require_file(dev_path, "dev");
        dev_set = examples_for(read_instructions(dev_path), sources);
    }
    std::vector<model::Example> pretrain_set;
    if (!pretrain_path.empty()) {
        require_file(pretrain_path, "pretrain");
        pretrain_set = examples_for(read_instructions(pretrain_path), sources);
    }
    auto vocab_examples = train_set;
    vocab_examples.insert(vocab_examples.end(), pretrain_set.begin(), pretrain_set.end());
    model::Graph2Text<float> m(cfg.model, model::build_vocab(vocab_examples), cfg.seed);
    log(Level::kInfo, "training " + model::mode_name(cfg.model.mode) + " model: " + std::to_string(train_set.size()) +
                          " train / " + std::to_string(dev_set.size()) + " dev examples, vocabulary " +
                          std::to_string(m.vocab().size()));

    fs::path out = ensure_dir(common.out);
    std::vector<nlohmann::ordered_json> log_records;
    std::string phase = "train";
    auto on_epoch = [&](const model::EpochLog& e) {
        auto j = model::to_json(e);
        j["phase"] = phase;
        log_records.push_back(j);
        std::ostringstream msg;
        msg << phase << " epoch " << e.epoch << " loss " << e.loss << " dev token accuracy " << e.token_acc;
        log(Level::kDebug, msg.str());
    };
    nlohmann::json extra;
    if (pretrain_set.empty()) {
        auto r = model::train(m, train_set, dev_set, cfg.train, on_epoch);
        extra = {{"best_epoch", r.best_epoch}, {"best_accuracy", r.best_accuracy}};
    } else {
        phase = "pretrain";
        auto pre = model::train(m, pretrain_set, pretrain_set, cfg.train, on_epoch);
        phase = "finetune";
        model::check_vocab_covers(m.vocab(), train_set);
        auto fine = model::train(m, train_set, dev_set, cfg.train, on_epoch);
        extra = {{"pretrain_best_epoch", pre.best_epoch}, {"best_epoch", fine.best_epoch},
                 {"best_accuracy", fine.best_accuracy}};
    }
    model::save_model(out / "model", m, extra);
    write_jsonl((out / "train_log.jsonl").string(), log_records);
    log(Level::kInfo, "best dev token accuracy " + extra["best_accuracy"].dump() + " at epoch " +
                          extra["best_epoch"].dump() + " -> " + (out / "model").string());
}

void run_generate(const Common& common, const std::string& model_dir, const std::string& graphs_path,
                  const std::string& rules_path, const std::string& ids_path) {
    auto cfg = common.load();
    if (model_dir.empty() || !fs::exists(model_dir)) throw IoError("model directory not found: " + model_dir);
    auto m = model::load_model(model_dir);
    std::vector<routegraph::RouteGraph> graphs;
    std::vector<InstructionRecord> rule_records;
    SourceTable sources;
    sources.mode = m.config().mode;
    std::vector<std::string> ids;
    if (sources.mode == model::Mode::kGraph) {
        require_file(graphs_path, "graphs");
        graphs = read_graphs(graphs_path);
        sources.graphs = by_route_id(graphs);
        for (const auto& g : graphs) ids.push_back(g.route_id);
    } else {
        require_file(rules_path, "rules");
        rule_records = read_instructions(rules_path);
        sources.rules = by_route_id(rule_records);
        for (const auto& r : rule_records) ids.push_back(r.route_id);
    }
    if (!ids_path.empty()) {
        require_file(ids_path, "ids");
        ids.clear();
        for (const auto& r : read_instructions(ids_path)) ids.push_back(r.route_id);
    }
    std::vector<InstructionRecord> out_records;
    for (const auto& id : ids) {
        out_records.push_back({id, model::detokenize(m.generate(sources.source(id), cfg.decode))});
        log(Level::kDebug, id + ": " + out_records.back().instruction_text);
    }
    fs::path out = ensure_dir(common.out) / "generated.jsonl";
    write_instructions(out.string(), out_records);
    log(Level::kInfo, "generated " + std::to_string(out_records.size()) + " instructions -> " + out.string());
}

struct NavInputs {
    std::vector<eval::NavTrace> traces;
    std::vector<streets::Route> routes;
    streets::StreetGraph street_graph;
};

std::optional<NavInputs> read_nav(const std::string& traces_path, const std::string& routes_path,
                                  const std::string& streets_path) {
    if (traces_path.empty()) return std::nullopt;
    require_file(traces_path, "traces");
    require_file(routes_path, "routes");
    require_file(streets_path, "streets");
    NavInputs nav;
    nav.traces = eval::read_traces(traces_path);
    nav.street_graph = streets::street_graph_from_json(read_json(streets_path));
    auto all_routes = read_routes(routes_path);
    auto index = by_route_id(all_routes);
    for (const auto& t : nav.traces) {
        auto problems = eval::check_trace(t, nav.street_graph);
        if (!problems.empty()) throw SchemaError("trace for '" + t.route_id + "': " + problems.front());
        nav.routes.push_back(lookup(index, t.route_id, "route"));
    }
    return nav;
}

void run_evaluate(const Common& common, const std::string& hyp_path, const std::string& ref_path,
                  const std::string& graphs_path, const std::string& traces_path, const std::string& routes_path,
                  const std::string& streets_path, bool csv) {
    require_file(hyp_path, "hyp");
    auto hyps = read_instructions(hyp_path);
    eval::EvalInput in;
    std::vector<InstructionRecord> refs;
    std::map<std::string, const InstructionRecord*> ref_index;
    if (!ref_path.empty()) {
        require_file(ref_path, "ref");
        refs = read_instructions(ref_path);
        ref_index = by_route_id(refs);
    }
    std::vector<routegraph::RouteGraph> graphs;
    std::map<std::string, const routegraph::RouteGraph*> graph_index;
    if (!graphs_path.empty()) {
        require_file(graphs_path, "graphs");
        graphs = read_graphs(graphs_path);
        graph_index = by_route_id(graphs);
    }
    for (const auto& h : hyps) {
        in.hypotheses.push_back(h.instruction_text);
        if (!ref_path.empty()) in.references.push_back(lookup(ref_index, h.route_id, "reference").instruction_text);
        if (!graphs_path.empty()) in.graphs.push_back(lookup(graph_index, h.route_id, "route graph"));
    }
    auto nav = read_nav(traces_path, routes_path, streets_path);
    if (nav) {
        in.traces = nav->traces;
        in.routes = nav->routes;
        in.street_graph = &nav->street_graph;
    }
    auto result = eval::evaluate(in);
    if (graphs_path.empty()) {
        for (std::size_t i = 0; i < hyps.size(); ++i) result.per_instance[i].route_id = hyps[i].route_id;
    }
    fs::path out = ensure_dir(common.out);
    write_json((out / "metrics.json").string(), eval::to_json(result));
    if (csv) write_text((out / "metrics.csv").string(), eval::to_csv(result));
    std::ostringstream msg;
    msg << "BLEU " << result.bleu << ", length " << result.length << ", landmarks " << result.landmarks;
    if (result.success_rate) msg << ", SR " << *result.success_rate << ", SDTW " << *result.sdtw << ", SNT " << *result.snt;
    log(Level::kInfo, msg.str() + " -> " + (out / "metrics.json").string());
}

void run_analyze(const Common& common, const std::string& instructions_path, const std::string& graphs_path,
                 const std::string& traces_path, const std::string& routes_path, const std::string& streets_path) {
    nlohmann::ordered_json result;
    if (!instructions_path.empty()) {
        require_file(instructions_path, "instructions");
        require_file(graphs_path, "graphs");
        auto records = read_instructions(instructions_path);
        auto graphs = read_graphs(graphs_path);
        auto index = by_route_id(graphs);
        std::vector<std::string> texts;
        std::vector<routegraph::RouteGraph> aligned;
        for (const auto& r : records) {
            texts.push_back(r.instruction_text);
            aligned.push_back(lookup(index, r.route_id, "route graph"));
        }
        auto rows = nlohmann::ordered_json::array();
        for (const auto& s : eval::landmark_type_scores(texts, aligned)) {
            rows.push_back({{"tag", s.tag}, {"score", s.score}, {"mentioned", s.mentioned}, {"present", s.present}});
        }
        result["landmark_types"] = std::move(rows);
    }
    if (auto nav = read_nav(traces_path, routes_path, streets_path)) {
        auto rows = nlohmann::ordered_json::array();
        for (const auto& b : eval::success_by_complexity(nav->traces, nav->routes, nav->street_graph)) {
            rows.push_back({{"property", b.property}, {"value", b.value}, {"runs", b.runs}, {"successes", b.successes},
                            {"rate", b.rate}});
        }
        result["success_by_complexity"] = std::move(rows);
    }
    if (result.empty()) throw ConfigError("analyze needs --instructions with --graphs, or --traces with --routes and --streets");
    fs::path out = ensure_dir(common.out) / "analysis.json";
    write_json(out.string(), result);
    log(Level::kInfo, "wrote " + out.string());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"map2seq: navigation instructions from map routes"};
    app.require_subcommand(1);
    app.footer("\n" + pipeline::defaults_help() + "\nLog verbosity: MAP2SEQ_LOG=quiet|info|debug (default info).");

    Common common;
    std::string osm, map, streets_path, routes, graphs, train, dev, rules, pretrain, mode, model_dir, ids, hyp, ref,
        traces, instructions;
    std::size_t n = 0, blocks = 6;
    double poi_probability = 0.45;
    bool csv = false;

    auto* synth = app.add_subcommand("synth-city", "Write a synthetic grid city as OSM XML (city.osm)");
    add_common(synth, common);
    synth->add_option("--blocks", blocks, "Blocks per side")->capture_default_str();
    synth->add_option("--poi-probability", poi_probability, "POI probability per storefront slot")->capture_default_str();

    auto* ingest = app.add_subcommand("ingest", "Parse and validate OSM XML (map.json)");
    add_common(ingest, common);
    ingest->add_option("--osm", osm, "OSM XML file")->required();

    auto* disc = app.add_subcommand("discretize", "Resample streets into a segment graph (streets.json)");
    add_common(disc, common);
    disc->add_option("--map", map, "map.json")->required();

    auto* sample = app.add_subcommand("sample-routes", "Sample constrained routes (routes.jsonl)");
    add_common(sample, common);
    sample->add_option("--map", map, "map.json")->required();
    sample->add_option("--streets", streets_path, "streets.json")->required();
    sample->add_option("-n,--count", n, "Number of routes (default: config routes)");

    auto* build = app.add_subcommand("build-graphs", "Build route graphs (graphs.jsonl)");
    add_common(build, common);
    build->add_option("--map", map, "map.json")->required();
    build->add_option("--streets", streets_path, "streets.json")->required();
    build->add_option("--routes", routes, "routes.jsonl")->required();

    auto* rulegen = app.add_subcommand("rule-gen", "Rule-based instructions (rule_based.jsonl)");
    add_common(rulegen, common);
    rulegen->add_option("--graphs", graphs, "graphs.jsonl")->required();

    auto* pre = app.add_subcommand("pretrain-data", "Rule-based pretraining pairs (pretrain.jsonl)");
    add_common(pre, common);
    pre->add_option("--graphs", graphs, "graphs.jsonl")->required();
    pre->add_option("-n,--count", n, "Number of pairs (default: config pretrain_pairs)");

    auto* split = app.add_subcommand("split", "Partition routes into train/dev/test sets (split.json)");
    add_common(split, common);
    split->add_option("--routes", routes, "routes.jsonl")->required();
    split->add_option("--streets", streets_path, "streets.json")->required();

    auto* trn = app.add_subcommand("train", "Train a model (model/, train_log.jsonl)");
    add_common(trn, common);
    trn->add_option("--mode", mode, "graph or seq2seq (default: config model.mode)");
    trn->add_option("--graphs", graphs, "graphs.jsonl (graph mode)");
    trn->add_option("--rules", rules, "rule_based.jsonl used as sources (seq2seq mode)");
    trn->add_option("--train", train, "Training instructions JSONL")->required();
    trn->add_option("--dev", dev, "Dev instructions JSONL for early stopping");
    trn->add_option("--pretrain", pretrain, "Rule-based pairs to pretrain on before fine-tuning");

    auto* gen = app.add_subcommand("generate", "Generate instructions (generated.jsonl)");
    add_common(gen, common);
    gen->add_option("--model", model_dir, "Model directory")->required();
    gen->add_option("--graphs", graphs, "graphs.jsonl (graph mode)");
    gen->add_option("--rules", rules, "rule_based.jsonl (seq2seq mode)");
    gen->add_option("--ids", ids, "Instructions JSONL whose route ids select the inputs");

    auto* evaluate = app.add_subcommand("evaluate", "Score instructions and navigation traces (metrics.json)");
    add_common(evaluate, common);
    evaluate->add_option("--hyp", hyp, "Instructions to score")->required();
    evaluate->add_option("--ref", ref, "Reference instructions (BLEU)");
    evaluate->add_option("--graphs", graphs, "graphs.jsonl (landmarks)");
    evaluate->add_option("--traces", traces, "Navigation trace JSONL");
    evaluate->add_option("--routes", routes, "routes.jsonl for the traces");
    evaluate->add_option("--streets", streets_path, "streets.json for the traces");
    evaluate->add_flag("--csv", csv, "Also write the per-instance table as metrics.csv");

    auto* analyze = app.add_subcommand("analyze", "Landmark type scores and success by route complexity (analysis.json)");
    add_common(analyze, common);
    analyze->add_option("--instructions", instructions, "Instructions JSONL");
    analyze->add_option("--graphs", graphs, "graphs.jsonl");
    analyze->add_option("--traces", traces, "Navigation trace JSONL");
    analyze->add_option("--routes", routes, "routes.jsonl for the traces");
    analyze->add_option("--streets", streets_path, "streets.json for the traces");

    CLI11_PARSE(app, argc, argv);

    std::string name = app.get_subcommands().front()->get_name();
    try {
        if (name == "synth-city") run_synth_city(common, blocks, poi_probability);
        else if (name == "ingest") run_ingest(common, osm);
        else if (name == "discretize") run_discretize(common, map);
        else if (name == "sample-routes") run_sample_routes(common, map, streets_path, n);
        else if (name == "build-graphs") run_build_graphs(common, map, streets_path, routes);
        else if (name == "rule-gen") run_rule_gen(common, graphs);
        else if (name == "pretrain-data") run_pretrain_data(common, graphs, n);
        else if (name == "split") run_split(common, routes, streets_path);
        else if (name == "train") run_train(common, mode, graphs, train, dev, rules, pretrain);
        else if (name == "generate") run_generate(common, model_dir, graphs, rules, ids);
        else if (name == "evaluate") run_evaluate(common, hyp, ref, graphs, traces, routes, streets_path, csv);
        else if (name == "analyze") run_analyze(common, instructions, graphs, traces, routes, streets_path);
    } catch (const Error& e) {
        nlohmann::ordered_json record{{"error", e.kind()}, {"message", e.what()}, {"subcommand", name}};
        std::cerr << record.dump() << '\n';
        return 2;
    } catch (const std::exception& e) {
        nlohmann::ordered_json record{{"error", "internal"}, {"message", e.what()}, {"subcommand", name}};
        std::cerr << record.dump() << '\n';
        return 3;
    }
    return 0;
}
