#include "map2seq/model/graph2text.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "map2seq/errors.hpp"
#include "map2seq/rng.hpp"
#include "map2seq/tensor/checkpoint.hpp"

namespace map2seq::model {

namespace tt = map2seq::tensor;
using routegraph::kRelationCount;
using routegraph::kUnlabeled;

SourceInput graph_source(const routegraph::RouteGraph& g) {
    SourceInput s;
    for (const auto& n : g.nodes) {
        s.types.push_back(n.type);
        s.tokens.push_back(n.token);
    }
    s.edges = g.edges;
    return s;
}

SourceInput sequence_source(const std::vector<std::string>& words) {
    SourceInput s;
    s.tokens = words;
    return s;
}

Vocab build_vocab(const std::vector<Example>& examples) {
    std::set<std::string> words;
    for (const auto& ex : examples) {
        words.insert(ex.source.tokens.begin(), ex.source.tokens.end());
        words.insert(ex.target.begin(), ex.target.end());
    }
    Vocab v;
    for (const auto& w : words) v.add(w);
    return v;
}

std::vector<std::string> missing_tokens(const Vocab& vocab, const std::vector<Example>& examples) {
    std::set<std::string> missing;
    for (const auto& ex : examples) {
        for (const auto& w : ex.source.tokens)
            if (!vocab.contains(w)) missing.insert(w);
        for (const auto& w : ex.target)
            if (!vocab.contains(w)) missing.insert(w);
    }
    return {missing.begin(), missing.end()};
}

template <typename T>
tt::Tensor<T> positional_encoding(std::size_t rows, std::size_t d) {
    std::vector<T> pe(rows * d);
    for (std::size_t pos = 0; pos < rows; ++pos) {
        for (std::size_t i = 0; i < d; i += 2) {
            const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d));
            pe[pos * d + i] = static_cast<T>(std::sin(static_cast<double>(pos) * freq));
            if (i + 1 < d) pe[pos * d + i + 1] = static_cast<T>(std::cos(static_cast<double>(pos) * freq));
        }
    }
    return tt::Tensor<T>::from(rows, d, std::move(pe));
}

// Hands out a distinct dropout stream per call site within one pass.
template <typename T>
struct Graph2Text<T>::DropoutSites {
    std::uint64_t next = 0;
};

template <typename T>
Graph2Text<T>::Graph2Text(ModelConfig config, Vocab vocab, std::uint64_t seed)
    : config_(config), vocab_(std::move(vocab)), params_(seed) {
    config_.validate();
    const std::size_t d = config_.d_model;
    params_.add("tok_emb", vocab_.size(), d, tt::Init::kEmbedding);
    for (std::size_t l = 0; l < config_.layers; ++l) {
        const std::string p = "enc.l" + std::to_string(l) + ".";
        if (config_.mode == Mode::kGraph) {
            params_.add(p + "wv", d, d, tt::Init::kFanIn);
            params_.add(p + "wu", d, d * kRelationCount, tt::Init::kFanIn);
            params_.add(p + "att_dst", d, config_.heads, tt::Init::kFanIn);
            params_.add(p + "att_src", d, config_.heads, tt::Init::kFanIn);
        } else {
            add_attention_params(p + "self.");
        }
        add_norm_params(p + "ln1");
        add_ffn_params(p + "ff.");
        add_norm_params(p + "ln2");
    }
    if (config_.mode == Mode::kGraph) {
        params_.add("enc.type_emb", routegraph::kNodeTypeCount, d, tt::Init::kEmbedding);
        params_.add("enc.fuse", 2 * d, d, tt::Init::kFanIn);
    }
    for (std::size_t l = 0; l < config_.layers; ++l) {
        const std::string p = "dec.l" + std::to_string(l) + ".";
        add_attention_params(p + "self.");
        add_norm_params(p + "ln1");
        add_attention_params(p + "cross.");
        add_norm_params(p + "ln2");
        add_ffn_params(p + "ff.");
        add_norm_params(p + "ln3");
    }
    params_.add("dec.gate.w", 3 * d, 1, tt::Init::kFanIn);
    params_.add("dec.gate.b", 1, 1, tt::Init::kZeros);

    const std::size_t dh = d / config_.heads;
    std::vector<T> mask(d * config_.heads, T(0));
    for (std::size_t r = 0; r < d; ++r) mask[r * config_.heads + r / dh] = T(1);
    head_mask_ = Tensor::from(d, config_.heads, std::move(mask));
}

template <typename T>
void Graph2Text<T>::add_attention_params(const std::string& prefix) {
    const std::size_t d = config_.d_model;
    for (const char* w : {"wq", "wk", "wv", "wo"}) params_.add(prefix + w, d, d, tt::Init::kFanIn);
}

template <typename T>
void Graph2Text<T>::add_ffn_params(const std::string& prefix) {
    params_.add(prefix + "w1", config_.d_model, config_.d_ff, tt::Init::kFanIn);
    params_.add(prefix + "b1", 1, config_.d_ff, tt::Init::kZeros);
    params_.add(prefix + "w2", config_.d_ff, config_.d_model, tt::Init::kFanIn);
    params_.add(prefix + "b2", 1, config_.d_model, tt::Init::kZeros);
}

template <typename T>
void Graph2Text<T>::add_norm_params(const std::string& name) {
    params_.add(name + ".g", 1, config_.d_model, tt::Init::kOnes);
    params_.add(name + ".b", 1, config_.d_model, tt::Init::kZeros);
}

template <typename T>
Prepared Graph2Text<T>::prepare(const SourceInput& source, const std::vector<std::string>* target) const {
    if (source.tokens.empty()) throw DegenerateInputError("empty source");
    const bool graph = config_.mode == Mode::kGraph;
    if (graph && source.types.size() != source.tokens.size())
        throw ShapeError("graph source needs one type per node (" + std::to_string(source.types.size()) + " types, " +
                         std::to_string(source.tokens.size()) + " tokens)");
    if (!graph && (!source.types.empty() || !source.edges.empty()))
        throw ShapeError("sequence model given a graph source");

    Prepared p;
    const std::size_t n = source.tokens.size();
    std::map<std::string, std::size_t> oov_index;
    for (std::size_t i = 0; i < n; ++i) {
        const std::string& w = source.tokens[i];
        p.token_ids.push_back(vocab_.id(w));
        if (vocab_.contains(w)) {
            p.source_ext.push_back(vocab_.id(w));
        } else {
            auto [it, inserted] = oov_index.emplace(w, p.oov.size());
            if (inserted) p.oov.push_back(w);
            p.source_ext.push_back(vocab_.size() + it->second);
        }
        if (graph) p.types.push_back(static_cast<std::size_t>(source.types[i]));
    }
    if (graph) {
        std::vector<bool> has_in(n, false);
        for (const auto& e : source.edges) {
            if (e.src < 0 || e.dst < 0 || static_cast<std::size_t>(e.src) >= n || static_cast<std::size_t>(e.dst) >= n)
                throw ShapeError("edge (" + std::to_string(e.src) + ", " + std::to_string(e.dst) +
                                 ") outside a graph of " + std::to_string(n) + " nodes");
            if (e.label < 0 || e.label >= kRelationCount)
                throw ShapeError("edge label " + std::to_string(e.label) + " out of range");
            p.edge_src.push_back(static_cast<std::size_t>(e.src));
            p.edge_dst.push_back(static_cast<std::size_t>(e.dst));
            p.edge_rel.push_back(static_cast<std::size_t>(e.label));
            has_in[static_cast<std::size_t>(e.dst)] = true;
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (has_in[i]) continue;
            p.edge_src.push_back(i);
            p.edge_dst.push_back(i);
            p.edge_rel.push_back(kUnlabeled);
        }
    }
    if (target) {
        p.decoder_input.push_back(Vocab::kBos);
        for (const auto& w : *target) {
            p.decoder_input.push_back(vocab_.id(w));
            if (vocab_.contains(w)) {
                p.target_ext.push_back(vocab_.id(w));
            } else {
                auto it = oov_index.find(w);
                p.target_ext.push_back(it == oov_index.end() ? Vocab::kUnk : vocab_.size() + it->second);
            }
        }
        p.target_ext.push_back(Vocab::kEos);
    }
    return p;
}

template <typename T>
typename Graph2Text<T>::Tensor Graph2Text<T>::dropout(const Tensor& x, const RunOptions& run,
                                                      DropoutSites& sites) const {
    const std::uint64_t site = sites.next++;
    if (!run.training || config_.dropout == 0.0) return x;
    return tt::dropout(x, config_.dropout, counter_hash(run.dropout_seed, site), true);
}

template <typename T>
typename Graph2Text<T>::Tensor Graph2Text<T>::norm(const std::string& name, const Tensor& x) const {
    return tt::layer_norm(x, params_.get(name + ".g"), params_.get(name + ".b"));
}

template <typename T>
typename Graph2Text<T>::Tensor Graph2Text<T>::feed_forward(const std::string& prefix, const Tensor& x) const {
    Tensor h = tt::relu(tt::add_row(tt::matmul(x, params_.get(prefix + "w1")), params_.get(prefix + "b1")));
    return tt::add_row(tt::matmul(h, params_.get(prefix + "w2")), params_.get(prefix + "b2"));
}

template <typename T>
typename Graph2Text<T>::Tensor Graph2Text<T>::attention(const std::string& prefix, const Tensor& queries,
                                                        const Tensor& keys, const tt::Mask* mask,
                                                        Tensor* mean_weights) const {
    const std::size_t h = config_.heads, dh = config_.d_model / h;
    const std::size_t tq = queries.rows(), tk = keys.rows();
    Tensor q = tt::matmul(queries, params_.get(prefix + "wq"));
    Tensor k = tt::matmul(keys, params_.get(prefix + "wk"));
    Tensor v = tt::matmul(keys, params_.get(prefix + "wv"));
    const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dh));
    std::vector<Tensor> heads;
    Tensor weight_sum;
    for (std::size_t i = 0; i < h; ++i) {
        Tensor qi = tt::slice(q, 0, tq, i * dh, dh);
        Tensor ki = tt::slice(k, 0, tk, i * dh, dh);
        Tensor vi = tt::slice(v, 0, tk, i * dh, dh);
        Tensor w = tt::softmax_rows(tt::scale(tt::matmul_nt(qi, ki), inv_sqrt), mask);
        if (mean_weights) weight_sum = weight_sum.defined() ? tt::add(weight_sum, w) : w;
        heads.push_back(tt::matmul(w, vi));
    }
    if (mean_weights) *mean_weights = tt::scale(weight_sum, T(1) / static_cast<T>(h));
    return tt::matmul(h == 1 ? heads[0] : tt::concat_cols(heads), params_.get(prefix + "wo"));
}

template <typename T>
typename Graph2Text<T>::Tensor Graph2Text<T>::graph_encode(const Prepared& p, const RunOptions& run,
                                                           EncoderTrace* trace) const {
    DropoutSites sites{1000};
    const std::size_t n = p.source_size(), d = config_.d_model, h = config_.heads, dh = d / h;
    const std::size_t e = p.edge_src.size();
    Tensor tok = token_embedding();
    Tensor x = tt::relu(tt::matmul(
        tt::concat_cols(std::vector<Tensor>{tt::embedding(params_.get("enc.type_emb"), p.types),
                                            tt::embedding(tok, p.token_ids)}),
        params_.get("enc.fuse")));
    x = dropout(x, run, sites);
    if (trace) trace->alpha.assign(config_.layers, {});
    const T slope = static_cast<T>(config_.leaky_slope);
    for (std::size_t l = 0; l < config_.layers; ++l) {
        const std::string pre = "enc.l" + std::to_string(l) + ".";
        Tensor xv = tt::matmul(x, params_.get(pre + "wv"));
        Tensor xu = tt::matmul(x, params_.get(pre + "wu"));
        // Message W^U_r x_j for every edge, and W^V x_i of its destination.
        Tensor msg = tt::gather_blocks(xu, p.edge_src, p.edge_rel, d);
        Tensor dst = tt::gather_rows(xv, p.edge_dst);
        Tensor a_dst = tt::mul(params_.get(pre + "att_dst"), head_mask_);
        Tensor a_src = tt::mul(params_.get(pre + "att_src"), head_mask_);
        Tensor scores = tt::leaky_relu(tt::add(tt::matmul(dst, a_dst), tt::matmul(msg, a_src)), slope);
        std::vector<Tensor> heads;
        for (std::size_t i = 0; i < h; ++i) {
            Tensor alpha = tt::segment_softmax(tt::slice(scores, 0, e, i, 1), p.edge_dst, n);
            if (trace) trace->alpha[l].emplace_back(alpha.data().begin(), alpha.data().end());
            Tensor weighted = tt::mul_col(tt::slice(msg, 0, e, i * dh, dh), alpha);
            heads.push_back(tt::scatter_add_rows(weighted, p.edge_dst, n));
        }
        Tensor agg = h == 1 ? heads[0] : tt::concat_cols(heads);
        x = norm(pre + "ln1", tt::add(x, dropout(agg, run, sites)));
        x = norm(pre + "ln2", tt::add(x, dropout(feed_forward(pre + "ff.", x), run, sites)));
    }
    return x;
}

template <typename T>
typename Graph2Text<T>::Tensor Graph2Text<T>::sequence_encode(const Prepared& p, const RunOptions& run) const {
    DropoutSites sites{1000};
    const std::size_t n = p.source_size(), d = config_.d_model;
    Tensor x = tt::add(tt::scale(tt::embedding(token_embedding(), p.token_ids), std::sqrt(static_cast<T>(d))),
                       positional_encoding<T>(n, d));
    x = dropout(x, run, sites);
    for (std::size_t l = 0; l < config_.layers; ++l) {
        const std::string pre = "enc.l" + std::to_string(l) + ".";
        x = norm(pre + "ln1", tt::add(x, dropout(attention(pre + "self.", x, x, nullptr, nullptr), run, sites)));
        x = norm(pre + "ln2", tt::add(x, dropout(feed_forward(pre + "ff.", x), run, sites)));
    }
    return x;
}

template <typename T>
typename Graph2Text<T>::Tensor Graph2Text<T>::encode(const Prepared& p, const RunOptions& run,
                                                     EncoderTrace* trace) const {
    return config_.mode == Mode::kGraph ? graph_encode(p, run, trace) : sequence_encode(p, run);
}

template <typename T>
typename Graph2Text<T>::Tensor Graph2Text<T>::decode(const Prepared& p, const Tensor& memory,
                                                     const std::vector<std::size_t>& input, const RunOptions& run,
                                                     DecoderTrace* trace) const {
    if (input.empty()) throw ShapeError("decode needs at least the start token");
    DropoutSites sites{2000};
    const std::size_t t = input.size(), d = config_.d_model, n = memory.rows();
    const std::size_t v = vocab_.size(), v_ext = v + p.oov.size();
    std::vector<std::size_t> in_ids(input);
    for (auto& id : in_ids)
        if (id >= v) id = Vocab::kUnk;

    Tensor tok = token_embedding();
    Tensor prev = tt::embedding(tok, in_ids);
    Tensor y = tt::add(tt::scale(prev, std::sqrt(static_cast<T>(d))), positional_encoding<T>(t, d));
    y = dropout(y, run, sites);

    tt::Mask causal(t * t, 0);
    for (std::size_t i = 0; i < t; ++i)
        for (std::size_t j = 0; j <= i; ++j) causal[i * t + j] = 1;

    Tensor copy_attn;
    for (std::size_t l = 0; l < config_.layers; ++l) {
        const std::string pre = "dec.l" + std::to_string(l) + ".";
        const bool last = l + 1 == config_.layers;
        y = norm(pre + "ln1", tt::add(y, dropout(attention(pre + "self.", y, y, &causal, nullptr), run, sites)));
        Tensor cross = attention(pre + "cross.", y, memory, nullptr, last ? &copy_attn : nullptr);
        y = norm(pre + "ln2", tt::add(y, dropout(cross, run, sites)));
        y = norm(pre + "ln3", tt::add(y, dropout(feed_forward(pre + "ff.", y), run, sites)));
    }

    Tensor p_vocab = tt::softmax_rows(tt::matmul_nt(y, tok));
    if (v_ext > v) p_vocab = tt::concat_cols(std::vector<Tensor>{p_vocab, Tensor::zeros(t, v_ext - v)});

    Tensor gate;
    if (run.force_p_gen) {
        gate = Tensor::full(t, 1, static_cast<T>(*run.force_p_gen));
    } else {
        Tensor context = tt::matmul(copy_attn, memory);
        gate = tt::sigmoid(tt::add_row(tt::matmul(tt::concat_cols(std::vector<Tensor>{context, y, prev}),
                                                  params_.get("dec.gate.w")),
                                       params_.get("dec.gate.b")));
    }

    // Source position -> extended-vocabulary one-hot; nodes sharing a token
    // pool their attention.
    std::vector<T> onehot(n * v_ext, T(0));
    for (std::size_t i = 0; i < n; ++i) onehot[i * v_ext + p.source_ext[i]] = T(1);
    Tensor p_copy = tt::matmul(copy_attn, Tensor::from(n, v_ext, std::move(onehot)));

    Tensor out = tt::add(tt::mul_col(p_vocab, gate), tt::mul_col(p_copy, tt::affine(gate, T(-1), T(1))));
    if (trace) {
        trace->p_gen.assign(gate.data().begin(), gate.data().end());
        trace->copy_attention.assign(copy_attn.data().begin(), copy_attn.data().end());
    }
    return out;
}

template <typename T>
typename Graph2Text<T>::Tensor Graph2Text<T>::loss(const Prepared& p, const RunOptions& run) const {
    if (p.target_ext.empty()) throw ShapeError("loss needs a prepared target");
    Tensor memory = encode(p, run);
    Tensor probs = decode(p, memory, p.decoder_input, run);
    Tensor picked = tt::pick(probs, p.target_ext);
    return tt::scale(tt::mean_all(tt::log(tt::affine(picked, T(1), T(1e-12)))), T(-1));
}

template <typename T>
TokenCount Graph2Text<T>::token_accuracy(const Prepared& p) const {
    tt::NoGradGuard guard;
    Tensor memory = encode(p);
    Tensor probs = decode(p, memory, p.decoder_input);
    TokenCount count;
    const std::size_t cols = probs.cols();
    for (std::size_t i = 0; i < p.target_ext.size(); ++i) {
        auto row = probs.data().subspan(i * cols, cols);
        const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
        count.correct += best == p.target_ext[i];
        ++count.total;
    }
    return count;
}

template <typename T>
std::vector<std::string> Graph2Text<T>::generate(const SourceInput& source, const DecodeConfig& dc) const {
    if (dc.beam == 0) throw ConfigError("beam size must be at least 1");
    tt::NoGradGuard guard;
    const Prepared p = prepare(source);
    const Tensor memory = encode(p);
    const std::size_t v = vocab_.size();

    struct Hyp {
        std::vector<std::size_t> ids;  // extended ids, without <s>
        double logp = 0;
    };
    auto normalized = [](const Hyp& h, std::size_t len) { return h.logp / static_cast<double>(len); };

    std::vector<Hyp> live{Hyp{}};
    std::vector<std::pair<double, Hyp>> finished;
    for (std::size_t step = 0; step < dc.max_len && !live.empty(); ++step) {
        std::vector<Hyp> candidates;
        for (const Hyp& h : live) {
            std::vector<std::size_t> input{Vocab::kBos};
            input.insert(input.end(), h.ids.begin(), h.ids.end());
            Tensor probs = decode(p, memory, input);
            auto row = probs.data().subspan((input.size() - 1) * probs.cols(), probs.cols());
            std::vector<std::size_t> order(row.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            const std::size_t k = std::min(dc.beam, order.size());
            std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                              [&](std::size_t a, std::size_t b) { return row[a] > row[b] || (row[a] == row[b] && a < b); });
            for (std::size_t c = 0; c < k; ++c) {
                Hyp next = h;
                next.ids.push_back(order[c]);
                next.logp += std::log(std::max(static_cast<double>(row[order[c]]), 1e-30));
                candidates.push_back(std::move(next));
            }
        }
        std::stable_sort(candidates.begin(), candidates.end(),
                         [](const Hyp& a, const Hyp& b) { return a.logp > b.logp; });
        // The best `beam` extensions survive; those ending in </s> retire.
        live.clear();
        for (std::size_t c = 0; c < std::min(dc.beam, candidates.size()); ++c) {
            if (candidates[c].ids.back() == Vocab::kEos)
                finished.emplace_back(normalized(candidates[c], candidates[c].ids.size()), candidates[c]);
            else
                live.push_back(std::move(candidates[c]));
        }
        if (finished.size() >= dc.beam) break;
    }
    const Hyp* best = nullptr;
    double best_score = -std::numeric_limits<double>::infinity();
    for (const auto& [score, h] : finished)
        if (score > best_score) best_score = score, best = &h;
    if (!best)
        for (const Hyp& h : live)
            if (normalized(h, h.ids.size()) > best_score) best_score = normalized(h, h.ids.size()), best = &h;

    std::vector<std::string> words;
    if (!best) return words;
    for (std::size_t id : best->ids) {
        if (id == Vocab::kEos) break;
        words.push_back(id < v ? vocab_.word(id) : p.oov[id - v]);
    }
    return words;
}

void save_model(const std::filesystem::path& dir, const Graph2Text<float>& model, const nlohmann::json& extra) {
    nlohmann::json meta = {{"config", to_json(model.config())}, {"vocab", model.vocab().to_json()},
                           {"seed", model.params().seed()}};
    if (!extra.is_null()) meta["extra"] = extra;
    tt::save_checkpoint(dir, model.params(), meta);
}

Graph2Text<float> load_model(const std::filesystem::path& dir) {
    const nlohmann::json meta = tt::read_checkpoint_meta(dir);
    if (!meta.contains("config") || !meta.contains("vocab"))
        throw SchemaError(dir.string() + ": checkpoint lacks model config or vocabulary");
    Graph2Text<float> model(model_config_from_json(meta["config"]), Vocab::from_json(meta["vocab"]),
                            meta.value("seed", std::uint64_t{0}));
    tt::load_checkpoint(dir, model.params());
    return model;
}

template class Graph2Text<float>;
template class Graph2Text<double>;
template tt::Tensor<float> positional_encoding<float>(std::size_t, std::size_t);
template tt::Tensor<double> positional_encoding<double>(std::size_t, std::size_t);

}  // namespace map2seq::model
