#pragma once

// Graph-attention encoder plus Transformer decoder with a copy gate. The
// same class runs the sequence baseline, where a Transformer encoder over
// rule tokens replaces the graph encoder.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "map2seq/model/config.hpp"
#include "map2seq/model/vocab.hpp"
#include "map2seq/route_graph.hpp"
#include "map2seq/tensor/params.hpp"
#include "map2seq/tensor/tensor.hpp"

namespace map2seq::model {

struct SourceInput {
    std::vector<routegraph::NodeType> types;  // graph mode only
    std::vector<std::string> tokens;
    std::vector<routegraph::GraphEdge> edges;  // graph mode only
};

SourceInput graph_source(const routegraph::RouteGraph& g);
SourceInput sequence_source(const std::vector<std::string>& words);

struct Example {
    std::string id;
    SourceInput source;
    std::vector<std::string> target;
};

// Every source and target token of `examples`, sorted, after the specials.
Vocab build_vocab(const std::vector<Example>& examples);

// Tokens of `examples` missing from `vocab`, sorted and unique.
std::vector<std::string> missing_tokens(const Vocab& vocab, const std::vector<Example>& examples);

// Vocabulary-mapped model input. Source tokens outside the vocabulary get
// extended ids V, V+1, ... so they can still be copied.
struct Prepared {
    std::vector<std::size_t> types;
    std::vector<std::size_t> token_ids;
    std::vector<std::size_t> edge_src, edge_dst, edge_rel;  // includes implicit self-loops
    std::vector<std::size_t> source_ext;
    std::vector<std::string> oov;
    std::vector<std::size_t> decoder_input;  // <s> + target
    std::vector<std::size_t> target_ext;     // target + </s>

    std::size_t source_size() const { return token_ids.size(); }
};

struct RunOptions {
    bool training = false;
    std::uint64_t dropout_seed = 0;
    std::optional<double> force_p_gen;  // overrides the learned gate
};

// Attention weights of every encoder layer and head, aligned with the
// Prepared edge lists (graph mode).
struct EncoderTrace {
    std::vector<std::vector<std::vector<double>>> alpha;  // [layer][head][edge]
};

struct DecoderTrace {
    std::vector<double> p_gen;           // per output position
    std::vector<double> copy_attention;  // positions x source, row-major
};

struct TokenCount {
    std::size_t correct = 0;
    std::size_t total = 0;
    double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
    TokenCount& operator+=(const TokenCount& o) {
        correct += o.correct;
        total += o.total;
        return *this;
    }
};

template <typename T>
class Graph2Text {
public:
    using Tensor = tensor::Tensor<T>;

    Graph2Text(ModelConfig config, Vocab vocab, std::uint64_t seed);

    const ModelConfig& config() const { return config_; }
    const Vocab& vocab() const { return vocab_; }
    tensor::ParameterStore<T>& params() { return params_; }
    const tensor::ParameterStore<T>& params() const { return params_; }
    // Shared node-token / output-token embedding.
    Tensor token_embedding() const { return params_.get("tok_emb"); }

    // Throws DegenerateInputError on an empty source and ShapeError on an
    // input that does not fit the model mode.
    Prepared prepare(const SourceInput& source, const std::vector<std::string>* target = nullptr) const;

    Tensor encode(const Prepared& p, const RunOptions& run = {}, EncoderTrace* trace = nullptr) const;
    // Mixed copy/generate distribution for each decoder input position,
    // (|input| x (V + |oov|)).
    Tensor decode(const Prepared& p, const Tensor& memory, const std::vector<std::size_t>& input,
                  const RunOptions& run = {}, DecoderTrace* trace = nullptr) const;

    // Teacher-forced negative log-likelihood, mean over target positions.
    Tensor loss(const Prepared& p, const RunOptions& run = {}) const;
    TokenCount token_accuracy(const Prepared& p) const;

    // Beam search (beam 1 is greedy), scores normalized by length.
    std::vector<std::string> generate(const SourceInput& source, const DecodeConfig& decode = {}) const;

private:
    struct DropoutSites;
    Tensor dropout(const Tensor& x, const RunOptions& run, DropoutSites& sites) const;
    Tensor attention(const std::string& prefix, const Tensor& queries, const Tensor& keys,
                     const tensor::Mask* mask, Tensor* mean_weights) const;
    Tensor feed_forward(const std::string& prefix, const Tensor& x) const;
    Tensor norm(const std::string& name, const Tensor& x) const;
    Tensor graph_encode(const Prepared& p, const RunOptions& run, EncoderTrace* trace) const;
    Tensor sequence_encode(const Prepared& p, const RunOptions& run) const;

    void add_attention_params(const std::string& prefix);
    void add_ffn_params(const std::string& prefix);
    void add_norm_params(const std::string& name);

    ModelConfig config_;
    Vocab vocab_;
    tensor::ParameterStore<T> params_;
    Tensor head_mask_;  // d_model x heads, 1 where row belongs to the head
};

// Sinusoidal position table, rows x d.
template <typename T>
tensor::Tensor<T> positional_encoding(std::size_t rows, std::size_t d);

// Checkpoint with the model config and vocabulary in its metadata.
void save_model(const std::filesystem::path& dir, const Graph2Text<float>& model, const nlohmann::json& extra = {});
Graph2Text<float> load_model(const std::filesystem::path& dir);

}  // namespace map2seq::model
