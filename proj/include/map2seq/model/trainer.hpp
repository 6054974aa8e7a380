#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "json.hpp"
#include "map2seq/model/graph2text.hpp"

namespace map2seq::model {

struct EpochLog {
    std::size_t epoch = 0;  // 1-based
    double loss = 0;        // mean training loss
    double token_acc = 0;   // dev, teacher-forced
};

nlohmann::ordered_json to_json(const EpochLog& e);

struct TrainResult {
    std::size_t best_epoch = 0;
    double best_accuracy = 0;
    std::vector<EpochLog> log;

    // First epoch whose dev accuracy reached `threshold`.
    std::optional<std::size_t> epochs_to(double threshold) const;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Mini-batch Adam on teacher-forced cross-entropy. Gradients of a batch are
// averaged over its examples. On return the model holds the parameters of
// the best dev epoch. Throws ConfigError on an empty train or dev set.
TrainResult train(Graph2Text<float>& model, const std::vector<Example>& train_set, const std::vector<Example>& dev_set,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

// Dev token accuracy pooled over tokens.
double token_accuracy(const Graph2Text<float>& model, const std::vector<Example>& examples);

struct PretrainResult {
    TrainResult pretrain;
    TrainResult finetune;
};

// Trains on the rule-based set, then continues on the fine set with a fresh
// optimizer. Throws SchemaError when the fine set uses tokens the model
// vocabulary lacks.
PretrainResult pretrain_finetune(Graph2Text<float>& model, const std::vector<Example>& pretrain_train,
                                 const std::vector<Example>& pretrain_dev, const std::vector<Example>& fine_train,
                                 const std::vector<Example>& fine_dev, const TrainConfig& pretrain_config,
                                 const TrainConfig& fine_config, const EpochCallback& on_epoch = {});

void check_vocab_covers(const Vocab& vocab, const std::vector<Example>& examples);

}  // namespace map2seq::model
