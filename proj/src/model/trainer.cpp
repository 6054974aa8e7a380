#include "map2seq/model/trainer.hpp"

#include "map2seq/errors.hpp"
#include "map2seq/rng.hpp"
#include "map2seq/tensor/optim.hpp"

namespace map2seq::model {

namespace tt = map2seq::tensor;

nlohmann::ordered_json to_json(const EpochLog& e) {
    nlohmann::ordered_json j;
    j["epoch"] = e.epoch;
    j["loss"] = e.loss;
    j["token_acc"] = e.token_acc;
    return j;
}

std::optional<std::size_t> TrainResult::epochs_to(double threshold) const {
    for (const auto& e : log)
        if (e.token_acc >= threshold) return e.epoch;
    return std::nullopt;
}

namespace {

std::vector<Prepared> prepare_all(const Graph2Text<float>& model, const std::vector<Example>& set) {
    std::vector<Prepared> out;
    out.reserve(set.size());
    for (const auto& ex : set) out.push_back(model.prepare(ex.source, &ex.target));
    return out;
}

double pooled_accuracy(const Graph2Text<float>& model, const std::vector<Prepared>& set) {
    TokenCount total;
    for (const auto& p : set) total += model.token_accuracy(p);
    return total.accuracy();
}

std::vector<std::vector<float>> snapshot(const tt::ParameterStore<float>& params) {
    std::vector<std::vector<float>> out;
    for (const auto& t : params.tensors()) out.emplace_back(t.data().begin(), t.data().end());
    return out;
}

void restore(tt::ParameterStore<float>& params, const std::vector<std::vector<float>>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        auto t = params.tensors()[i];
        std::copy(values[i].begin(), values[i].end(), t.data().begin());
    }
}

}  // namespace

double token_accuracy(const Graph2Text<float>& model, const std::vector<Example>& examples) {
    return pooled_accuracy(model, prepare_all(model, examples));
}

TrainResult train(Graph2Text<float>& model, const std::vector<Example>& train_set, const std::vector<Example>& dev_set,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
    config.validate();
    if (train_set.empty()) throw ConfigError("training set is empty");
    if (dev_set.empty()) throw ConfigError("dev set is empty");
    const std::vector<Prepared> train_p = prepare_all(model, train_set);
    const std::vector<Prepared> dev_p = prepare_all(model, dev_set);

    auto& params = model.params();
    tt::Adam<float> adam(params);
    const tt::NoamSchedule schedule{config.lr, model.config().d_model, config.warmup, config.constant_lr};

    TrainResult result;
    std::vector<std::vector<float>> best = snapshot(params);
    result.best_accuracy = -1.0;
    std::size_t since_best = 0;
    std::vector<std::size_t> order(train_p.size());
    std::uint64_t example_counter = 0;

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        CounterRng rng(counter_hash(config.seed, epoch));
        rng.shuffle(order);

        double loss_sum = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            params.zero_grad();
            for (std::size_t b = start; b < end; ++b) {
                RunOptions run;
                run.training = true;
                run.dropout_seed = counter_hash(config.seed ^ 0x5eedULL, example_counter++);
                auto loss = model.loss(train_p[order[b]], run);
                loss_sum += loss.item();
                tt::backward(loss);
            }
            params.scale_grad(1.0f / static_cast<float>(end - start));
            adam.step(schedule.rate(adam.steps() + 1));
        }

        EpochLog entry{epoch, loss_sum / static_cast<double>(order.size()), pooled_accuracy(model, dev_p)};
        result.log.push_back(entry);
        if (on_epoch) on_epoch(entry);
        if (entry.token_acc > result.best_accuracy) {
            result.best_accuracy = entry.token_acc;
            result.best_epoch = epoch;
            best = snapshot(params);
            since_best = 0;
        } else if (++since_best >= config.patience && config.patience > 0) {
            break;
        }
        if (config.stop_at_accuracy && entry.token_acc >= *config.stop_at_accuracy) break;
    }
    restore(params, best);
    return result;
}

void check_vocab_covers(const Vocab& vocab, const std::vector<Example>& examples) {
    const auto missing = missing_tokens(vocab, examples);
    if (missing.empty()) return;
    std::string sample;
    for (std::size_t i = 0; i < std::min<std::size_t>(missing.size(), 5); ++i)
        sample += (i ? ", " : "") + std::string("'") + missing[i] + "'";
    throw SchemaError("vocabulary mismatch: " + std::to_string(missing.size()) +
                      " tokens of the fine-tuning data are not in the model vocabulary (" + sample + ")");
}

PretrainResult pretrain_finetune(Graph2Text<float>& model, const std::vector<Example>& pretrain_train,
                                 const std::vector<Example>& pretrain_dev, const std::vector<Example>& fine_train,
                                 const std::vector<Example>& fine_dev, const TrainConfig& pretrain_config,
                                 const TrainConfig& fine_config, const EpochCallback& on_epoch) {
    check_vocab_covers(model.vocab(), fine_train);
    check_vocab_covers(model.vocab(), fine_dev);
    PretrainResult r;
    r.pretrain = train(model, pretrain_train, pretrain_dev, pretrain_config, on_epoch);
    r.finetune = train(model, fine_train, fine_dev, fine_config, on_epoch);
    return r;
}

}  // namespace map2seq::model
