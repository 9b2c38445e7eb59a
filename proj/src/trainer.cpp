#include "nplast/trainer.hpp"

#include <algorithm>
#include <cmath>

namespace np {

EncodedCorpus encode_corpus(const ConceptCorpus& corpus,
                            const std::vector<std::string>& tag_names) {
    std::map<std::string, std::uint32_t> tag_ids;
    for (std::size_t i = 0; i < tag_names.size(); ++i)
        tag_ids.emplace(tag_names[i], static_cast<std::uint32_t>(i));

    EncodedCorpus out;
    out.tag_names = tag_names;
    out.sentences.reserve(corpus.sentences.size());
    out.tags.reserve(corpus.sentences.size());
    for (const auto& sentence : corpus.sentences) {
        TokenIds ids;
        std::vector<std::uint32_t> tags;
        ids.reserve(sentence.size());
        tags.reserve(sentence.size());
        for (const auto& tok : sentence) {
            auto vi = corpus.vocab_ids.find(tok.text);
            if (vi == corpus.vocab_ids.end())
                throw data_error("encode_corpus: token missing from vocab: " + tok.text);
            auto ti = tag_ids.find(tok.bio_tag);
            if (ti == tag_ids.end())
                throw data_error("encode_corpus: tag missing from tag set: " + tok.bio_tag);
            ids.push_back(vi->second);
            tags.push_back(ti->second);
        }
        out.sentences.push_back(std::move(ids));
        out.tags.push_back(std::move(tags));
    }
    return out;
}

std::vector<std::vector<std::string>> decode_tags(
    const std::vector<std::vector<std::uint32_t>>& ids,
    const std::vector<std::string>& tag_names) {
    std::vector<std::vector<std::string>> out(ids.size());
    for (std::size_t s = 0; s < ids.size(); ++s) {
        out[s].reserve(ids[s].size());
        for (std::uint32_t id : ids[s]) out[s].push_back(tag_names.at(id));
    }
    return out;
}

EntityScores evaluate(const TaggerModel& model, const EncodedCorpus& data,
                      std::size_t n_threads) {
    const auto predicted = model.predict(data.sentences, n_threads);
    return entity_prf(decode_tags(data.tags, data.tag_names),
                      decode_tags(predicted, data.tag_names));
}

TrainReport train(TaggerModel& model, const EncodedCorpus& train_data,
                  const EncodedCorpus& dev_data, const TrainOptions& options,
                  const SnapshotSink& snapshot) {
    if (options.epochs < 1) throw config_error("train: epochs must be >= 1");
    if (options.batch_size < 1) throw config_error("train: batch_size must be >= 1");
    if (options.snapshot_interval < 1) throw config_error("train: snapshot_interval must be >= 1");
    const std::size_t n = train_data.sentences.size();
    if (n == 0) throw data_error("train: empty training corpus");

    const std::size_t steps_per_epoch = (n + options.batch_size - 1) / options.batch_size;
    LrSchedule schedule;
    schedule.base_lr = options.base_lr;
    schedule.total_steps = steps_per_epoch * options.epochs;
    schedule.warmup_steps = static_cast<std::uint64_t>(
        std::llround(options.warmup_frac * static_cast<double>(schedule.total_steps)));
    OptimizerState opt = OptimizerState::create(model, schedule, options.weight_decay);

    TrainReport report;
    Gradients grads = model.make_gradients();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    std::uint64_t global_step = 0;
    for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
        Rng shuffle_rng(mix_seed(options.seed, 0x5ff1e000 + epoch));
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        for (std::size_t start = 0; start < n; start += options.batch_size) {
            const std::size_t end = std::min(n, start + options.batch_size);
            std::vector<TokenIds> batch;
            std::vector<std::vector<std::uint32_t>> gold;
            batch.reserve(end - start);
            gold.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) {
                batch.push_back(train_data.sentences[order[i]]);
                gold.push_back(train_data.tags[order[i]]);
            }
            const std::uint64_t dropout_seed = mix_seed(options.seed, 0xd809 + global_step);
            const double loss = model.loss_and_gradients(
                batch, gold, grads, options.dropout ? &dropout_seed : nullptr,
                options.n_threads);
            adamw_step(model, opt, grads);
            loss_sum += loss;
            ++global_step;
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.mean_loss = loss_sum / static_cast<double>(steps_per_epoch);
        if (!dev_data.sentences.empty())
            stats.dev = evaluate(model, dev_data, options.n_threads).overall;
        report.epochs.push_back(stats);

        const bool hit_target =
            options.recovery_target && stats.dev.f1 >= *options.recovery_target;
        if (hit_target) report.reached_target = true;
        const bool stopping = options.early_stop && hit_target;
        const bool last = epoch == options.epochs || stopping;
        if (snapshot && (epoch % options.snapshot_interval == 0 || last))
            snapshot(epoch, model, opt);
        if (stopping) {
            report.stopped_early = true;
            break;
        }
    }
    return report;
}

}  // namespace np
