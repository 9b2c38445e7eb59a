#pragma once

#include <functional>
#include <optional>

#include "nplast/corpus.hpp"
#include "nplast/metrics.hpp"
#include "nplast/model.hpp"
#include "nplast/optimizer.hpp"

namespace np {

// Corpus rendered down to id sequences against a fixed tag vocabulary.
struct EncodedCorpus {
    std::vector<TokenIds> sentences;
    std::vector<std::vector<std::uint32_t>> tags;
    std::vector<std::string> tag_names;  // id -> tag string
};

EncodedCorpus encode_corpus(const ConceptCorpus& corpus, const std::vector<std::string>& tag_names);

std::vector<std::vector<std::string>> decode_tags(
    const std::vector<std::vector<std::uint32_t>>& ids, const std::vector<std::string>& tag_names);

struct TrainOptions {
    std::size_t epochs = 3;
    std::size_t batch_size = 8;
    double base_lr = 3e-4;
    double weight_decay = 0.01;
    double warmup_frac = 0.1;
    std::uint64_t seed = 0;
    std::size_t snapshot_interval = 2;
    bool dropout = true;
    std::size_t n_threads = 2;
    // Early stop once dev F1 reaches this value (checked per epoch).
    std::optional<double> recovery_target;
    bool early_stop = false;
};

struct EpochStats {
    std::size_t epoch = 0;  // 1-based
    double mean_loss = 0.0;
    Prf dev;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    bool stopped_early = false;
    bool reached_target = false;
};

using SnapshotSink =
    std::function<void(std::size_t epoch, const TaggerModel& model, const OptimizerState& opt)>;

// Shuffled mini-batch AdamW training with linear warmup. Deterministic for a
// fixed seed: epoch shuffles and per-sentence dropout streams are derived
// from it. Snapshots fire at every `snapshot_interval` epochs and at the
// final epoch.
TrainReport train(TaggerModel& model, const EncodedCorpus& train_data,
                  const EncodedCorpus& dev_data, const TrainOptions& options,
                  const SnapshotSink& snapshot = {});

// Dev-set entity scores for the current model.
EntityScores evaluate(const TaggerModel& model, const EncodedCorpus& data,
                      std::size_t n_threads = 2);

}  // namespace np
