#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nplast/corpus.hpp"
#include "nplast/embeddings.hpp"
#include "nplast/hats.hpp"
#include "nplast/metrics.hpp"
#include "nplast/model.hpp"
#include "nplast/ranking.hpp"
#include "nplast/reports.hpp"

namespace np {

struct ExperimentConfig {
    // Corpus: a file in the corpus line format, or the built-in synthetic
    // generator when empty.
    std::string corpus_path;
    std::size_t n_sentences = 3000;
    std::uint64_t corpus_seed = 42;
    double corpus_scale = 1.0;
    // Activation extraction and ranking run on the first N train sentences.
    std::size_t analysis_sentences = 800;

    // Model.
    std::size_t n_layers = 4;
    std::size_t d_model = 64;
    std::size_t n_heads = 4;
    std::size_t d_ffn = 256;
    std::size_t max_len = 16;
    double dropout_rate = 0.1;
    bool causal = false;

    // Pipeline.
    std::string concept_label = "SEM:named_entity:location";
    std::vector<std::string> sub_concepts;  // subconcept mode only
    std::string ranker = "probeless";       // probeless | linear_probe
    double prune_fraction = 0.5;
    std::string prune_mode = "concept";  // concept | random
    std::size_t snapshot_interval = 2;
    std::size_t base_epochs = 3;
    std::size_t max_retrain_epochs = 8;
    double recovery_epsilon = 0.01;
    bool early_stop = false;
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    std::size_t saliency_group_size = 10;
    double similarity_threshold = 0.5;
    std::string output_dir = "out";

    // Optimization.
    std::size_t batch_size = 8;
    double learning_rate = 3e-4;
    double weight_decay = 0.01;
    double warmup_frac = 0.1;

    // Embeddings and probe.
    std::size_t embed_dim = 64;
    std::size_t embed_window = 5;
    double probe_lambda = 20.0;

    std::size_t n_threads = 2;
    bool quiet = false;

    void validate() const;
    // Flat key/value rendering; `output_dir` is omitted so that report
    // directories stay byte-comparable across locations.
    std::string resolved_text() const;

    static ExperimentConfig from_file(const std::string& path);
    void apply_key_value(const std::string& key, const std::string& value);
};

// Analyses attached to one pipeline stage (base / pruned / retrained_k).
struct StageAnalysis {
    std::string stage;
    Prf dev_metrics;
    LayerSaliencySummary summary;
    std::vector<SimilarityRecord> similarity;  // empty at base/pruned stages
    ScatterData scatter;                       // joined saliency/similarity
};

struct SeedResult {
    std::uint64_t seed = 0;
    std::size_t pruned_count = 0;
    std::vector<std::uint32_t> pruned_neurons;  // the set S
    double base_f1 = 0.0;
    double pruned_f1 = 0.0;
    double final_f1 = 0.0;
    bool recovered = false;
    std::optional<std::size_t> recovery_epoch;
    std::map<std::string, Prf> stage_metrics;
    std::vector<StageAnalysis> stages;  // base, pruned, retrained_k...
    std::vector<HatEvolution> hat_reports;
    std::string directory;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<SeedResult> seeds;
    std::string directory;
};

// Full pipeline: fine-tune, identify concept neurons, prune, retrain with
// snapshots, analyze saliency/similarity at every snapshot, emit reports.
ExperimentResult run_neuroplasticity(const ExperimentConfig& config);

// Same pipeline with a random mask of matched size.
ExperimentResult run_random_baseline(ExperimentConfig config);

// Prunes the union of top-fraction neurons of >= 2 mutually exclusive
// sibling sub-concepts; analyses track the parent concept.
ExperimentResult run_subconcept(const ExperimentConfig& config);

}  // namespace np
