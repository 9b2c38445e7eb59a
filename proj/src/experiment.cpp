#include "nplast/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "nplast/activations.hpp"
#include "nplast/checkpoint.hpp"
#include "nplast/pruning.hpp"
#include "nplast/trainer.hpp"

namespace fs = std::filesystem;

namespace np {

namespace {

std::vector<std::string> split_csv_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        const auto begin = item.find_first_not_of(" \t");
        if (begin == std::string::npos) continue;
        const auto end = item.find_last_not_of(" \t");
        out.push_back(item.substr(begin, end - begin + 1));
    }
    return out;
}

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw config_error("expected boolean, got '" + v + "'");
}

}  // namespace

void ExperimentConfig::validate() const {
    if (prune_fraction < 0.0 || prune_fraction > 1.0)
        throw config_error("prune_fraction must be in [0,1]");
    if (snapshot_interval < 1) throw config_error("snapshot_interval must be >= 1");
    if (seeds.empty()) throw config_error("at least one seed is required");
    if (ranker != "probeless" && ranker != "linear_probe")
        throw config_error("ranker must be probeless or linear_probe");
    if (prune_mode != "concept" && prune_mode != "random")
        throw config_error("prune_mode must be concept or random");
    if (base_epochs < 1 || max_retrain_epochs < 1)
        throw config_error("epoch counts must be >= 1");
    if (saliency_group_size < 1) throw config_error("saliency_group_size must be >= 1");
    if (similarity_threshold < 0.0 || similarity_threshold > 1.0)
        throw config_error("similarity_threshold must be in [0,1]");
    ConceptLabel::parse(concept_label);
    for (const auto& s : sub_concepts) ConceptLabel::parse(s);
}

void ExperimentConfig::apply_key_value(const std::string& key, const std::string& value) {
    try {
        if (key == "corpus_path") corpus_path = value;
        else if (key == "n_sentences") n_sentences = std::stoul(value);
        else if (key == "corpus_seed") corpus_seed = std::stoull(value);
        else if (key == "corpus_scale") corpus_scale = std::stod(value);
        else if (key == "analysis_sentences") analysis_sentences = std::stoul(value);
        else if (key == "n_layers") n_layers = std::stoul(value);
        else if (key == "d_model") d_model = std::stoul(value);
        else if (key == "n_heads") n_heads = std::stoul(value);
        else if (key == "d_ffn") d_ffn = std::stoul(value);
        else if (key == "max_len") max_len = std::stoul(value);
        else if (key == "dropout_rate") dropout_rate = std::stod(value);
        else if (key == "causal") causal = parse_bool(value);
        else if (key == "concept") concept_label = value;
        else if (key == "sub_concepts") sub_concepts = split_csv_list(value);
        else if (key == "ranker") ranker = value;
        else if (key == "prune_fraction") prune_fraction = std::stod(value);
        else if (key == "prune_mode") prune_mode = value;
        else if (key == "snapshot_interval") snapshot_interval = std::stoul(value);
        else if (key == "base_epochs") base_epochs = std::stoul(value);
        else if (key == "max_retrain_epochs") max_retrain_epochs = std::stoul(value);
        else if (key == "recovery_epsilon") recovery_epsilon = std::stod(value);
        else if (key == "early_stop") early_stop = parse_bool(value);
        else if (key == "seeds") {
            seeds.clear();
            for (const auto& s : split_csv_list(value)) seeds.push_back(std::stoull(s));
        }
        else if (key == "saliency_group_size") saliency_group_size = std::stoul(value);
        else if (key == "similarity_threshold") similarity_threshold = std::stod(value);
        else if (key == "output_dir") output_dir = value;
        else if (key == "batch_size") batch_size = std::stoul(value);
        else if (key == "learning_rate") learning_rate = std::stod(value);
        else if (key == "weight_decay") weight_decay = std::stod(value);
        else if (key == "warmup_frac") warmup_frac = std::stod(value);
        else if (key == "embed_dim") embed_dim = std::stoul(value);
        else if (key == "embed_window") embed_window = std::stoul(value);
        else if (key == "probe_lambda") probe_lambda = std::stod(value);
        else if (key == "n_threads") n_threads = std::stoul(value);
        else if (key == "quiet") quiet = parse_bool(value);
        else throw config_error("unknown config key: " + key);
    } catch (const std::invalid_argument&) {
        throw config_error("bad value for " + key + ": '" + value + "'");
    } catch (const std::out_of_range&) {
        throw config_error("bad value for " + key + ": '" + value + "'");
    }
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    ExperimentConfig config;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto begin = line.find_first_not_of(" \t\r");
        if (begin == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error("config parse error at line " + std::to_string(line_no) +
                               ": expected key = value");
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos) return std::string();
            const auto e = s.find_last_not_of(" \t\r");
            return s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw config_error("config parse error at line " + std::to_string(line_no));
        config.apply_key_value(key, value);
    }
    return config;
}

std::string ExperimentConfig::resolved_text() const {
    std::ostringstream out;
    out << "corpus_path = " << corpus_path << '\n';
    out << "n_sentences = " << n_sentences << '\n';
    out << "corpus_seed = " << corpus_seed << '\n';
    out << "corpus_scale = " << format_fixed(corpus_scale, 6) << '\n';
    out << "analysis_sentences = " << analysis_sentences << '\n';
    out << "n_layers = " << n_layers << '\n';
    out << "d_model = " << d_model << '\n';
    out << "n_heads = " << n_heads << '\n';
    out << "d_ffn = " << d_ffn << '\n';
    out << "max_len = " << max_len << '\n';
    out << "dropout_rate = " << format_fixed(dropout_rate, 6) << '\n';
    out << "causal = " << (causal ? "true" : "false") << '\n';
    out << "concept = " << concept_label << '\n';
    out << "sub_concepts = ";
    for (std::size_t i = 0; i < sub_concepts.size(); ++i)
        out << (i ? "," : "") << sub_concepts[i];
    out << '\n';
    out << "ranker = " << ranker << '\n';
    out << "prune_fraction = " << format_fixed(prune_fraction, 6) << '\n';
    out << "prune_mode = " << prune_mode << '\n';
    out << "snapshot_interval = " << snapshot_interval << '\n';
    out << "base_epochs = " << base_epochs << '\n';
    out << "max_retrain_epochs = " << max_retrain_epochs << '\n';
    out << "recovery_epsilon = " << format_fixed(recovery_epsilon, 6) << '\n';
    out << "early_stop = " << (early_stop ? "true" : "false") << '\n';
    out << "seeds = ";
    for (std::size_t i = 0; i < seeds.size(); ++i) out << (i ? "," : "") << seeds[i];
    out << '\n';
    out << "saliency_group_size = " << saliency_group_size << '\n';
    out << "similarity_threshold = " << format_fixed(similarity_threshold, 6) << '\n';
    out << "batch_size = " << batch_size << '\n';
    out << "learning_rate = " << format_fixed(learning_rate, 9) << '\n';
    out << "weight_decay = " << format_fixed(weight_decay, 6) << '\n';
    out << "warmup_frac = " << format_fixed(warmup_frac, 6) << '\n';
    out << "embed_dim = " << embed_dim << '\n';
    out << "embed_window = " << embed_window << '\n';
    out << "probe_lambda = " << format_fixed(probe_lambda, 6) << '\n';
    out << "n_threads = " << n_threads << '\n';
    return out.str();
}

namespace {

struct PipelineData {
    ConceptCorpus corpus;
    CorpusSplits splits;
    ConceptCorpus analysis;  // first N train sentences, parent vocab
    std::vector<std::string> tag_names;
    EncodedCorpus enc_train, enc_dev, enc_test;
    EmbeddingTable embeddings;
    BinaryLabelStream concept_labels;                 // over the analysis corpus
    std::vector<BinaryLabelStream> sub_labels;        // subconcept mode
    std::size_t model_max_len = 0;
};

PipelineData prepare_data(const ExperimentConfig& config, const ConceptLabel& analysis_concept,
                          const std::vector<ConceptLabel>& prune_concepts) {
    PipelineData data;
    if (!config.corpus_path.empty()) {
        data.corpus = read_corpus(config.corpus_path);
    } else {
        data.corpus =
            generate_corpus(default_corpus_spec(config.n_sentences, config.corpus_scale),
                            config.corpus_seed);
    }
    data.splits = split_corpus(data.corpus, SplitRatios{}, config.corpus_seed);
    data.tag_names = data.corpus.tag_set();
    data.enc_train = encode_corpus(data.splits.train, data.tag_names);
    data.enc_dev = encode_corpus(data.splits.dev, data.tag_names);
    data.enc_test = encode_corpus(data.splits.test, data.tag_names);

    const std::size_t n_analysis =
        std::min(config.analysis_sentences, data.splits.train.sentences.size());
    data.analysis.sentences.assign(data.splits.train.sentences.begin(),
                                   data.splits.train.sentences.begin() +
                                       static_cast<long>(n_analysis));
    data.analysis.reindex_with_vocab(data.corpus.vocab);

    data.embeddings = train_embeddings(data.splits.train, config.embed_dim, config.embed_window);

    data.concept_labels = concept_binary_labels(data.analysis, analysis_concept);
    if (!data.concept_labels.concept_found && !config.quiet)
        std::cerr << "warning: concept " << analysis_concept.str()
                  << " absent from the analysis corpus; labels are all-negative\n";
    for (const auto& sub : prune_concepts)
        data.sub_labels.push_back(concept_binary_labels(data.analysis, sub));

    std::size_t longest = 0;
    for (const auto& s : data.corpus.sentences) longest = std::max(longest, s.size());
    data.model_max_len = std::max(config.max_len, longest);
    return data;
}

ModelConfig make_model_config(const ExperimentConfig& config, const PipelineData& data,
                              std::uint64_t seed) {
    ModelConfig mc;
    mc.n_layers = config.n_layers;
    mc.d_model = config.d_model;
    mc.n_heads = config.n_heads;
    mc.d_ffn = config.d_ffn;
    mc.vocab_size = data.corpus.vocab.size();
    mc.n_tags = data.tag_names.size();
    mc.max_len = data.model_max_len;
    mc.dropout_rate = config.dropout_rate;
    mc.seed = seed;
    mc.causal = config.causal;
    return mc;
}

NeuronRanking rank_stage(const ExperimentConfig& config, const ActivationMatrix& matrix,
                         const BinaryLabelStream& labels, const std::string& concept_name) {
    if (config.ranker == "linear_probe") {
        std::vector<std::uint32_t> y(labels.labels.begin(), labels.labels.end());
        ProbeOptions opts;
        opts.lambdas = {config.probe_lambda};
        NeuronRanking ranking = linear_probe_rank(matrix, y, opts);
        ranking.concept_name = concept_name;
        return ranking;
    }
    std::vector<std::uint32_t> y(labels.labels.begin(), labels.labels.end());
    const ClassMeans means =
        class_mean_vectors(matrix, y, {"rest", concept_name});
    return probeless_rank(means, 1);
}

std::string stage_name(std::size_t epoch) { return "retrained_" + std::to_string(epoch); }

struct StageArtifacts {
    ActivationMatrix matrix;
    NeuronRanking ranking;
    SaliencyTable saliency;
    LayerSaliencySummary summary;
};

StageArtifacts analyze_stage(const ExperimentConfig& config, const PipelineData& data,
                             const TaggerModel& model, const BinaryLabelStream& labels,
                             const std::string& concept_name) {
    StageArtifacts art;
    art.matrix = extract_activations(model, data.analysis, config.n_threads);
    art.ranking = rank_stage(config, art.matrix, labels, concept_name);
    art.saliency = saliency_scores(art.ranking, config.saliency_group_size, true, model.mask());
    art.summary = layer_saliency_summary(art.saliency, model.mask(), 0.5);
    return art;
}

void write_seed_reports(const ExperimentConfig& config, const SeedResult& result,
                        const std::vector<std::pair<std::string, LayerSaliencySummary>>& sal_traj,
                        const std::vector<std::pair<std::string, LayerSimilarities>>& sim_traj,
                        const StageArtifacts& base_art, const StageArtifacts& final_art,
                        const ScatterData& final_scatter, const PruneMask& mask,
                        const std::string& dir) {
    const std::string reports = dir + "/reports";
    fs::create_directories(reports);

    std::vector<std::string> stage_order;
    stage_order.push_back("base");
    stage_order.push_back("pruned");
    for (const auto& s : result.stages)
        if (s.stage != "base" && s.stage != "pruned") stage_order.push_back(s.stage);
    std::vector<std::map<std::string, Prf>> single_run{result.stage_metrics};
    const Report perf = performance_table(stage_order, single_run);
    write_file_text(reports + "/performance.csv", perf.csv);
    write_file_text(reports + "/performance.json", perf.json);

    const Report dist = distribution_table(base_art.summary, final_art.summary);
    write_file_text(reports + "/distribution.csv", dist.csv);
    write_file_text(reports + "/distribution.json", dist.json);

    const Report sal = saliency_trajectory(sal_traj);
    write_file_text(reports + "/saliency_trajectory.csv", sal.csv);
    write_file_text(reports + "/saliency_trajectory.json", sal.json);

    const Report sim = similarity_trajectory(sim_traj);
    write_file_text(reports + "/similarity_trajectory.csv", sim.csv);
    write_file_text(reports + "/similarity_trajectory.json", sim.json);

    write_file_text(reports + "/scatter.csv", export_scatter_csv(final_scatter));
    write_file_text(reports + "/ranking_base.csv",
                    export_ranking_csv(base_art.ranking, base_art.saliency, config.d_model));
    write_file_text(reports + "/ranking_final.csv",
                    export_ranking_csv(final_art.ranking, final_art.saliency, config.d_model));
    write_file_text(reports + "/mask.csv", export_mask_csv(mask));
    write_file_text(reports + "/hat_evolution.json", hat_evolution_json(result.hat_reports));

    nlohmann::json summary;
    summary["seed"] = result.seed;
    summary["pruned_count"] = result.pruned_count;
    summary["base_f1"] = result.base_f1;
    summary["pruned_f1"] = result.pruned_f1;
    summary["final_f1"] = result.final_f1;
    summary["recovered"] = result.recovered;
    if (result.recovery_epoch) summary["recovery_epoch"] = *result.recovery_epoch;
    auto& metrics = summary["stage_metrics"] = nlohmann::json::object();
    for (const auto& [stage, prf] : result.stage_metrics)
        metrics[stage] = {{"precision", prf.precision},
                          {"recall", prf.recall},
                          {"f1", prf.f1},
                          {"gold", prf.gold_count},
                          {"predicted", prf.pred_count},
                          {"matched", prf.match_count}};
    summary["pruned_neurons"] = result.pruned_neurons;
    write_file_text(reports + "/summary.json", summary.dump(2) + "\n");
}

SeedResult run_seed(const ExperimentConfig& config, const PipelineData& data,
                    std::uint64_t seed, const std::string& mode,
                    const std::vector<ConceptLabel>& prune_concepts,
                    const ConceptLabel& analysis_concept) {
    SeedResult result;
    result.seed = seed;
    const std::string dir = config.output_dir + "/seed_" + std::to_string(seed);
    result.directory = dir;
    fs::create_directories(dir + "/checkpoints");
    fs::create_directories(dir + "/dumps");

    const auto log = [&](const std::string& msg) {
        if (!config.quiet) std::cerr << "[seed " << seed << "] " << msg << '\n';
    };

    // --- fine-tune ---------------------------------------------------------
    TaggerModel model(make_model_config(config, data, seed));
    TrainOptions base_opts;
    base_opts.epochs = config.base_epochs;
    base_opts.batch_size = config.batch_size;
    base_opts.base_lr = config.learning_rate;
    base_opts.weight_decay = config.weight_decay;
    base_opts.warmup_frac = config.warmup_frac;
    base_opts.seed = mix_seed(seed, 0xba5e0);
    base_opts.snapshot_interval = config.base_epochs;  // only the final epoch
    base_opts.n_threads = config.n_threads;
    base_opts.dropout = config.dropout_rate > 0.0;
    train(model, data.enc_train, data.enc_dev, base_opts);
    save_checkpoint(model, nullptr, dir + "/checkpoints/base.npckpt");

    const EntityScores base_scores = evaluate(model, data.enc_dev, config.n_threads);
    result.stage_metrics["base"] = base_scores.overall;
    result.base_f1 = base_scores.overall.f1;
    log("base dev F1 " + format_fixed(result.base_f1, 3));

    // --- identify concept neurons ------------------------------------------
    StageArtifacts base_art =
        analyze_stage(config, data, model, data.concept_labels, analysis_concept.str());
    write_dump(base_art.matrix, dir + "/dumps/base.nplab");

    // Pre-prune HAT sets for every neuron (similarity reference).
    const std::size_t D = model.config().neuron_count();
    std::vector<HatSet> base_hats(D);
    for (std::size_t n = 0; n < D; ++n)
        base_hats[n] = extract_hats(base_art.matrix, static_cast<std::uint32_t>(n));

    // --- prune --------------------------------------------------------------
    PruneMask mask;
    if (mode == "random") {
        const std::size_t count =
            static_cast<std::size_t>(config.prune_fraction * static_cast<double>(D));
        mask = random_mask(count, config.n_layers + 1, config.d_model,
                           mix_seed(seed, 0xabad1dea));
    } else if (mode == "subconcept") {
        mask = PruneMask(config.n_layers + 1, config.d_model);
        for (std::size_t i = 0; i < prune_concepts.size(); ++i) {
            NeuronRanking sub_ranking = rank_stage(config, base_art.matrix, data.sub_labels[i],
                                                   prune_concepts[i].str());
            mask = combine_masks(
                mask, build_mask(sub_ranking, config.prune_fraction, config.n_layers + 1,
                                 config.d_model));
        }
    } else {
        mask = build_mask(base_art.ranking, config.prune_fraction, config.n_layers + 1,
                          config.d_model);
    }
    for (std::size_t n = 0; n < D; ++n)
        if (!mask.alive_global(n)) result.pruned_neurons.push_back(static_cast<std::uint32_t>(n));
    result.pruned_count = result.pruned_neurons.size();

    apply_mask(model, mask);
    save_checkpoint(model, nullptr, dir + "/checkpoints/pruned.npckpt");
    const EntityScores pruned_scores = evaluate(model, data.enc_dev, config.n_threads);
    result.stage_metrics["pruned"] = pruned_scores.overall;
    result.pruned_f1 = pruned_scores.overall.f1;
    log("pruned " + std::to_string(result.pruned_count) + " neurons, dev F1 " +
        format_fixed(result.pruned_f1, 3));

    StageArtifacts pruned_art =
        analyze_stage(config, data, model, data.concept_labels, analysis_concept.str());
    write_dump(pruned_art.matrix, dir + "/dumps/pruned.nplab");

    std::vector<std::pair<std::string, LayerSaliencySummary>> sal_traj;
    std::vector<std::pair<std::string, LayerSimilarities>> sim_traj;
    sal_traj.emplace_back("0", base_art.summary);
    sal_traj.emplace_back("post-prune", pruned_art.summary);

    result.stages.push_back(StageAnalysis{
        "base", base_scores.overall, base_art.summary, {}, ScatterData{}});
    result.stages.push_back(StageAnalysis{
        "pruned", pruned_scores.overall, pruned_art.summary, {}, ScatterData{}});

    // --- retrain with snapshot analyses -------------------------------------
    const double recovery_target = result.base_f1 - config.recovery_epsilon;
    TrainOptions retrain_opts = base_opts;
    retrain_opts.epochs = config.max_retrain_epochs;
    retrain_opts.seed = mix_seed(seed, 0x4e74a1);
    retrain_opts.snapshot_interval = config.snapshot_interval;
    retrain_opts.recovery_target = recovery_target;
    retrain_opts.early_stop = config.early_stop;

    StageArtifacts final_art;
    ScatterData final_scatter;
    std::vector<std::pair<std::string, ActivationMatrix>> snapshot_dumps;

    const SnapshotSink sink = [&](std::size_t epoch, const TaggerModel& snap_model,
                                  const OptimizerState&) {
        const std::string stage = stage_name(epoch);
        save_checkpoint(snap_model, nullptr, dir + "/checkpoints/" + stage + ".npckpt");
        StageArtifacts art = analyze_stage(config, data, snap_model, data.concept_labels,
                                           analysis_concept.str());
        write_dump(art.matrix, dir + "/dumps/" + stage + ".nplab");

        const EntityScores scores = evaluate(snap_model, data.enc_dev, config.n_threads);
        result.stage_metrics[stage] = scores.overall;
        if (!result.recovery_epoch && scores.overall.f1 >= recovery_target) {
            result.recovered = true;
            result.recovery_epoch = epoch;
        }
        log(stage + " dev F1 " + format_fixed(scores.overall.f1, 3));

        // Similarity of every alive neuron's current HATs to its pre-prune set.
        std::vector<SimilarityRecord> records;
        for (std::size_t n = 0; n < D; ++n) {
            if (!snap_model.mask().alive_global(n)) continue;
            const HatSet now = extract_hats(art.matrix, static_cast<std::uint32_t>(n));
            SimilarityRecord rec = concept_similarity(base_hats[n], now, data.embeddings);
            rec.neuron = static_cast<std::uint32_t>(n);
            rec.saliency = art.saliency.saliency[n];
            records.push_back(std::move(rec));
        }
        ScatterData scatter = similarity_saliency_join(records, art.saliency, config.d_model,
                                                       config.similarity_threshold);
        sal_traj.emplace_back(std::to_string(epoch), art.summary);
        sim_traj.emplace_back(std::to_string(epoch),
                              collect_layer_similarities(scatter, config.n_layers + 1));

        result.stages.push_back(
            StageAnalysis{stage, scores.overall, art.summary, records, scatter});
        snapshot_dumps.emplace_back(stage, art.matrix);
        final_art = std::move(art);
        final_scatter = std::move(scatter);
    };

    const TrainReport retrain_report =
        train(model, data.enc_train, data.enc_dev, retrain_opts, sink);
    (void)retrain_report;
    result.final_f1 = result.stages.back().dev_metrics.f1;

    // --- HAT evolution for the top-10 remapped neurons ----------------------
    std::vector<std::uint32_t> top_remapped;
    for (std::uint32_t neuron : final_art.ranking.order) {
        if (!model.mask().alive_global(neuron)) continue;
        top_remapped.push_back(neuron);
        if (top_remapped.size() >= 10) break;
    }
    std::vector<const ActivationMatrix*> evo_snapshots{&base_art.matrix};
    std::vector<std::string> evo_names{"base"};
    for (const auto& [stage, matrix] : snapshot_dumps) {
        evo_snapshots.push_back(&matrix);
        evo_names.push_back(stage);
    }
    for (std::uint32_t neuron : top_remapped)
        result.hat_reports.push_back(hat_evolution(neuron, evo_snapshots, evo_names));

    write_seed_reports(config, result, sal_traj, sim_traj, base_art, final_art, final_scatter,
                       mask, dir);
    return result;
}

void write_aggregate_reports(const ExperimentConfig& config, const ExperimentResult& result) {
    const std::string dir = config.output_dir + "/aggregate";
    fs::create_directories(dir);

    std::vector<std::string> stage_order;
    stage_order.push_back("base");
    stage_order.push_back("pruned");
    for (const auto& s : result.seeds.front().stages)
        if (s.stage != "base" && s.stage != "pruned") stage_order.push_back(s.stage);

    std::vector<std::map<std::string, Prf>> runs;
    for (const auto& seed : result.seeds) runs.push_back(seed.stage_metrics);
    const Report perf = performance_table(stage_order, runs);
    write_file_text(dir + "/performance.csv", perf.csv);
    write_file_text(dir + "/performance.json", perf.json);

    nlohmann::json summary;
    summary["mode"] = config.prune_mode;
    summary["concept"] = config.concept_label;
    auto& per_seed = summary["seeds"] = nlohmann::json::array();
    for (const auto& seed : result.seeds) {
        per_seed.push_back({{"seed", seed.seed},
                            {"base_f1", seed.base_f1},
                            {"pruned_f1", seed.pruned_f1},
                            {"final_f1", seed.final_f1},
                            {"pruned_count", seed.pruned_count},
                            {"recovered", seed.recovered}});
    }
    write_file_text(dir + "/summary.json", summary.dump(2) + "\n");
}

ExperimentResult run_pipeline(const ExperimentConfig& config, const std::string& mode,
                              const std::vector<ConceptLabel>& prune_concepts,
                              const ConceptLabel& analysis_concept) {
    config.validate();
    fs::create_directories(config.output_dir);
    write_file_text(config.output_dir + "/config.resolved.txt", config.resolved_text());

    const PipelineData data = prepare_data(config, analysis_concept, prune_concepts);

    ExperimentResult result;
    result.config = config;
    result.directory = config.output_dir;
    for (std::uint64_t seed : config.seeds)
        result.seeds.push_back(
            run_seed(config, data, seed, mode, prune_concepts, analysis_concept));

    write_aggregate_reports(config, result);
    return result;
}

}  // namespace

ExperimentResult run_neuroplasticity(const ExperimentConfig& config) {
    const ConceptLabel target = ConceptLabel::parse(config.concept_label);
    return run_pipeline(config, config.prune_mode, {target}, target);
}

ExperimentResult run_random_baseline(ExperimentConfig config) {
    config.prune_mode = "random";
    const ConceptLabel target = ConceptLabel::parse(config.concept_label);
    return run_pipeline(config, "random", {target}, target);
}

ExperimentResult run_subconcept(const ExperimentConfig& config) {
    if (config.sub_concepts.size() < 2)
        throw config_error("subconcept mode needs >= 2 sibling sub-concepts");
    std::vector<ConceptLabel> subs;
    for (const auto& s : config.sub_concepts) subs.push_back(ConceptLabel::parse(s));
    for (std::size_t i = 1; i < subs.size(); ++i)
        if (!subs[i].is_sibling_of(subs[0]))
            throw config_error("sub-concepts must be siblings: " + subs[0].str() + " vs " +
                               subs[i].str());
    const ConceptLabel parent = subs[0].parent();
    return run_pipeline(config, "subconcept", subs, parent);
}

}  // namespace np
