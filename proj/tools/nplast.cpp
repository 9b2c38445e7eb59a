// Command-line front end for the concept pruning/relearning toolkit.
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric error.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "nplast/activations.hpp"
#include "nplast/checkpoint.hpp"
#include "nplast/embeddings.hpp"
#include "nplast/experiment.hpp"
#include "nplast/hats.hpp"
#include "nplast/pruning.hpp"
#include "nplast/ranking.hpp"
#include "nplast/reports.hpp"
#include "nplast/trainer.hpp"

namespace fs = std::filesystem;

namespace {

struct GlobalArgs {
    std::string config_path;
    std::string seeds;
    std::string out;
    bool quiet = false;
};

np::ExperimentConfig resolve_config(const GlobalArgs& args) {
    np::ExperimentConfig config;
    if (!args.config_path.empty()) config = np::ExperimentConfig::from_file(args.config_path);
    if (!args.seeds.empty()) config.apply_key_value("seeds", args.seeds);
    if (!args.out.empty()) config.output_dir = args.out;
    if (args.quiet) config.quiet = true;
    return config;
}

np::TrainOptions train_options_from(const np::ExperimentConfig& config, std::uint64_t seed,
                                    std::size_t epochs) {
    np::TrainOptions opts;
    opts.epochs = epochs;
    opts.batch_size = config.batch_size;
    opts.base_lr = config.learning_rate;
    opts.weight_decay = config.weight_decay;
    opts.warmup_frac = config.warmup_frac;
    opts.seed = seed;
    opts.snapshot_interval = config.snapshot_interval;
    opts.dropout = config.dropout_rate > 0.0;
    opts.n_threads = config.n_threads;
    return opts;
}

void print_scores(const std::string& label, const np::EntityScores& scores, bool quiet) {
    if (quiet) return;
    std::cout << label << ": P " << np::format_fixed(scores.overall.precision, 3) << "  R "
              << np::format_fixed(scores.overall.recall, 3) << "  F1 "
              << np::format_fixed(scores.overall.f1, 3) << '\n';
}

int run_cli(int argc, char** argv) {
    CLI::App app{"neuron pruning and concept relearning toolkit"};
    app.require_subcommand(1);
    app.fallthrough(true);
    GlobalArgs globals;
    app.add_option("--config", globals.config_path, "flat key=value config file");
    app.add_option("--seed", globals.seeds, "comma-separated seed list");
    app.add_option("--out", globals.out, "output directory or file");
    app.add_flag("--quiet", globals.quiet, "suppress progress output");

    // gen-corpus
    auto* gen = app.add_subcommand("gen-corpus", "generate a synthetic concept corpus");
    bool gen_fixture = false;
    gen->add_flag("--fixture", gen_fixture, "small-vocabulary HAT-tracking corpus");

    // train
    auto* train_cmd = app.add_subcommand("train", "fine-tune a tagger on a corpus");
    std::string train_corpus;
    train_cmd->add_option("--corpus", train_corpus, "corpus file")->required();

    // extract-acts
    auto* extract = app.add_subcommand("extract-acts", "dump per-token activations");
    std::string ex_ckpt, ex_corpus;
    extract->add_option("--checkpoint", ex_ckpt)->required();
    extract->add_option("--corpus", ex_corpus)->required();

    // rank
    auto* rank_cmd = app.add_subcommand("rank", "rank neurons by concept relevance");
    std::string rank_dump;
    rank_cmd->add_option("--dump", rank_dump, "activation dump")->required();

    // prune
    auto* prune_cmd = app.add_subcommand("prune", "build and apply a prune mask");
    std::string pr_ckpt, pr_dump;
    prune_cmd->add_option("--checkpoint", pr_ckpt)->required();
    prune_cmd->add_option("--dump", pr_dump, "activation dump for ranking (concept mode)");

    // retrain
    auto* retrain_cmd = app.add_subcommand("retrain", "retrain a pruned checkpoint");
    std::string rt_ckpt, rt_corpus;
    retrain_cmd->add_option("--checkpoint", rt_ckpt)->required();
    retrain_cmd->add_option("--corpus", rt_corpus)->required();

    // hats
    auto* hats_cmd = app.add_subcommand("hats", "highest-activating tokens per neuron");
    std::string hats_dump, hats_neurons;
    std::size_t hats_k = 5;
    hats_cmd->add_option("--dump", hats_dump)->required();
    hats_cmd->add_option("--neurons", hats_neurons, "comma-separated neuron ids")->required();
    hats_cmd->add_option("--k", hats_k, "tokens per set");

    // similarity
    auto* sim_cmd = app.add_subcommand("similarity", "pre/post HAT concept similarity");
    std::string sim_before, sim_after, sim_corpus, sim_import;
    sim_cmd->add_option("--before", sim_before, "base activation dump")->required();
    sim_cmd->add_option("--after", sim_after, "retrained activation dump")->required();
    sim_cmd->add_option("--embed-corpus", sim_corpus, "corpus to train embeddings on");
    sim_cmd->add_option("--import-embeddings", sim_import, "text word-vector table");

    // report
    auto* report_cmd = app.add_subcommand("report", "aggregate per-seed summaries");
    std::string report_dir;
    report_cmd->add_option("--dir", report_dir, "experiment output directory")->required();

    // experiment
    auto* exp = app.add_subcommand("experiment", "end-to-end pipelines");
    exp->require_subcommand(1);
    auto* exp_run = exp->add_subcommand("run", "concept pruning pipeline");
    auto* exp_random = exp->add_subcommand("random-baseline", "random pruning baseline");
    auto* exp_sub = exp->add_subcommand("subconcept", "sibling sub-concept pruning");

    CLI11_PARSE(app, argc, argv);

    np::ExperimentConfig config = resolve_config(globals);

    if (gen->parsed()) {
        const np::CorpusSpec spec = gen_fixture
                                        ? np::hat_fixture_spec(config.n_sentences)
                                        : np::default_corpus_spec(config.n_sentences,
                                                                  config.corpus_scale);
        const np::ConceptCorpus corpus = np::generate_corpus(spec, config.corpus_seed);
        const std::string path = globals.out.empty() ? "corpus.jsonl" : globals.out;
        np::write_corpus(corpus, path);
        if (!config.quiet)
            std::cout << "wrote " << corpus.sentences.size() << " sentences, |V| "
                      << corpus.vocab.size() << " -> " << path << '\n';
        return np::kExitOk;
    }

    if (train_cmd->parsed()) {
        const np::ConceptCorpus corpus = np::read_corpus(train_corpus);
        const np::CorpusSplits splits =
            np::split_corpus(corpus, np::SplitRatios{}, config.corpus_seed);
        const auto tags = corpus.tag_set();
        const np::EncodedCorpus enc_train = np::encode_corpus(splits.train, tags);
        const np::EncodedCorpus enc_dev = np::encode_corpus(splits.dev, tags);

        np::ModelConfig mc;
        mc.n_layers = config.n_layers;
        mc.d_model = config.d_model;
        mc.n_heads = config.n_heads;
        mc.d_ffn = config.d_ffn;
        mc.vocab_size = corpus.vocab.size();
        mc.n_tags = tags.size();
        std::size_t longest = 0;
        for (const auto& s : corpus.sentences) longest = std::max(longest, s.size());
        mc.max_len = std::max(config.max_len, longest);
        mc.dropout_rate = config.dropout_rate;
        mc.causal = config.causal;
        mc.seed = config.seeds.front();

        np::TaggerModel model(mc);
        if (!config.quiet)
            std::cout << "model: " << model.param_count() << " parameters, "
                      << mc.neuron_count() << " maskable neurons\n";
        np::train(model, enc_train, enc_dev,
                  train_options_from(config, config.seeds.front(), config.base_epochs));
        print_scores("dev", np::evaluate(model, enc_dev, config.n_threads), config.quiet);

        const std::string out_dir = globals.out.empty() ? "." : globals.out;
        fs::create_directories(out_dir);
        np::save_checkpoint(model, nullptr, out_dir + "/base.npckpt");
        return np::kExitOk;
    }

    if (extract->parsed()) {
        const np::LoadedCheckpoint loaded = np::load_checkpoint(ex_ckpt);
        const np::ConceptCorpus corpus = np::read_corpus(ex_corpus);
        const np::ActivationMatrix matrix =
            np::extract_activations(loaded.model, corpus, config.n_threads);
        const std::string path = globals.out.empty() ? "acts.nplab" : globals.out;
        np::write_dump(matrix, path);
        if (!config.quiet)
            std::cout << "wrote " << matrix.n_rows << " x " << matrix.n_cols << " -> " << path
                      << '\n';
        return np::kExitOk;
    }

    if (rank_cmd->parsed()) {
        const np::ActivationMatrix matrix = np::read_dump(rank_dump);
        const np::ConceptLabel target = np::ConceptLabel::parse(config.concept_label);
        const auto labels = np::binary_labels_from_meta(matrix, target);
        std::size_t positives = 0;
        for (auto y : labels) positives += y;
        if (positives == 0 && !config.quiet)
            std::cerr << "warning: concept " << config.concept_label
                      << " absent from dump metadata; labels are all-negative\n";
        np::NeuronRanking ranking;
        if (config.ranker == "linear_probe") {
            np::ProbeOptions opts;
            opts.lambdas = {config.probe_lambda};
            ranking = np::linear_probe_rank(matrix, labels, opts);
        } else {
            const np::ClassMeans means =
                np::class_mean_vectors(matrix, labels, {"rest", config.concept_label});
            ranking = np::probeless_rank(means, 1);
        }
        np::PruneMask all(matrix.n_layers_plus1, matrix.d);
        const np::SaliencyTable table =
            np::saliency_scores(ranking, config.saliency_group_size, true, all);
        const std::string path = globals.out.empty() ? "ranking.csv" : globals.out;
        np::write_file_text(path, np::export_ranking_csv(ranking, table, matrix.d));
        if (!config.quiet) std::cout << "wrote ranking -> " << path << '\n';
        return np::kExitOk;
    }

    if (prune_cmd->parsed()) {
        np::LoadedCheckpoint loaded = np::load_checkpoint(pr_ckpt);
        const np::ModelConfig& mc = loaded.model.config();
        np::PruneMask mask;
        if (config.prune_mode == "random") {
            const std::size_t count = static_cast<std::size_t>(
                config.prune_fraction * static_cast<double>(mc.neuron_count()));
            mask = np::random_mask(count, mc.n_layers + 1, mc.d_model, config.seeds.front());
        } else {
            if (pr_dump.empty())
                throw np::config_error("prune: --dump is required in concept mode");
            const np::ActivationMatrix matrix = np::read_dump(pr_dump);
            const auto labels =
                np::binary_labels_from_meta(matrix, np::ConceptLabel::parse(config.concept_label));
            const np::ClassMeans means =
                np::class_mean_vectors(matrix, labels, {"rest", config.concept_label});
            const np::NeuronRanking ranking = np::probeless_rank(means, 1);
            mask = np::build_mask(ranking, config.prune_fraction, mc.n_layers + 1, mc.d_model);
        }
        np::apply_mask(loaded.model, mask);
        const std::string out_dir = globals.out.empty() ? "." : globals.out;
        fs::create_directories(out_dir);
        np::save_checkpoint(loaded.model, nullptr, out_dir + "/pruned.npckpt");
        np::write_file_text(out_dir + "/mask.csv", np::export_mask_csv(mask));
        if (!config.quiet)
            std::cout << "pruned " << mask.pruned_count() << "/" << mask.size() << " neurons\n";
        return np::kExitOk;
    }

    if (retrain_cmd->parsed()) {
        np::LoadedCheckpoint loaded = np::load_checkpoint(rt_ckpt);
        const np::ConceptCorpus corpus = np::read_corpus(rt_corpus);
        const np::CorpusSplits splits =
            np::split_corpus(corpus, np::SplitRatios{}, config.corpus_seed);
        const auto tags = corpus.tag_set();
        const np::EncodedCorpus enc_train = np::encode_corpus(splits.train, tags);
        const np::EncodedCorpus enc_dev = np::encode_corpus(splits.dev, tags);
        const std::string out_dir = globals.out.empty() ? "." : globals.out;
        fs::create_directories(out_dir);
        const np::SnapshotSink sink = [&](std::size_t epoch, const np::TaggerModel& m,
                                          const np::OptimizerState& opt) {
            np::save_checkpoint(m, &opt,
                                out_dir + "/retrained_" + std::to_string(epoch) + ".npckpt");
        };
        np::train(loaded.model, enc_train, enc_dev,
                  train_options_from(config, config.seeds.front(), config.max_retrain_epochs),
                  sink);
        print_scores("dev", np::evaluate(loaded.model, enc_dev, config.n_threads), config.quiet);
        return np::kExitOk;
    }

    if (hats_cmd->parsed()) {
        const np::ActivationMatrix matrix = np::read_dump(hats_dump);
        np::HatOptions opts;
        opts.k = hats_k;
        nlohmann::json out = nlohmann::json::array();
        std::istringstream in(hats_neurons);
        std::string item;
        while (std::getline(in, item, ',')) {
            const auto neuron = static_cast<std::uint32_t>(std::stoul(item));
            const np::HatSet set = np::extract_hats(matrix, neuron, opts);
            nlohmann::json rec;
            rec["neuron"] = neuron;
            rec["degenerate"] = set.degenerate;
            auto& entries = rec["entries"] = nlohmann::json::array();
            for (const auto& e : set.entries)
                entries.push_back({{"token", e.token}, {"score", e.score}});
            out.push_back(std::move(rec));
        }
        const std::string path = globals.out.empty() ? "hats.json" : globals.out;
        np::write_file_text(path, out.dump(2) + "\n");
        if (!config.quiet) std::cout << "wrote HATs -> " << path << '\n';
        return np::kExitOk;
    }

    if (sim_cmd->parsed()) {
        const np::ActivationMatrix before = np::read_dump(sim_before);
        const np::ActivationMatrix after = np::read_dump(sim_after);
        np::EmbeddingTable table;
        if (!sim_import.empty()) {
            table = np::import_embeddings(sim_import);
        } else if (!sim_corpus.empty()) {
            table = np::train_embeddings(np::read_corpus(sim_corpus), config.embed_dim,
                                         config.embed_window);
        } else {
            throw np::config_error("similarity: need --embed-corpus or --import-embeddings");
        }
        if (before.n_cols != after.n_cols)
            throw np::data_error("similarity: dumps have different neuron grids");

        const np::ConceptLabel target = np::ConceptLabel::parse(config.concept_label);
        const auto labels = np::binary_labels_from_meta(after, target);
        const np::ClassMeans means =
            np::class_mean_vectors(after, labels, {"rest", config.concept_label});
        const np::NeuronRanking ranking = np::probeless_rank(means, 1);
        np::PruneMask all(after.n_layers_plus1, after.d);
        const np::SaliencyTable saliency =
            np::saliency_scores(ranking, config.saliency_group_size, true, all);

        std::vector<np::SimilarityRecord> records;
        for (std::uint32_t n = 0; n < after.n_cols; ++n) {
            const np::HatSet h_before = np::extract_hats(before, n);
            const np::HatSet h_after = np::extract_hats(after, n);
            np::SimilarityRecord rec = np::concept_similarity(h_before, h_after, table);
            rec.neuron = n;
            rec.saliency = saliency.saliency[n];
            records.push_back(std::move(rec));
        }
        const np::ScatterData scatter = np::similarity_saliency_join(
            records, saliency, after.d, config.similarity_threshold);
        const std::string path = globals.out.empty() ? "scatter.csv" : globals.out;
        np::write_file_text(path, np::export_scatter_csv(scatter));
        if (!config.quiet) std::cout << "wrote scatter -> " << path << '\n';
        return np::kExitOk;
    }

    if (report_cmd->parsed()) {
        std::vector<std::map<std::string, np::Prf>> runs;
        std::vector<std::string> stage_order;
        std::vector<fs::path> seed_dirs;
        for (const auto& entry : fs::directory_iterator(report_dir))
            if (entry.is_directory() && entry.path().filename().string().rfind("seed_", 0) == 0)
                seed_dirs.push_back(entry.path());
        std::sort(seed_dirs.begin(), seed_dirs.end());
        for (const auto& dir : seed_dirs) {
            const auto path = dir / "reports" / "summary.json";
            const auto bytes = np::read_file_bytes(path.string());
            const auto summary = nlohmann::json::parse(bytes.begin(), bytes.end());
            std::map<std::string, np::Prf> run;
            for (const auto& [stage, rec] : summary.at("stage_metrics").items()) {
                np::Prf prf;
                prf.precision = rec.at("precision").get<double>();
                prf.recall = rec.at("recall").get<double>();
                prf.f1 = rec.at("f1").get<double>();
                run[stage] = prf;
                if (runs.empty() &&
                    std::find(stage_order.begin(), stage_order.end(), stage) == stage_order.end())
                    stage_order.push_back(stage);
            }
            runs.push_back(std::move(run));
        }
        if (runs.empty()) throw np::data_error("report: no seed_* directories under " + report_dir);
        // base, pruned, then retrained_k ascending
        std::sort(stage_order.begin(), stage_order.end(),
                  [](const std::string& a, const std::string& b) {
                      auto key = [](const std::string& s) -> long {
                          if (s == "base") return -2;
                          if (s == "pruned") return -1;
                          return std::stol(s.substr(s.rfind('_') + 1));
                      };
                      return key(a) < key(b);
                  });
        const np::Report perf = np::performance_table(stage_order, runs);
        const std::string out_dir = globals.out.empty() ? report_dir : globals.out;
        fs::create_directories(out_dir);
        np::write_file_text(out_dir + "/performance.csv", perf.csv);
        np::write_file_text(out_dir + "/performance.json", perf.json);
        if (!config.quiet) std::cout << "wrote aggregate -> " << out_dir << "/performance.csv\n";
        return np::kExitOk;
    }

    if (exp->parsed()) {
        np::ExperimentResult result;
        if (exp_run->parsed()) result = np::run_neuroplasticity(config);
        else if (exp_random->parsed()) result = np::run_random_baseline(config);
        else if (exp_sub->parsed()) result = np::run_subconcept(config);
        if (!config.quiet) {
            for (const auto& seed : result.seeds)
                std::cout << "seed " << seed.seed << ": base F1 "
                          << np::format_fixed(seed.base_f1, 3) << " -> pruned "
                          << np::format_fixed(seed.pruned_f1, 3) << " -> final "
                          << np::format_fixed(seed.final_f1, 3)
                          << (seed.recovered ? " (recovered)" : " (not recovered)") << '\n';
            std::cout << "reports -> " << result.directory << '\n';
        }
        return np::kExitOk;
    }

    return np::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const np::config_error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return np::kExitConfigError;
    } catch (const np::numeric_error& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return np::kExitNumericError;
    } catch (const np::data_error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return np::kExitDataError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return np::kExitDataError;
    }
}
