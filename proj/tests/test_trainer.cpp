#include <cmath>

#include "doctest.h"
#include "nplast/corpus.hpp"
#include "nplast/trainer.hpp"

using namespace np;

namespace {

struct Fixture {
    ConceptCorpus corpus;
    EncodedCorpus train_data;
    EncodedCorpus dev_data;
    ModelConfig config;
};

Fixture make_fixture(std::size_t n_sentences = 120) {
    Fixture f;
    f.corpus = generate_corpus(default_corpus_spec(n_sentences, 0.15), 9);
    const CorpusSplits splits = split_corpus(f.corpus, SplitRatios{}, 9);
    const auto tags = f.corpus.tag_set();
    f.train_data = encode_corpus(splits.train, tags);
    f.dev_data = encode_corpus(splits.dev, tags);

    f.config.n_layers = 2;
    f.config.d_model = 16;
    f.config.n_heads = 2;
    f.config.d_ffn = 32;
    f.config.vocab_size = f.corpus.vocab.size();
    f.config.n_tags = tags.size();
    std::size_t longest = 0;
    for (const auto& s : f.corpus.sentences) longest = std::max(longest, s.size());
    f.config.max_len = longest;
    f.config.dropout_rate = 0.1;
    f.config.seed = 17;
    return f;
}

TrainOptions quick_options(std::size_t epochs, std::size_t interval) {
    TrainOptions opts;
    opts.epochs = epochs;
    opts.batch_size = 8;
    opts.base_lr = 3e-4;
    opts.seed = 3;
    opts.snapshot_interval = interval;
    opts.n_threads = 2;
    return opts;
}

}  // namespace

TEST_CASE("snapshots fire on the interval plus the final epoch") {
    Fixture f = make_fixture(40);

    SUBCASE("epochs=8, interval=2 -> {2,4,6,8}") {
        TaggerModel model(f.config);
        std::vector<std::size_t> seen;
        train(model, f.train_data, f.dev_data, quick_options(8, 2),
              [&](std::size_t epoch, const TaggerModel&, const OptimizerState&) {
                  seen.push_back(epoch);
              });
        CHECK(seen == std::vector<std::size_t>{2, 4, 6, 8});
    }
    SUBCASE("epochs=7, interval=3 -> {3,6,7}") {
        TaggerModel model(f.config);
        std::vector<std::size_t> seen;
        train(model, f.train_data, f.dev_data, quick_options(7, 3),
              [&](std::size_t epoch, const TaggerModel&, const OptimizerState&) {
                  seen.push_back(epoch);
              });
        CHECK(seen == std::vector<std::size_t>{3, 6, 7});
    }
}

TEST_CASE("early stop ends training at the recovery epoch") {
    Fixture f = make_fixture(40);
    TaggerModel model(f.config);
    TrainOptions opts = quick_options(8, 2);
    opts.recovery_target = -1.0;  // any dev F1 qualifies
    opts.early_stop = true;
    std::vector<std::size_t> seen;
    const TrainReport report =
        train(model, f.train_data, f.dev_data, opts,
              [&](std::size_t epoch, const TaggerModel&, const OptimizerState&) {
                  seen.push_back(epoch);
              });
    CHECK(report.stopped_early);
    CHECK(report.reached_target);
    CHECK(report.epochs.size() == 1);
    CHECK(seen == std::vector<std::size_t>{1});
}

TEST_CASE("training is deterministic for a fixed seed") {
    Fixture f = make_fixture(60);
    TaggerModel a(f.config);
    TaggerModel b(f.config);
    const TrainReport ra = train(a, f.train_data, f.dev_data, quick_options(2, 2));
    const TrainReport rb = train(b, f.train_data, f.dev_data, quick_options(2, 2));

    for (std::size_t i = 0; i < a.params().size(); ++i)
        CHECK(a.params()[i].data == b.params()[i].data);
    REQUIRE(ra.epochs.size() == rb.epochs.size());
    for (std::size_t e = 0; e < ra.epochs.size(); ++e)
        CHECK(ra.epochs[e].mean_loss == rb.epochs[e].mean_loss);

    TaggerModel c(f.config);
    TrainOptions other = quick_options(2, 2);
    other.seed = 4;
    train(c, f.train_data, f.dev_data, other);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.params().size(); ++i)
        if (a.params()[i].data != c.params()[i].data) any_diff = true;
    CHECK(any_diff);
}

TEST_CASE("loss decreases over training on the synthetic task, 3 seeds") {
    Fixture f = make_fixture(200);
    for (std::uint64_t seed : {3ULL, 4ULL, 5ULL}) {
        CAPTURE(seed);
        ModelConfig config = f.config;
        config.seed = seed;
        TaggerModel model(config);
        TrainOptions opts = quick_options(4, 4);
        opts.seed = seed;
        const TrainReport report = train(model, f.train_data, f.dev_data, opts);
        REQUIRE(report.epochs.size() == 4);
        CHECK(report.epochs.back().mean_loss < report.epochs.front().mean_loss);
        // jitter-tolerant monotonicity
        for (std::size_t e = 1; e < report.epochs.size(); ++e)
            CHECK(report.epochs[e].mean_loss <= report.epochs[e - 1].mean_loss + 0.05);
        CHECK(std::isfinite(report.epochs.back().mean_loss));
    }
}

TEST_CASE("encode_corpus validates tokens and tags") {
    Fixture f = make_fixture(20);
    CHECK_THROWS_AS(encode_corpus(f.corpus, {"O"}), data_error);  // tag set too small

    const auto tags = f.corpus.tag_set();
    const EncodedCorpus enc = encode_corpus(f.corpus, tags);
    CHECK(enc.sentences.size() == f.corpus.sentences.size());
    const auto decoded = decode_tags(enc.tags, tags);
    for (std::size_t s = 0; s < decoded.size(); ++s)
        for (std::size_t t = 0; t < decoded[s].size(); ++t)
            CHECK(decoded[s][t] == f.corpus.sentences[s][t].bio_tag);
}
