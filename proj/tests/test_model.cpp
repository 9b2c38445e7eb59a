#include <cmath>

#include "doctest.h"
#include "nplast/model.hpp"
#include "nplast/pruning.hpp"

using namespace np;

namespace {

ModelConfig small_config() {
    ModelConfig c;
    c.n_layers = 2;
    c.d_model = 16;
    c.n_heads = 4;
    c.d_ffn = 32;
    c.vocab_size = 20;
    c.n_tags = 5;
    c.max_len = 8;
    c.dropout_rate = 0.0;
    c.seed = 3;
    return c;
}

}  // namespace

TEST_CASE("config validation") {
    ModelConfig c = small_config();
    CHECK_NOTHROW(c.validate());
    SUBCASE("d must divide heads") {
        c.d_model = 65;
        c.n_heads = 4;
        CHECK_THROWS_AS(c.validate(), config_error);
    }
    SUBCASE("counts must be positive") {
        c.n_layers = 0;
        CHECK_THROWS_AS(c.validate(), config_error);
    }
    SUBCASE("max_len lower bound") {
        c.max_len = 1;
        CHECK_THROWS_AS(c.validate(), config_error);
    }
}

TEST_CASE("default-sized model exposes (L+1)*d maskable neurons") {
    ModelConfig c = small_config();
    c.n_layers = 4;
    c.d_model = 64;
    c.n_heads = 4;
    c.d_ffn = 256;
    CHECK(c.neuron_count() == 320);
}

TEST_CASE("initialization is deterministic per seed") {
    const TaggerModel a(small_config());
    const TaggerModel b(small_config());
    ModelConfig other = small_config();
    other.seed = 4;
    const TaggerModel c(other);

    REQUIRE(a.params().size() == b.params().size());
    for (std::size_t i = 0; i < a.params().size(); ++i)
        CHECK(a.params()[i].data == b.params()[i].data);

    bool any_diff = false;
    for (std::size_t i = 0; i < a.params().size(); ++i)
        if (a.params()[i].data != c.params()[i].data) any_diff = true;
    CHECK(any_diff);
    CHECK(a.param_count() > 0);
}

TEST_CASE("forward shapes, softmax normalization and determinism") {
    const TaggerModel model(small_config());
    const std::vector<TokenIds> batch{{1, 2, 3}, {4, 5, 6, 7, 8}};
    const auto out = model.forward(batch);

    REQUIRE(out.size() == 2);
    CHECK(out[0].logits.size() == 3 * 5);
    CHECK(out[1].logits.size() == 5 * 5);
    CHECK(out[0].reps.size() == 3);  // layers 0..L
    CHECK(out[0].reps[0].size() == 3 * 16);

    for (std::size_t t = 0; t < 5; ++t) {
        std::vector<double> row(out[1].logits.begin() + t * 5, out[1].logits.begin() + t * 5 + 5);
        const auto p = softmax(row);
        double sum = 0.0;
        for (double v : p) sum += v;
        CHECK(std::abs(sum - 1.0) < 1e-6);
    }

    const auto again = model.forward(batch);
    CHECK(again[0].logits == out[0].logits);
    CHECK(again[1].reps[2] == out[1].reps[2]);
}

TEST_CASE("forward rejects bad input") {
    const TaggerModel model(small_config());
    CHECK_THROWS_AS(model.forward_sentence({1, 2, 99}), data_error);
    CHECK_THROWS_AS(model.forward_sentence({1, 2, 3, 4, 5, 6, 7, 8, 9}), data_error);
}

TEST_CASE("masked neurons produce exactly zero representations") {
    TaggerModel model(small_config());
    PruneMask mask = PruneMask::all_alive(model.config());
    mask.set_global(1 * 16 + 5, false);  // layer 1, index 5
    mask.set_global(0 * 16 + 2, false);  // embedding layer, index 2
    apply_mask(model, mask);

    const auto out = model.forward({{1, 2, 3, 4}});
    for (std::size_t t = 0; t < 4; ++t) {
        CHECK(out[0].reps[1][t * 16 + 5] == 0.0);
        CHECK(out[0].reps[0][t * 16 + 2] == 0.0);
    }
}

TEST_CASE("uniform logits give ln(n_tags) loss") {
    TaggerModel model(small_config());
    // zero classifier head -> identical logits for every tag
    auto& head_w = model.params()[model.tensor_index("head_w")].data;
    auto& head_b = model.params()[model.tensor_index("head_b")].data;
    std::fill(head_w.begin(), head_w.end(), 0.0);
    std::fill(head_b.begin(), head_b.end(), 0.0);

    Gradients grads = model.make_gradients();
    const double loss =
        model.loss_and_gradients({{1, 2, 3, 4}}, {{0, 1, 2, 3}}, grads);
    CHECK(loss == doctest::Approx(std::log(5.0)).epsilon(1e-12));
}

TEST_CASE("loss_and_gradients input validation") {
    TaggerModel model(small_config());
    Gradients grads = model.make_gradients();
    CHECK_THROWS_AS(model.loss_and_gradients({}, {}, grads), data_error);
    CHECK_THROWS_AS(model.loss_and_gradients({{1, 2}}, {{0}}, grads), data_error);
    CHECK_THROWS_AS(model.loss_and_gradients({{1, 2}}, {{0, 99}}, grads), data_error);
}

TEST_CASE("gradients into masked units vanish") {
    TaggerModel model(small_config());
    PruneMask mask = PruneMask::all_alive(model.config());
    const std::size_t masked_index = 7;
    mask.set_global(2 * 16 + masked_index, false);  // top layer
    mask.set_global(0 * 16 + 3, false);             // embedding layer
    apply_mask(model, mask);

    Gradients grads = model.make_gradients();
    model.loss_and_gradients({{1, 2, 3}, {4, 5}}, {{0, 1, 2}, {3, 4}}, grads);

    // producing params of the masked top-layer unit: block 1 ln2 gain/bias
    const std::size_t ln2g = model.tensor_index("blk1.ln2_g");
    const std::size_t ln2b = model.tensor_index("blk1.ln2_b");
    CHECK(grads.g[ln2g][masked_index] == 0.0);
    CHECK(grads.g[ln2b][masked_index] == 0.0);
    // outgoing: classifier head column
    const std::size_t head_w = model.tensor_index("head_w");
    for (std::size_t tag = 0; tag < 5; ++tag)
        CHECK(grads.g[head_w][tag * 16 + masked_index] == 0.0);
    // producing params of the masked layer-0 unit: embedding layer norm
    const std::size_t lng = model.tensor_index("ln_emb_g");
    const std::size_t lnb = model.tensor_index("ln_emb_b");
    CHECK(grads.g[lng][3] == 0.0);
    CHECK(grads.g[lnb][3] == 0.0);
}

TEST_CASE("deterministic gradients under a fixed dropout seed and thread count") {
    ModelConfig c = small_config();
    c.dropout_rate = 0.2;
    TaggerModel model(c);
    Gradients g1 = model.make_gradients();
    Gradients g2 = model.make_gradients();
    const std::uint64_t seed = 99;
    const std::vector<TokenIds> batch{{1, 2, 3}, {4, 5, 6}, {7, 8}};
    const std::vector<std::vector<std::uint32_t>> gold{{0, 1, 2}, {3, 4, 0}, {1, 2}};

    const double l1 = model.loss_and_gradients(batch, gold, g1, &seed, 2);
    const double l2 = model.loss_and_gradients(batch, gold, g2, &seed, 2);
    CHECK(l1 == l2);
    for (std::size_t i = 0; i < g1.g.size(); ++i) CHECK(g1.g[i] == g2.g[i]);
}

TEST_CASE("causal variant masks future positions") {
    ModelConfig c = small_config();
    c.causal = true;
    const TaggerModel model(c);
    // With causal attention, the first token's representation cannot depend
    // on later tokens.
    const auto a = model.forward({{1, 2, 3}});
    const auto b = model.forward({{1, 9, 10}});
    for (std::size_t i = 0; i < 16; ++i) {
        CHECK(a[0].reps[2][i] == doctest::Approx(b[0].reps[2][i]).epsilon(1e-12));
    }
}
