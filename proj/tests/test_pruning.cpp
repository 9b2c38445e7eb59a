#include "doctest.h"
#include "nplast/pruning.hpp"

using namespace np;

namespace {

NeuronRanking identity_ranking(std::size_t n) {
    NeuronRanking r;
    r.order.resize(n);
    r.scores.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        r.order[i] = static_cast<std::uint32_t>(i);
        r.scores[i] = static_cast<double>(n - i);
    }
    return r;
}

ModelConfig prune_config() {
    ModelConfig c;
    c.n_layers = 2;
    c.d_model = 8;
    c.n_heads = 2;
    c.d_ffn = 16;
    c.vocab_size = 10;
    c.n_tags = 3;
    c.max_len = 6;
    c.dropout_rate = 0.0;
    c.seed = 5;
    return c;
}

}  // namespace

TEST_CASE("build_mask prunes floor(fraction * N) top-ranked neurons") {
    const NeuronRanking r320 = identity_ranking(320);
    CHECK(build_mask(r320, 0.5, 5, 64).pruned_count() == 160);
    CHECK(build_mask(r320, 0.0, 5, 64).pruned_count() == 0);
    CHECK(build_mask(identity_ranking(5), 0.5, 1, 5).pruned_count() == 2);  // floor rule

    const PruneMask m = build_mask(identity_ranking(10), 0.3, 2, 5);
    for (std::uint32_t n = 0; n < 3; ++n) CHECK_FALSE(m.alive_global(n));
    for (std::uint32_t n = 3; n < 10; ++n) CHECK(m.alive_global(n));

    CHECK_THROWS_AS(build_mask(r320, 1.5, 5, 64), config_error);
}

TEST_CASE("random_mask: determinism, sizing and pool") {
    const PruneMask a = random_mask(7, 2, 8, 42);
    const PruneMask b = random_mask(7, 2, 8, 42);
    const PruneMask c = random_mask(7, 2, 8, 43);
    CHECK(a == b);
    CHECK(a.pruned_count() == 7);
    CHECK(c.pruned_count() == 7);
    CHECK_FALSE(a == c);

    CHECK(random_mask(16, 2, 8, 1).pruned_count() == 16);  // count == D
    CHECK_THROWS_AS(random_mask(17, 2, 8, 1), data_error);

    const std::vector<std::uint32_t> pool{0, 1, 2, 3};
    const PruneMask pooled = random_mask(4, 2, 8, 9, pool);
    for (std::uint32_t n = 0; n < 4; ++n) CHECK_FALSE(pooled.alive_global(n));
    for (std::uint32_t n = 4; n < 16; ++n) CHECK(pooled.alive_global(n));
}

TEST_CASE("apply_mask with all-ones leaves parameters unchanged") {
    TaggerModel model(prune_config());
    const auto before = model.params();
    apply_mask(model, PruneMask::all_alive(model.config()));
    for (std::size_t i = 0; i < before.size(); ++i)
        CHECK(model.params()[i].data == before[i].data);
}

TEST_CASE("apply_mask is idempotent and masks compose by minimum") {
    TaggerModel a(prune_config());
    TaggerModel b(prune_config());
    PruneMask m1 = PruneMask::all_alive(a.config());
    m1.set_global(3, false);
    m1.set_global(10, false);
    PruneMask m2 = PruneMask::all_alive(a.config());
    m2.set_global(10, false);
    m2.set_global(20, false);

    // idempotence
    apply_mask(a, m1);
    const auto once = a.params();
    apply_mask(a, m1);
    for (std::size_t i = 0; i < once.size(); ++i) CHECK(a.params()[i].data == once[i].data);

    // composition: A then B == min(A, B)
    apply_mask(a, m2);  // a now has m1 then m2 applied
    apply_mask(b, combine_masks(m1, m2));
    CHECK(a.mask() == b.mask());
    for (std::size_t i = 0; i < once.size(); ++i)
        CHECK(a.params()[i].data == b.params()[i].data);
}

TEST_CASE("masked-forward equals the weight-zeroed model bitwise") {
    TaggerModel masked(prune_config());
    PruneMask mask = PruneMask::all_alive(masked.config());
    mask.set_global(0 * 8 + 1, false);
    mask.set_global(1 * 8 + 4, false);
    mask.set_global(2 * 8 + 7, false);
    apply_mask(masked, mask);

    // same weights (already zeroed by apply_mask) but no mask multiplication
    TaggerModel zeroed(prune_config());
    zeroed.params() = masked.params();

    const std::vector<TokenIds> batch{{1, 2, 3, 4}, {5, 6}};
    const auto a = masked.forward(batch);
    const auto z = zeroed.forward(batch);
    for (std::size_t s = 0; s < batch.size(); ++s) {
        CHECK(a[s].logits == z[s].logits);
        for (std::size_t l = 0; l < a[s].reps.size(); ++l) CHECK(a[s].reps[l] == z[s].reps[l]);
    }
}

TEST_CASE("mask csv export") {
    PruneMask mask(1, 3);
    mask.set_global(1, false);
    const std::string csv = export_mask_csv(mask);
    CHECK(csv == "layer,index,alive\n0,0,1\n0,1,0\n0,2,1\n");
}
