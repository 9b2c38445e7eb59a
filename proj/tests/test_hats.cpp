#include <algorithm>

#include "doctest.h"
#include "nplast/hats.hpp"

using namespace np;

namespace {

ActivationMatrix column_matrix(const std::vector<std::pair<std::string, float>>& rows) {
    ActivationMatrix m;
    m.n_rows = static_cast<std::uint32_t>(rows.size());
    m.n_layers_plus1 = 1;
    m.d = 1;
    m.n_cols = 1;
    m.model_fingerprint.assign(32, 0);
    for (const auto& [text, value] : rows) {
        m.values.push_back(value);
        TokenMeta meta;
        meta.text = text;
        m.token_meta.push_back(meta);
    }
    return m;
}

}  // namespace

TEST_CASE("variance contributions on the hand example") {
    // activations a:5, b:1, c:0 -> mean 2, contributions (9, 1, 4)
    const ActivationMatrix m = column_matrix({{"a", 5}, {"b", 1}, {"c", 0}});
    const HatSet set = extract_hats(m, 0);
    REQUIRE(set.entries.size() == 3);
    CHECK(set.entries[0].token == "a");
    CHECK(set.entries[0].score == doctest::Approx(1.0));
    CHECK(set.entries[1].token == "c");
    CHECK(set.entries[1].score == doctest::Approx(4.0 / 9));
    CHECK(set.entries[2].token == "b");
    CHECK(set.entries[2].score == doctest::Approx(1.0 / 9));
    CHECK_FALSE(set.degenerate);
}

TEST_CASE("k larger than the unique-token count returns everything") {
    const ActivationMatrix m = column_matrix({{"a", 5}, {"b", 1}});
    HatOptions opts;
    opts.k = 10;
    CHECK(extract_hats(m, 0, opts).entries.size() == 2);
}

TEST_CASE("zero-variance neuron yields a degenerate empty set") {
    const ActivationMatrix m = column_matrix({{"a", 0}, {"b", 0}, {"c", 0}});
    const HatSet set = extract_hats(m, 0);
    CHECK(set.degenerate);
    CHECK(set.entries.empty());
}

TEST_CASE("per-type aggregation keeps token strings unique, max across occurrences") {
    const ActivationMatrix m =
        column_matrix({{"a", 5}, {"a", -5}, {"b", 2}, {"b", 2}});
    const HatSet set = extract_hats(m, 0);
    REQUIRE(set.entries.size() == 2);
    CHECK(set.entries[0].token == "a");  // (-5 - 1)^2 = 36 beats (5-1)^2 = 16
    CHECK(set.entries[0].score == 1.0);
    std::vector<std::string> tokens;
    for (const auto& e : set.entries) tokens.push_back(e.token);
    std::sort(tokens.begin(), tokens.end());
    CHECK(std::adjacent_find(tokens.begin(), tokens.end()) == tokens.end());

    SUBCASE("per-occurrence alternative keeps duplicates") {
        HatOptions opts;
        opts.per_type = false;
        opts.k = 3;
        const HatSet occ = extract_hats(m, 0, opts);
        REQUIRE(occ.entries.size() == 3);
        CHECK(occ.entries[0].token == "a");
        CHECK(occ.entries[1].token == "a");
    }
}

TEST_CASE("duplicating the corpus leaves normalized scores unchanged") {
    const ActivationMatrix once = column_matrix({{"a", 5}, {"b", 1}, {"c", 0}});
    const ActivationMatrix twice =
        column_matrix({{"a", 5}, {"b", 1}, {"c", 0}, {"a", 5}, {"b", 1}, {"c", 0}});
    const HatSet s1 = extract_hats(once, 0);
    const HatSet s2 = extract_hats(twice, 0);
    REQUIRE(s1.entries.size() == s2.entries.size());
    for (std::size_t i = 0; i < s1.entries.size(); ++i) {
        CHECK(s1.entries[i].token == s2.entries[i].token);
        CHECK(s1.entries[i].score == doctest::Approx(s2.entries[i].score).epsilon(1e-12));
    }
}

TEST_CASE("re-ranking oracle: entries equal a brute-force sort") {
    Rng rng(0xa7a7);
    // one neuron, 400 tokens over a vocabulary of 60 types
    std::vector<std::pair<std::string, float>> rows;
    for (int i = 0; i < 400; ++i)
        rows.emplace_back("t" + std::to_string(rng.next_below(60)),
                          static_cast<float>(rng.next_normal() * 3));
    const ActivationMatrix m = column_matrix(rows);
    HatOptions opts;
    opts.k = 60;
    const HatSet set = extract_hats(m, 0, opts);

    double mean = 0.0;
    for (const auto& [t, v] : rows) mean += v;
    mean /= static_cast<double>(rows.size());
    std::map<std::string, double> best;
    for (const auto& [t, v] : rows) {
        const double c = (v - mean) * (v - mean);
        auto [it, fresh] = best.emplace(t, c);
        if (!fresh && c > it->second) it->second = c;
    }
    std::vector<std::pair<double, std::string>> oracle;
    for (const auto& [t, c] : best) oracle.emplace_back(c, t);
    std::sort(oracle.begin(), oracle.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });

    REQUIRE(set.entries.size() == oracle.size());
    CHECK(set.entries[0].score == 1.0);
    for (std::size_t i = 0; i < oracle.size(); ++i) {
        CHECK(set.entries[i].token == oracle[i].second);
        CHECK(set.entries[i].score ==
              doctest::Approx(oracle[i].first / oracle[0].first).epsilon(1e-12));
    }
}

TEST_CASE("hat evolution flags reappearing base tokens") {
    const ActivationMatrix base = column_matrix({{"x", 9}, {"y", 5}, {"z", 0}, {"w", 1}});
    const ActivationMatrix later = column_matrix({{"x", 8}, {"y", 0.1f}, {"z", 6}, {"w", 0}});
    HatOptions opts;
    opts.k = 2;

    const HatEvolution evo =
        hat_evolution(0, {&base, &later}, {"base", "retrained_8"}, opts);
    REQUIRE(evo.snapshots.size() == 2);
    CHECK(evo.snapshots[0].reappeared.empty());
    // base top-2 = {x, z}; later top-2 = {x, z} as well -> both flagged
    REQUIRE_FALSE(evo.snapshots[1].reappeared.empty());
    CHECK(std::count(evo.snapshots[1].reappeared.begin(), evo.snapshots[1].reappeared.end(),
                     "x") == 1);

    SUBCASE("single snapshot has no flags") {
        const HatEvolution single = hat_evolution(0, {&base}, {"base"}, opts);
        CHECK(single.snapshots.size() == 1);
        CHECK(single.snapshots[0].reappeared.empty());
    }
    SUBCASE("mismatched corpora raise an alignment error") {
        const ActivationMatrix other = column_matrix({{"q", 1}, {"y", 5}, {"z", 0}, {"w", 1}});
        CHECK_THROWS_AS(hat_evolution(0, {&base, &other}, {"a", "b"}, opts), data_error);
    }
}

TEST_CASE("engineered remap: disjoint HAT sets produce no flags") {
    // neuron fires on lexicon A pre-prune and lexicon B post-retrain; the
    // inactive tokens sit close to the mean so only the firing lexicon
    // contributes variance
    const ActivationMatrix before = column_matrix(
        {{"apple", 10}, {"avocado", 8}, {"berry", 1}, {"banana", 1}, {"cherry", 1}});
    const ActivationMatrix after = column_matrix(
        {{"apple", 1}, {"avocado", 1}, {"berry", 10}, {"banana", 8}, {"cherry", 1}});
    HatOptions opts;
    opts.k = 2;
    const HatEvolution evo = hat_evolution(0, {&before, &after}, {"base", "retrained_2"}, opts);
    REQUIRE(evo.snapshots[0].hats.entries.size() == 2);
    CHECK(evo.snapshots[0].hats.entries[0].token == "apple");
    CHECK(evo.snapshots[1].hats.entries[0].token == "berry");
    CHECK(evo.snapshots[1].reappeared.empty());
}
