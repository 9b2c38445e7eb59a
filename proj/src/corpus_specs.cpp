#include <set>
#include <string>
#include <vector>

#include "nplast/corpus.hpp"

namespace np {

namespace {

const char* kOnsets[] = {"b",  "br", "c",  "cl", "d",  "dr", "f",  "g",  "gr", "h",
                         "j",  "k",  "l",  "m",  "n",  "p",  "pr", "r",  "s",  "st",
                         "t",  "tr", "v",  "w",  "y",  "z",  "sh", "ch", "th", "qu"};
const char* kNuclei[] = {"a", "e", "i", "o", "u", "ai", "ea", "ou", "or", "ar", "el", "an"};
const char* kCodas[] = {"", "n", "l", "r", "s", "m", "nd", "rk", "st", "x"};

// Draws pronounceable stems like "brelan" or "torvis". Deterministic per rng.
std::string make_stem(Rng& rng, std::size_t syllables) {
    std::string out;
    for (std::size_t i = 0; i < syllables; ++i) {
        out += kOnsets[rng.next_below(std::size(kOnsets))];
        out += kNuclei[rng.next_below(std::size(kNuclei))];
        if (i + 1 == syllables) out += kCodas[rng.next_below(std::size(kCodas))];
    }
    return out;
}

std::vector<std::string> make_words(Rng& rng, std::size_t count,
                                    const std::vector<std::string>& suffixes,
                                    std::set<std::string>& used, std::size_t syllables = 2) {
    std::vector<std::string> out;
    while (out.size() < count) {
        std::string w = make_stem(rng, syllables);
        if (!suffixes.empty()) w += suffixes[rng.next_below(suffixes.size())];
        if (w.size() > 14) continue;
        if (!used.insert(w).second) continue;
        out.push_back(std::move(w));
    }
    return out;
}

std::size_t scaled(std::size_t base, double scale) {
    const auto n = static_cast<std::size_t>(static_cast<double>(base) * scale);
    return n < 4 ? 4 : n;
}

}  // namespace

CorpusSpec default_corpus_spec(std::size_t n_sentences, double scale) {
    CorpusSpec spec;
    spec.n_sentences = n_sentences;
    spec.max_len = 14;
    spec.entity_rate = 1.5;

    const ConceptLabel loc = ConceptLabel::parse("SEM:named_entity:location");
    const ConceptLabel loc_usa = ConceptLabel::parse("SEM:named_entity:location:usa");
    const ConceptLabel loc_canada = ConceptLabel::parse("SEM:named_entity:location:canada");
    const ConceptLabel loc_mexico = ConceptLabel::parse("SEM:named_entity:location:mexico");
    const ConceptLabel per = ConceptLabel::parse("SEM:named_entity:person");
    const ConceptLabel org = ConceptLabel::parse("SEM:named_entity:organization");
    const ConceptLabel misc = ConceptLabel::parse("SEM:named_entity:misc");

    spec.tag_names[loc] = "LOC";
    spec.tag_names[per] = "PER";
    spec.tag_names[org] = "ORG";
    spec.tag_names[misc] = "MISC";

    // Lexicons are synthesized from a fixed seed so the default spec is a
    // constant. Distinct suffix families per entity type give the tagger a
    // morphological signal on top of pure memorization.
    Rng rng(0x5eedc0de);
    std::set<std::string> used;

    const std::vector<std::string> city_suffix = {"ton", "ville", "burg", "ford",
                                                  "mont", "field", "port", "dale"};
    const std::vector<std::string> country_suffix = {"ia", "land", "stan", "ora"};
    const std::vector<std::string> surname_suffix = {"son", "man", "berg", "ley", "ski"};
    const std::vector<std::string> first_suffix = {"a", "o", "en", "is", "ra"};
    const std::vector<std::string> org_suffix = {"tech", "soft", "corp", "com", "ix"};
    const std::vector<std::string> org_tail_words = {"labs",  "group", "bank",
                                                     "media", "motors", "airways"};
    const std::vector<std::string> misc_suffix = {"ish", "ian", "ese", "ic", "ene"};

    spec.lexicons[loc_usa] = make_words(rng, scaled(110, scale), city_suffix, used);
    spec.lexicons[loc_canada] = make_words(rng, scaled(110, scale), city_suffix, used);
    spec.lexicons[loc_mexico] = make_words(rng, scaled(110, scale), city_suffix, used);
    spec.lexicons[loc] = make_words(rng, scaled(80, scale), country_suffix, used);

    const auto firsts = make_words(rng, scaled(120, scale), first_suffix, used);
    const auto lasts = make_words(rng, scaled(120, scale), surname_suffix, used);
    std::vector<std::string> people = firsts;
    for (std::size_t i = 0; i + 1 < lasts.size(); i += 2)
        people.push_back(firsts[rng.next_below(firsts.size())] + " " + lasts[i]);

    auto orgs = make_words(rng, scaled(120, scale), org_suffix, used);
    const auto org_heads = make_words(rng, scaled(70, scale), {}, used);
    for (const auto& head : org_heads)
        orgs.push_back(head + " " + org_tail_words[rng.next_below(org_tail_words.size())]);

    // Ambiguous surface forms: city names double as surnames or brand names,
    // so location-ness comes from sentence context rather than the lexical
    // form alone.
    const auto& usa_words = spec.lexicons[loc_usa];
    const auto& canada_words = spec.lexicons[loc_canada];
    const auto& mexico_words = spec.lexicons[loc_mexico];
    for (std::size_t i = 0; i < usa_words.size(); i += 2) people.push_back(usa_words[i]);
    for (std::size_t i = 1; i < usa_words.size(); i += 2) orgs.push_back(usa_words[i]);
    for (std::size_t i = 0; i < canada_words.size(); i += 2) people.push_back(canada_words[i]);
    for (std::size_t i = 1; i < canada_words.size(); i += 2) orgs.push_back(canada_words[i]);
    for (std::size_t i = 0; i < mexico_words.size(); i += 2) people.push_back(mexico_words[i]);
    for (std::size_t i = 1; i < mexico_words.size(); i += 2) orgs.push_back(mexico_words[i]);
    const auto& country_words = spec.lexicons[loc];
    for (std::size_t i = 0; i < country_words.size(); i += 2) orgs.push_back(country_words[i]);
    for (std::size_t i = 1; i < country_words.size(); i += 2) people.push_back(country_words[i]);

    spec.lexicons[per] = people;
    spec.lexicons[org] = orgs;

    spec.lexicons[misc] = make_words(rng, scaled(110, scale), misc_suffix, used);

    const std::string L = "{SEM:named_entity:location}";
    const std::string P = "{SEM:named_entity:person}";
    const std::string G = "{SEM:named_entity:organization}";
    const std::string M = "{SEM:named_entity:misc}";

    // Location-heavy slot mix, mirroring the skew of standard NER corpora
    // where locations are the most frequent entity type.
    const std::vector<std::string> raw_templates = {
        P + " visited " + L + " last week",
        P + " met " + P + " in " + L,
        "the " + M + " delegation arrived in " + L + " today",
        G + " opened a new office in " + L,
        P + " works for " + G + " now",
        "analysts at " + G + " praised the " + M + " deal",
        L + " hosted the " + M + " summit this year",
        P + " flew from " + L + " to " + L,
        "the mayor of " + L + " thanked " + P,
        "the road from " + L + " to " + L + " reopened",
        P + " returned to " + L + " after the " + M + " festival",
        "shares of " + G + " fell sharply on friday",
        "heavy rain flooded parts of " + L + " yesterday",
        G + " hired " + P + " in " + L,
        "residents of " + L + " celebrated the " + M + " holiday",
        P + " and " + P + " signed the agreement in " + L,
        "the " + M + " team lost the final in " + L,
        "a spokesman for " + G + " declined to comment",
        P + " wrote a book about " + L,
        "the " + M + " exhibition opened in " + L + " on monday",
        "trains between " + L + " and " + L + " were delayed",
        P + " sold his farm near " + L,
        G + " shipped the first " + M + " devices",
        "reporters asked " + P + " about the " + M + " affair",
        "officials from " + L + " met executives of " + G,
        "the border near " + L + " stayed open",
        P + " joined " + G + " as an adviser",
        "tourists from " + L + " crowded the old town",
        "markets were quiet for most of the day",
        "officials said the talks would continue next month",
        "the committee will publish its report soon",
        "prices rose slightly in the second quarter",
        "no decision has been made so far",
        "the weather stayed cold through the weekend",
        "several roads remain closed after the storm",
        "the study found no clear evidence of change",
        // non-entity usages of misc words: the tagger has to read context to
        // separate "the nordic weather" from "the nordic team"
        "the {O:SEM:named_entity:misc} weather lasted all week",
        "his {O:SEM:named_entity:misc} style won many admirers",
        "a very {O:SEM:named_entity:misc} design was chosen",
        "the {O:SEM:named_entity:misc} food is popular here",
    };
    for (const auto& t : raw_templates) {
        std::vector<std::string> tokens;
        std::string tok;
        for (char c : t + " ") {
            if (c == ' ') {
                if (!tok.empty()) tokens.push_back(tok);
                tok.clear();
            } else {
                tok.push_back(c);
            }
        }
        spec.templates.push_back(std::move(tokens));
    }
    return spec;
}

CorpusSpec hat_fixture_spec(std::size_t n_sentences) {
    CorpusSpec spec;
    spec.n_sentences = n_sentences;
    spec.max_len = 10;
    spec.entity_rate = 1.5;

    const ConceptLabel loc = ConceptLabel::parse("SEM:named_entity:location");
    const ConceptLabel per = ConceptLabel::parse("SEM:named_entity:person");
    const ConceptLabel org = ConceptLabel::parse("SEM:named_entity:organization");
    spec.tag_names[loc] = "LOC";
    spec.tag_names[per] = "PER";
    spec.tag_names[org] = "ORG";

    // A deliberately tiny vocabulary so highest-activating tokens recur
    // across training stages.
    spec.lexicons[loc] = {"arlen",  "boria",  "corven", "drassa", "elmont", "farest",
                          "galton", "hearth", "ivora",  "jalmar", "kestel", "lorane"};
    spec.lexicons[per] = {"mara",  "nils",  "ostap", "petra", "quint", "rosa",
                          "selim", "tovah", "ulric", "vera",  "wyatt", "yusuf"};
    spec.lexicons[org] = {"axxon", "bellcor", "cindral", "dovex", "exim",  "fintra",
                          "gorsk",  "hylux",  "ionic",   "jexo",  "kyber", "lumex"};

    const std::string L = "{SEM:named_entity:location}";
    const std::string P = "{SEM:named_entity:person}";
    const std::string G = "{SEM:named_entity:organization}";
    const std::vector<std::string> raw_templates = {
        P + " visited " + L + " last week",
        P + " works for " + G + " now",
        G + " opened an office in " + L,
        P + " met " + P + " in " + L,
        "the mayor of " + L + " thanked " + P,
        "shares of " + G + " fell on friday",
        "trains to " + L + " were delayed again",
        "nothing unusual happened in the market today",
    };
    for (const auto& t : raw_templates) {
        std::vector<std::string> tokens;
        std::string tok;
        for (char c : t + " ") {
            if (c == ' ') {
                if (!tok.empty()) tokens.push_back(tok);
                tok.clear();
            } else {
                tok.push_back(c);
            }
        }
        spec.templates.push_back(std::move(tokens));
    }
    return spec;
}

}  // namespace np
