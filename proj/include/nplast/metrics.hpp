#pragma once

#include <map>
#include <string>
#include <vector>

#include "nplast/common.hpp"

namespace np {

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t gold_count = 0;
    std::size_t pred_count = 0;
    std::size_t match_count = 0;
    bool zero_denominator = false;  // diagnostic: P or R had an empty denominator
};

struct EntityScores {
    Prf overall;
    std::map<std::string, Prf> per_type;
};

struct EntitySpan {
    std::size_t sentence = 0;
    std::size_t begin = 0;  // inclusive token index
    std::size_t end = 0;    // exclusive
    std::string type;

    bool operator==(const EntitySpan& other) const = default;
    bool operator<(const EntitySpan& other) const {
        return std::tie(sentence, begin, end, type) <
               std::tie(other.sentence, other.begin, other.end, other.type);
    }
};

// Entity extraction with conlleval-style tolerance: an I-X that does not
// continue a span of the same type opens a new one.
std::vector<EntitySpan> extract_entities(const std::vector<std::vector<std::string>>& tags);

// Exact-span, exact-type entity matching. Zero-denominator conventions:
// the affected metric is 0.0 and `zero_denominator` is set.
EntityScores entity_prf(const std::vector<std::vector<std::string>>& gold,
                        const std::vector<std::vector<std::string>>& predicted);

}  // namespace np
