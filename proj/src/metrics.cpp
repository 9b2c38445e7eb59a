#include "nplast/metrics.hpp"

#include <algorithm>
#include <set>

namespace np {

namespace {

struct ParsedTag {
    char head = 'O';   // 'O', 'B' or 'I'
    std::string type;  // empty for O
};

ParsedTag parse_tag(const std::string& tag) {
    if (tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-')
        return {tag[0], tag.substr(2)};
    return {'O', ""};
}

Prf make_prf(std::size_t matched, std::size_t pred, std::size_t gold) {
    Prf out;
    out.gold_count = gold;
    out.pred_count = pred;
    out.match_count = matched;
    out.zero_denominator = pred == 0 || gold == 0;
    out.precision = pred > 0 ? static_cast<double>(matched) / static_cast<double>(pred) : 0.0;
    out.recall = gold > 0 ? static_cast<double>(matched) / static_cast<double>(gold) : 0.0;
    const double pr = out.precision + out.recall;
    out.f1 = pr > 0 ? 2.0 * out.precision * out.recall / pr : 0.0;
    return out;
}

}  // namespace

std::vector<EntitySpan> extract_entities(const std::vector<std::vector<std::string>>& tags) {
    std::vector<EntitySpan> spans;
    for (std::size_t s = 0; s < tags.size(); ++s) {
        const auto& sent = tags[s];
        std::size_t open_begin = 0;
        std::string open_type;
        bool open = false;
        for (std::size_t i = 0; i < sent.size(); ++i) {
            const ParsedTag cur = parse_tag(sent[i]);
            const bool continues = open && cur.head == 'I' && cur.type == open_type;
            if (open && !continues) {
                spans.push_back({s, open_begin, i, open_type});
                open = false;
            }
            if (cur.head == 'B' || (cur.head == 'I' && !continues)) {
                open = true;
                open_begin = i;
                open_type = cur.type;
            }
        }
        if (open) spans.push_back({s, open_begin, sent.size(), open_type});
    }
    return spans;
}

EntityScores entity_prf(const std::vector<std::vector<std::string>>& gold,
                        const std::vector<std::vector<std::string>>& predicted) {
    if (gold.size() != predicted.size())
        throw data_error("entity_prf: sentence count mismatch");
    for (std::size_t s = 0; s < gold.size(); ++s)
        if (gold[s].size() != predicted[s].size())
            throw data_error("entity_prf: tag sequences misaligned at sentence " +
                             std::to_string(s));

    const std::vector<EntitySpan> gold_spans = extract_entities(gold);
    const std::vector<EntitySpan> pred_spans = extract_entities(predicted);
    const std::set<EntitySpan> gold_set(gold_spans.begin(), gold_spans.end());

    std::set<std::string> types;
    for (const auto& e : gold_spans) types.insert(e.type);
    for (const auto& e : pred_spans) types.insert(e.type);

    std::map<std::string, std::size_t> matched_by_type, pred_by_type, gold_by_type;
    std::size_t matched = 0;
    for (const auto& e : pred_spans) {
        ++pred_by_type[e.type];
        if (gold_set.count(e)) {
            ++matched;
            ++matched_by_type[e.type];
        }
    }
    for (const auto& e : gold_spans) ++gold_by_type[e.type];

    EntityScores scores;
    scores.overall = make_prf(matched, pred_spans.size(), gold_spans.size());
    for (const auto& type : types)
        scores.per_type[type] =
            make_prf(matched_by_type[type], pred_by_type[type], gold_by_type[type]);
    return scores;
}

}  // namespace np
