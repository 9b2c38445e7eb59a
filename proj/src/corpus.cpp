#include "nplast/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace np {

namespace {

constexpr char kSeparator = ':';

bool valid_segment(const std::string& s) {
    return !s.empty() && s.find(kSeparator) == std::string::npos;
}

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

// Ancestor closure down to depth 2: a token labeled a:b:c:d also carries
// a:b:c and a:b.
std::vector<ConceptLabel> closure(const ConceptLabel& label) {
    std::vector<ConceptLabel> out;
    for (std::size_t len = 2; len <= label.depth(); ++len) {
        out.emplace_back(std::vector<std::string>(label.path().begin(),
                                                  label.path().begin() + static_cast<long>(len)));
    }
    if (label.depth() < 2) out.push_back(label);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::string default_tag_name(const ConceptLabel& label) {
    std::string last = label.path().back();
    for (char& c : last) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return last;
}

}  // namespace

ConceptLabel::ConceptLabel(std::vector<std::string> path) : path_(std::move(path)) {
    if (path_.empty()) throw config_error("concept label path must be non-empty");
    for (const auto& seg : path_) {
        if (!valid_segment(seg))
            throw config_error("invalid concept label segment: '" + seg + "'");
    }
}

ConceptLabel ConceptLabel::parse(const std::string& text) {
    std::vector<std::string> path;
    std::string seg;
    std::istringstream in(text);
    while (std::getline(in, seg, kSeparator)) path.push_back(seg);
    return ConceptLabel(std::move(path));
}

std::string ConceptLabel::str() const {
    std::string out;
    for (std::size_t i = 0; i < path_.size(); ++i) {
        if (i > 0) out.push_back(kSeparator);
        out += path_[i];
    }
    return out;
}

bool ConceptLabel::is_ancestor_of(const ConceptLabel& other) const {
    if (path_.size() >= other.path_.size()) return false;
    return std::equal(path_.begin(), path_.end(), other.path_.begin());
}

bool ConceptLabel::is_sibling_of(const ConceptLabel& other) const {
    if (path_.size() != other.path_.size() || path_.size() < 2) return false;
    if (*this == other) return false;
    return std::equal(path_.begin(), path_.end() - 1, other.path_.begin());
}

ConceptLabel ConceptLabel::parent() const {
    if (path_.size() < 2) throw config_error("label has no parent: " + str());
    return ConceptLabel(std::vector<std::string>(path_.begin(), path_.end() - 1));
}

std::size_t ConceptCorpus::token_count() const {
    std::size_t n = 0;
    for (const auto& s : sentences) n += s.size();
    return n;
}

std::vector<std::string> ConceptCorpus::tag_set() const {
    std::set<std::string> tags;
    for (const auto& s : sentences)
        for (const auto& t : s) tags.insert(t.bio_tag);
    tags.erase("O");
    std::vector<std::string> out{"O"};
    out.insert(out.end(), tags.begin(), tags.end());
    return out;
}

void ConceptCorpus::reindex() {
    vocab.clear();
    vocab_ids.clear();
    concept_index.clear();
    for (std::size_t si = 0; si < sentences.size(); ++si) {
        for (std::size_t ti = 0; ti < sentences[si].size(); ++ti) {
            const AnnotatedToken& tok = sentences[si][ti];
            if (vocab_ids.find(tok.text) == vocab_ids.end()) {
                vocab_ids.emplace(tok.text, static_cast<std::uint32_t>(vocab.size()));
                vocab.push_back(tok.text);
            }
            for (const ConceptLabel& c : tok.concepts)
                concept_index[c].push_back(TokenPosition{si, ti});
        }
    }
}

void ConceptCorpus::reindex_with_vocab(const std::vector<std::string>& parent_vocab) {
    vocab = parent_vocab;
    vocab_ids.clear();
    for (std::size_t i = 0; i < vocab.size(); ++i)
        vocab_ids.emplace(vocab[i], static_cast<std::uint32_t>(i));
    concept_index.clear();
    for (std::size_t si = 0; si < sentences.size(); ++si) {
        for (std::size_t ti = 0; ti < sentences[si].size(); ++ti) {
            const AnnotatedToken& tok = sentences[si][ti];
            if (vocab_ids.find(tok.text) == vocab_ids.end())
                throw data_error("token not covered by parent vocab: " + tok.text);
            for (const ConceptLabel& c : tok.concepts)
                concept_index[c].push_back(TokenPosition{si, ti});
        }
    }
}

void CorpusSpec::validate() const {
    if (max_len < 3) throw config_error("corpus spec: max_len must be >= 3");
    if (templates.empty()) throw config_error("corpus spec: no templates");
    for (const auto& [label, words] : lexicons) {
        if (words.empty())
            throw config_error("corpus spec: empty lexicon for " + label.str());
        for (const auto& w : words)
            if (split_ws(w).empty())
                throw config_error("corpus spec: blank lexicon entry under " + label.str());
    }
    // Sibling sub-concept lexicons must be pairwise disjoint ("mutually
    // exclusive"): usa/canada/mexico under location cannot share words.
    // Top-level entity types (depth 3, e.g. location vs person) may overlap
    // the way real corpora do (a city name that is also a surname).
    for (auto it = lexicons.begin(); it != lexicons.end(); ++it) {
        for (auto jt = std::next(it); jt != lexicons.end(); ++jt) {
            if (!it->first.is_sibling_of(jt->first)) continue;
            if (it->first.depth() < 4) continue;
            std::set<std::string> a(it->second.begin(), it->second.end());
            for (const auto& w : jt->second) {
                if (a.count(w))
                    throw config_error("corpus spec: sibling lexicons " + it->first.str() +
                                       " and " + jt->first.str() + " share entry '" + w + "'");
            }
        }
    }
}

namespace {

struct Slot {
    ConceptLabel label;
    std::string tag;
    bool as_outside = false;  // "{O:...}": lexicon word in a non-entity role
    // (entry tokens, most specific label) pairs, in deterministic order.
    std::vector<std::pair<std::vector<std::string>, ConceptLabel>> entries;
};

bool is_slot(const std::string& token) {
    return token.size() >= 3 && token.front() == '{' && token.back() == '}';
}

}  // namespace

ConceptCorpus generate_corpus(const CorpusSpec& spec, std::uint64_t seed) {
    spec.validate();

    // Resolve each distinct slot once: candidate entries come from the slot
    // label's own lexicon plus every descendant lexicon (map order is sorted,
    // so the candidate list is deterministic).
    std::map<std::string, Slot> slots;
    for (const auto& tmpl : spec.templates) {
        std::size_t min_len = 0;
        std::size_t max_entry_sum = 0;
        for (const auto& token : tmpl) {
            if (!is_slot(token)) {
                ++min_len;
                ++max_entry_sum;
                continue;
            }
            const std::string key = token.substr(1, token.size() - 2);
            auto [it, inserted] = slots.emplace(key, Slot{});
            Slot& slot = it->second;
            if (inserted) {
                std::string label_text = key;
                if (label_text.rfind("O:", 0) == 0) {
                    slot.as_outside = true;
                    label_text = label_text.substr(2);
                }
                slot.label = ConceptLabel::parse(label_text);
                auto tn = spec.tag_names.find(slot.label);
                slot.tag = tn != spec.tag_names.end() ? tn->second : default_tag_name(slot.label);
                for (const auto& [label, words] : spec.lexicons) {
                    if (label == slot.label || slot.label.is_ancestor_of(label)) {
                        for (const auto& w : words) slot.entries.emplace_back(split_ws(w), label);
                    }
                }
                if (slot.entries.empty())
                    throw config_error("no lexicon covers slot {" + key + "}");
            }
            std::size_t longest = 0;
            for (const auto& e : slot.entries) longest = std::max(longest, e.first.size());
            min_len += 1;
            max_entry_sum += longest;
        }
        if (max_entry_sum > spec.max_len)
            throw config_error("template can exceed max_len " + std::to_string(spec.max_len));
        (void)min_len;
    }

    Rng rng(seed);
    ConceptCorpus corpus;
    corpus.sentences.reserve(spec.n_sentences);
    for (std::size_t si = 0; si < spec.n_sentences; ++si) {
        const auto& tmpl = spec.templates[rng.next_below(spec.templates.size())];
        std::vector<AnnotatedToken> sentence;
        for (const auto& token : tmpl) {
            if (!is_slot(token)) {
                sentence.push_back(AnnotatedToken{token, "O", {}});
                continue;
            }
            const Slot& slot = slots.at(token.substr(1, token.size() - 2));
            const auto& [words, label] = slot.entries[rng.next_below(slot.entries.size())];
            if (slot.as_outside) {
                // non-entity usage of a lexicon word ("the nordic weather")
                for (const auto& w : words) sentence.push_back(AnnotatedToken{w, "O", {}});
                continue;
            }
            const std::vector<ConceptLabel> concepts = closure(label);
            for (std::size_t wi = 0; wi < words.size(); ++wi) {
                const std::string tag = (wi == 0 ? "B-" : "I-") + slot.tag;
                sentence.push_back(AnnotatedToken{words[wi], tag, concepts});
            }
        }
        corpus.sentences.push_back(std::move(sentence));
    }
    corpus.reindex();
    if (auto violation = check_bio(corpus.sentences))
        throw data_error("generated corpus violates BIO: " + *violation);
    return corpus;
}

std::optional<std::string> check_bio(const std::vector<std::vector<AnnotatedToken>>& sentences) {
    for (std::size_t si = 0; si < sentences.size(); ++si) {
        std::string prev = "O";
        for (std::size_t ti = 0; ti < sentences[si].size(); ++ti) {
            const std::string& tag = sentences[si][ti].bio_tag;
            const bool shaped = tag == "O" || (tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I') &&
                                               tag[1] == '-');
            if (!shaped)
                return "malformed tag '" + tag + "' at sentence " + std::to_string(si) +
                       " token " + std::to_string(ti);
            if (tag[0] == 'I') {
                const std::string type = tag.substr(2);
                const bool follows = (prev.size() > 2 && prev.substr(2) == type &&
                                      (prev[0] == 'B' || prev[0] == 'I'));
                if (!follows)
                    return "I-" + type + " does not continue a span at sentence " +
                           std::to_string(si) + " token " + std::to_string(ti);
            }
            prev = tag;
        }
    }
    return std::nullopt;
}

void write_corpus(const ConceptCorpus& corpus, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw data_error("cannot open corpus file for writing: " + path);
    for (const auto& sentence : corpus.sentences) {
        nlohmann::json line;
        auto& tokens = line["tokens"] = nlohmann::json::array();
        auto& tags = line["tags"] = nlohmann::json::array();
        auto& concepts = line["concepts"] = nlohmann::json::array();
        for (const auto& tok : sentence) {
            tokens.push_back(tok.text);
            tags.push_back(tok.bio_tag);
            nlohmann::json labels = nlohmann::json::array();
            for (const auto& c : tok.concepts) labels.push_back(c.str());
            concepts.push_back(std::move(labels));
        }
        out << line.dump() << '\n';
    }
    if (!out) throw data_error("write failure: " + path);
}

ConceptCorpus read_corpus(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open corpus file: " + path);
    ConceptCorpus corpus;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (raw.empty())
            throw data_error("corpus parse error at line " + std::to_string(line_no) +
                             ": blank line");
        nlohmann::json line;
        try {
            line = nlohmann::json::parse(raw);
        } catch (const nlohmann::json::exception& e) {
            throw data_error("corpus parse error at line " + std::to_string(line_no) + ": " +
                             e.what());
        }
        if (!line.is_object() || !line.contains("tokens") || !line.contains("tags") ||
            !line.contains("concepts"))
            throw data_error("corpus parse error at line " + std::to_string(line_no) +
                             ": expected object with tokens/tags/concepts");
        const auto& tokens = line["tokens"];
        const auto& tags = line["tags"];
        const auto& concepts = line["concepts"];
        if (tokens.size() != tags.size() || tokens.size() != concepts.size())
            throw data_error("corpus parse error at line " + std::to_string(line_no) +
                             ": array length mismatch");
        std::vector<AnnotatedToken> sentence;
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            AnnotatedToken tok;
            tok.text = tokens[i].get<std::string>();
            tok.bio_tag = tags[i].get<std::string>();
            std::vector<ConceptLabel> labels;
            for (const auto& c : concepts[i]) {
                const ConceptLabel label = ConceptLabel::parse(c.get<std::string>());
                const auto closed = closure(label);
                labels.insert(labels.end(), closed.begin(), closed.end());
            }
            std::sort(labels.begin(), labels.end());
            labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
            tok.concepts = std::move(labels);
            if (tok.bio_tag != "O" && tok.concepts.empty())
                throw data_error("corpus validation error at line " + std::to_string(line_no) +
                                 ": entity token without concept labels");
            sentence.push_back(std::move(tok));
        }
        corpus.sentences.push_back(std::move(sentence));
    }
    if (auto violation = check_bio(corpus.sentences))
        throw data_error("corpus validation error: " + *violation);
    corpus.reindex();
    return corpus;
}

CorpusSplits split_corpus(const ConceptCorpus& corpus, const SplitRatios& ratios,
                          std::uint64_t seed) {
    const double sum = ratios.train + ratios.dev + ratios.test;
    if (ratios.train < 0 || ratios.dev < 0 || ratios.test < 0 || std::abs(sum - 1.0) > 1e-9)
        throw config_error("split ratios must be non-negative and sum to 1");

    const std::size_t n = corpus.sentences.size();
    const double r[3] = {ratios.train, ratios.dev, ratios.test};
    std::size_t sizes[3];
    double fracs[3];
    std::size_t assigned = 0;
    for (int i = 0; i < 3; ++i) {
        const double exact = r[i] * static_cast<double>(n);
        sizes[i] = static_cast<std::size_t>(exact);
        fracs[i] = exact - static_cast<double>(sizes[i]);
        assigned += sizes[i];
    }
    while (assigned < n) {
        int best = 0;
        for (int i = 1; i < 3; ++i)
            if (fracs[i] > fracs[best]) best = i;
        ++sizes[best];
        fracs[best] = -1.0;
        ++assigned;
    }
    for (int i = 0; i < 3; ++i)
        if (r[i] > 0 && sizes[i] == 0 && n > 0)
            throw data_error("split sizing error: ratio " + std::to_string(r[i]) +
                             " yields an empty split");

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);

    CorpusSplits splits;
    ConceptCorpus* parts[3] = {&splits.train, &splits.dev, &splits.test};
    std::size_t offset = 0;
    for (int i = 0; i < 3; ++i) {
        std::vector<std::size_t> idx(order.begin() + static_cast<long>(offset),
                                     order.begin() + static_cast<long>(offset + sizes[i]));
        std::sort(idx.begin(), idx.end());
        for (std::size_t s : idx) parts[i]->sentences.push_back(corpus.sentences[s]);
        parts[i]->reindex_with_vocab(corpus.vocab);
        offset += sizes[i];
    }
    return splits;
}

BinaryLabelStream concept_binary_labels(const ConceptCorpus& corpus, const ConceptLabel& target) {
    BinaryLabelStream stream;
    stream.labels.reserve(corpus.token_count());
    for (const auto& sentence : corpus.sentences) {
        for (const auto& tok : sentence) {
            bool positive = false;
            for (const auto& c : tok.concepts) {
                if (c == target || target.is_ancestor_of(c)) {
                    positive = true;
                    break;
                }
            }
            stream.labels.push_back(positive ? 1 : 0);
            if (positive) ++stream.positive_count;
        }
    }
    stream.concept_found = stream.positive_count > 0;
    return stream;
}

}  // namespace np
