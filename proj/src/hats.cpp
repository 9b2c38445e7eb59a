#include "nplast/hats.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "json.hpp"

namespace np {

bool HatSet::contains(const std::string& token) const {
    for (const auto& e : entries)
        if (e.token == token) return true;
    return false;
}

HatSet extract_hats(const ActivationMatrix& matrix, std::uint32_t neuron,
                    const HatOptions& options) {
    if (neuron >= matrix.n_cols) throw config_error("extract_hats: neuron id out of range");
    if (matrix.n_rows == 0) throw data_error("extract_hats: empty activation matrix");

    HatSet set;
    set.neuron = neuron;
    set.k = options.k;

    double sum = 0.0;
    for (std::size_t row = 0; row < matrix.n_rows; ++row)
        sum += static_cast<double>(matrix.at(row, neuron));
    const double mean = sum / static_cast<double>(matrix.n_rows);

    // (contribution, token) pairs; per token type keep the max contribution.
    std::vector<std::pair<double, std::string>> items;
    if (options.per_type) {
        std::map<std::string, double> best;
        for (std::size_t row = 0; row < matrix.n_rows; ++row) {
            const double dev = static_cast<double>(matrix.at(row, neuron)) - mean;
            const double c = dev * dev;
            auto [it, inserted] = best.emplace(matrix.token_meta[row].text, c);
            if (!inserted && c > it->second) it->second = c;
        }
        items.reserve(best.size());
        for (const auto& [token, c] : best) items.emplace_back(c, token);
    } else {
        items.reserve(matrix.n_rows);
        for (std::size_t row = 0; row < matrix.n_rows; ++row) {
            const double dev = static_cast<double>(matrix.at(row, neuron)) - mean;
            items.emplace_back(dev * dev, matrix.token_meta[row].text);
        }
    }

    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });

    const double max_c = items.empty() ? 0.0 : items.front().first;
    if (max_c <= 0.0) {
        set.degenerate = true;
        return set;
    }
    for (const auto& [c, token] : items) {
        if (set.entries.size() >= options.k) break;
        set.entries.push_back(HatEntry{token, c / max_c});
    }
    return set;
}

HatEvolution hat_evolution(std::uint32_t neuron,
                           const std::vector<const ActivationMatrix*>& snapshots,
                           const std::vector<std::string>& stage_names,
                           const HatOptions& options) {
    if (snapshots.empty()) throw data_error("hat_evolution: no snapshots");
    if (stage_names.size() != snapshots.size())
        throw config_error("hat_evolution: stage names misaligned with snapshots");
    const ActivationMatrix& base = *snapshots.front();
    for (const ActivationMatrix* snap : snapshots) {
        if (snap->n_rows != base.n_rows)
            throw data_error("hat_evolution: snapshots come from different corpora");
        for (std::size_t row = 0; row < snap->n_rows; ++row)
            if (snap->token_meta[row].text != base.token_meta[row].text)
                throw data_error("hat_evolution: snapshots come from different corpora");
    }

    HatEvolution evo;
    evo.neuron = neuron;
    std::set<std::string> base_tokens;
    for (std::size_t i = 0; i < snapshots.size(); ++i) {
        HatSnapshot snap;
        snap.stage = stage_names[i];
        snap.hats = extract_hats(*snapshots[i], neuron, options);
        if (i == 0) {
            for (const auto& e : snap.hats.entries) base_tokens.insert(e.token);
        } else {
            for (const auto& e : snap.hats.entries)
                if (base_tokens.count(e.token)) snap.reappeared.push_back(e.token);
        }
        evo.snapshots.push_back(std::move(snap));
    }
    return evo;
}

std::string hat_evolution_json(const std::vector<HatEvolution>& evolutions) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& evo : evolutions) {
        for (const auto& snap : evo.snapshots) {
            nlohmann::json rec;
            rec["neuron"] = evo.neuron;
            rec["stage"] = snap.stage;
            auto& entries = rec["entries"] = nlohmann::json::array();
            for (const auto& e : snap.hats.entries)
                entries.push_back({{"token", e.token}, {"score", e.score}});
            rec["reappeared"] = snap.reappeared;
            rec["degenerate"] = snap.hats.degenerate;
            out.push_back(std::move(rec));
        }
    }
    return out.dump(2) + "\n";
}

}  // namespace np
