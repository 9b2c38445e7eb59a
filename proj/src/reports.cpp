#include "nplast/reports.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

namespace np {

namespace {

struct MeanSd {
    double mean = 0.0;
    double sd = 0.0;  // sample SD; 0 for a single run
};

MeanSd mean_sd(const std::vector<double>& values) {
    MeanSd out;
    const std::size_t n = values.size();
    for (double v : values) out.mean += v;
    out.mean /= static_cast<double>(n);
    if (n > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - out.mean) * (v - out.mean);
        out.sd = std::sqrt(ss / static_cast<double>(n - 1));
    }
    return out;
}

}  // namespace

Report performance_table(const std::vector<std::string>& stages,
                         const std::vector<std::map<std::string, Prf>>& runs) {
    if (runs.empty()) throw data_error("performance_table: no runs");
    for (const auto& run : runs)
        for (const auto& stage : stages)
            if (!run.count(stage))
                throw data_error("performance_table: run missing stage '" + stage + "'");

    std::ostringstream csv;
    csv << "stage,precision_mean,precision_sd,recall_mean,recall_sd,f1_mean,f1_sd\n";
    nlohmann::json json = nlohmann::json::array();
    for (const auto& stage : stages) {
        std::vector<double> p, r, f;
        for (const auto& run : runs) {
            const Prf& prf = run.at(stage);
            p.push_back(prf.precision);
            r.push_back(prf.recall);
            f.push_back(prf.f1);
        }
        const MeanSd pm = mean_sd(p), rm = mean_sd(r), fm = mean_sd(f);
        csv << stage << ',' << format_fixed(pm.mean, 3) << ',' << format_fixed(pm.sd, 3) << ','
            << format_fixed(rm.mean, 3) << ',' << format_fixed(rm.sd, 3) << ','
            << format_fixed(fm.mean, 3) << ',' << format_fixed(fm.sd, 3) << '\n';
        json.push_back({{"stage", stage},
                        {"precision", {{"mean", pm.mean}, {"sd", pm.sd}}},
                        {"recall", {{"mean", rm.mean}, {"sd", rm.sd}}},
                        {"f1", {{"mean", fm.mean}, {"sd", fm.sd}}},
                        {"runs", runs.size()}});
    }
    return Report{csv.str(), json.dump(2) + "\n"};
}

Report distribution_table(const LayerSaliencySummary& base,
                          const LayerSaliencySummary& retrained) {
    if (base.layers.size() != retrained.layers.size())
        throw data_error("distribution_table: layer sets differ");

    auto argmax = [](const LayerSaliencySummary& s) -> long {
        long best = -1;
        double best_v = -1.0;
        for (std::size_t l = 0; l < s.layers.size(); ++l) {
            if (s.layers[l].pct_salient && *s.layers[l].pct_salient > best_v) {
                best_v = *s.layers[l].pct_salient;
                best = static_cast<long>(l);
            }
        }
        return best;
    };
    const long base_argmax = argmax(base);
    const long retrained_argmax = argmax(retrained);

    std::ostringstream csv;
    csv << "layer,base_pct,retrained_pct\n";
    nlohmann::json json;
    json["rows"] = nlohmann::json::array();
    for (std::size_t l = 0; l < base.layers.size(); ++l) {
        csv << l << ',';
        if (base.layers[l].pct_salient) csv << format_fixed(*base.layers[l].pct_salient, 3);
        csv << ',';
        if (retrained.layers[l].pct_salient)
            csv << format_fixed(*retrained.layers[l].pct_salient, 3);
        csv << '\n';
        json["rows"].push_back(
            {{"layer", l},
             {"base_pct", base.layers[l].pct_salient ? nlohmann::json(*base.layers[l].pct_salient)
                                                     : nlohmann::json()},
             {"retrained_pct", retrained.layers[l].pct_salient
                                   ? nlohmann::json(*retrained.layers[l].pct_salient)
                                   : nlohmann::json()}});
    }
    json["base_argmax_layer"] = base_argmax;
    json["retrained_argmax_layer"] = retrained_argmax;
    return Report{csv.str(), json.dump(2) + "\n"};
}

Report saliency_trajectory(
    const std::vector<std::pair<std::string, LayerSaliencySummary>>& stages) {
    std::ostringstream csv;
    csv << "epoch,layer,mean_saliency\n";
    nlohmann::json json = nlohmann::json::array();
    for (const auto& [epoch, summary] : stages) {
        for (std::size_t l = 0; l < summary.layers.size(); ++l) {
            csv << epoch << ',' << l << ',';
            if (summary.layers[l].mean_saliency)
                csv << format_fixed(*summary.layers[l].mean_saliency, 6);
            csv << '\n';
            json.push_back({{"epoch", epoch},
                            {"layer", l},
                            {"mean_saliency", summary.layers[l].mean_saliency
                                                  ? nlohmann::json(*summary.layers[l].mean_saliency)
                                                  : nlohmann::json()}});
        }
    }
    return Report{csv.str(), json.dump(2) + "\n"};
}

LayerSimilarities collect_layer_similarities(const ScatterData& scatter, std::size_t n_layers) {
    LayerSimilarities out;
    out.by_layer.resize(n_layers);
    for (const auto& pt : scatter.points) {
        if (!pt.similarity) continue;
        if (pt.layer >= n_layers) throw data_error("collect_layer_similarities: layer out of range");
        out.by_layer[pt.layer].push_back(*pt.similarity);
    }
    return out;
}

Report similarity_trajectory(
    const std::vector<std::pair<std::string, LayerSimilarities>>& stages) {
    std::ostringstream csv;
    csv << "epoch,layer,mean_similarity,ci95,n\n";
    nlohmann::json json = nlohmann::json::array();
    for (const auto& [epoch, layers] : stages) {
        for (std::size_t l = 0; l < layers.by_layer.size(); ++l) {
            const auto& sims = layers.by_layer[l];
            csv << epoch << ',' << l << ',';
            nlohmann::json rec = {{"epoch", epoch}, {"layer", l}, {"n", sims.size()}};
            if (!sims.empty()) {
                const MeanSd ms = mean_sd(sims);
                const double ci =
                    1.96 * ms.sd / std::sqrt(static_cast<double>(sims.size()));
                csv << format_fixed(ms.mean, 6) << ',' << format_fixed(ci, 6);
                rec["mean_similarity"] = ms.mean;
                rec["ci95"] = ci;
            } else {
                csv << ',';
                rec["mean_similarity"] = nullptr;
                rec["ci95"] = nullptr;
            }
            csv << ',' << sims.size() << '\n';
            json.push_back(std::move(rec));
        }
    }
    return Report{csv.str(), json.dump(2) + "\n"};
}

}  // namespace np
