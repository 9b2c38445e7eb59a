#include "nplast/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace np {

ClassMeans class_mean_vectors(const ActivationMatrix& matrix,
                              const std::vector<std::uint32_t>& labels,
                              const std::vector<std::string>& class_names) {
    if (labels.size() != matrix.n_rows)
        throw data_error("class_mean_vectors: labels misaligned with matrix rows");
    const std::size_t n_classes = class_names.size();
    if (n_classes < 1) throw config_error("class_mean_vectors: no classes");
    const std::size_t D = matrix.n_cols;

    ClassMeans means;
    means.class_names = class_names;
    means.means.assign(n_classes, std::vector<double>(D, 0.0));
    means.counts.assign(n_classes, 0);

    for (std::size_t row = 0; row < matrix.n_rows; ++row) {
        const std::uint32_t z = labels[row];
        if (z >= n_classes) throw data_error("class_mean_vectors: label id out of range");
        const float* src = matrix.values.data() + row * D;
        double* dst = means.means[z].data();
        for (std::size_t j = 0; j < D; ++j) dst[j] += static_cast<double>(src[j]);
        ++means.counts[z];
    }
    for (std::size_t z = 0; z < n_classes; ++z) {
        if (means.counts[z] == 0)
            throw data_error("class has no supporting tokens: " + class_names[z]);
        for (double& v : means.means[z]) v /= static_cast<double>(means.counts[z]);
    }
    return means;
}

namespace {

std::vector<std::uint32_t> argsort_desc(const std::vector<double>& scores) {
    std::vector<std::uint32_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::uint32_t>(i);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    return order;
}

}  // namespace

NeuronRanking probeless_rank(const ClassMeans& means, std::size_t target_class) {
    if (means.means.size() < 2)
        throw data_error("probeless_rank: need at least two classes");
    if (target_class >= means.means.size())
        throw config_error("probeless_rank: target class out of range");
    const std::size_t D = means.means[target_class].size();

    NeuronRanking ranking;
    ranking.concept_name = means.class_names[target_class];
    ranking.scores.assign(D, 0.0);
    const std::vector<double>& q = means.means[target_class];
    for (std::size_t z = 0; z < means.means.size(); ++z) {
        if (z == target_class) continue;
        const std::vector<double>& qz = means.means[z];
        for (std::size_t j = 0; j < D; ++j) ranking.scores[j] += std::abs(q[j] - qz[j]);
    }
    ranking.order = argsort_desc(ranking.scores);
    return ranking;
}

NeuronRanking linear_probe_rank(const ActivationMatrix& matrix,
                                const std::vector<std::uint32_t>& labels,
                                const ProbeOptions& options) {
    if (labels.size() != matrix.n_rows)
        throw data_error("linear_probe_rank: labels misaligned with matrix rows");
    if (options.lambdas.empty()) throw config_error("linear_probe_rank: no lambdas");
    const std::size_t n = matrix.n_rows;
    const std::size_t D = matrix.n_cols;

    std::size_t n_pos = 0;
    for (std::uint32_t y : labels) {
        if (y > 1) throw data_error("linear_probe_rank: labels must be binary");
        n_pos += y;
    }
    if (n_pos == 0 || n_pos == n)
        throw data_error("linear_probe_rank: both classes must be present");

    const double w_pos = options.class_balanced
                             ? static_cast<double>(n) / (2.0 * static_cast<double>(n_pos))
                             : 1.0;
    const double w_neg = options.class_balanced
                             ? static_cast<double>(n) / (2.0 * static_cast<double>(n - n_pos))
                             : 1.0;

    std::vector<double> accumulated(D, 0.0);
    std::vector<double> w(D), grad_w(D), m(D), v(D);
    for (double lambda : options.lambdas) {
        std::fill(w.begin(), w.end(), 0.0);
        std::fill(m.begin(), m.end(), 0.0);
        std::fill(v.begin(), v.end(), 0.0);
        double bias = 0.0, m_b = 0.0, v_b = 0.0;
        // Full-batch Adam on the weighted logistic loss; convex, so the
        // optimizer only affects convergence precision, not the optimum.
        for (std::size_t it = 1; it <= options.iterations; ++it) {
            std::fill(grad_w.begin(), grad_w.end(), 0.0);
            double grad_b = 0.0;
            double loss = 0.0;
            for (std::size_t row = 0; row < n; ++row) {
                const float* x = matrix.values.data() + row * D;
                double logit = bias;
                for (std::size_t j = 0; j < D; ++j) logit += w[j] * static_cast<double>(x[j]);
                const double p = 1.0 / (1.0 + std::exp(-logit));
                const double y = labels[row];
                const double cw = labels[row] ? w_pos : w_neg;
                const double err = cw * (p - y) / static_cast<double>(n);
                for (std::size_t j = 0; j < D; ++j) grad_w[j] += err * static_cast<double>(x[j]);
                grad_b += err;
                const double eps = 1e-12;
                loss -= cw * (y * std::log(p + eps) + (1.0 - y) * std::log(1.0 - p + eps));
            }
            if (!std::isfinite(loss)) throw numeric_error("linear probe diverged");
            for (std::size_t j = 0; j < D; ++j) grad_w[j] += lambda * w[j];

            const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
            const double bc1 = 1.0 - std::pow(b1, static_cast<double>(it));
            const double bc2 = 1.0 - std::pow(b2, static_cast<double>(it));
            for (std::size_t j = 0; j < D; ++j) {
                m[j] = b1 * m[j] + (1 - b1) * grad_w[j];
                v[j] = b2 * v[j] + (1 - b2) * grad_w[j] * grad_w[j];
                w[j] -= options.learning_rate * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps);
            }
            m_b = b1 * m_b + (1 - b1) * grad_b;
            v_b = b2 * v_b + (1 - b2) * grad_b * grad_b;
            bias -= options.learning_rate * (m_b / bc1) / (std::sqrt(v_b / bc2) + eps);
        }
        double max_abs = 0.0;
        for (std::size_t j = 0; j < D; ++j) max_abs = std::max(max_abs, std::abs(w[j]));
        if (max_abs <= 0.0) {
            // All-constant features: the probe is flat; ranking falls back to
            // the id tie-break. Leave this lambda's contribution at zero.
            continue;
        }
        for (std::size_t j = 0; j < D; ++j) accumulated[j] += std::abs(w[j]) / max_abs;
    }

    NeuronRanking ranking;
    ranking.concept_name = "linear_probe";
    ranking.scores = std::move(accumulated);
    ranking.order = argsort_desc(ranking.scores);
    return ranking;
}

SaliencyTable saliency_scores(const NeuronRanking& ranking, std::size_t group_size,
                              bool alive_only, const PruneMask& mask) {
    if (group_size < 1) throw config_error("saliency_scores: group_size must be >= 1");
    std::vector<std::uint32_t> sequence;
    sequence.reserve(ranking.order.size());
    for (std::uint32_t neuron : ranking.order) {
        if (alive_only && !mask.alive_global(neuron)) continue;
        sequence.push_back(neuron);
    }

    SaliencyTable table;
    table.group_size = group_size;
    table.saliency.assign(ranking.scores.size(), std::numeric_limits<double>::quiet_NaN());
    if (sequence.empty()) return table;
    const std::size_t G = (sequence.size() + group_size - 1) / group_size;
    table.n_groups = G;
    for (std::size_t pos = 0; pos < sequence.size(); ++pos) {
        const std::size_t g = pos / group_size;
        table.saliency[sequence[pos]] =
            static_cast<double>(G - g) / static_cast<double>(G);
    }
    return table;
}

LayerSaliencySummary layer_saliency_summary(const SaliencyTable& table, const PruneMask& mask,
                                            double threshold) {
    if (threshold < 0.0 || threshold > 1.0)
        throw config_error("layer_saliency_summary: threshold must be in [0,1]");
    if (table.saliency.size() != mask.size())
        throw config_error("layer_saliency_summary: table does not match mask dimensions");

    LayerSaliencySummary summary;
    summary.threshold = threshold;
    summary.layers.resize(mask.layers());

    double weight_sum = 0.0;
    for (std::size_t l = 0; l < mask.layers(); ++l) {
        LayerSaliency& layer = summary.layers[l];
        double saliency_sum = 0.0;
        for (std::size_t i = 0; i < mask.width(); ++i) {
            if (!mask.alive(l, i)) continue;
            const std::size_t neuron = l * mask.width() + i;
            if (!table.covered(neuron))
                throw config_error("layer_saliency_summary: alive neuron not covered by table");
            ++layer.alive;
            saliency_sum += table.saliency[neuron];
            if (table.saliency[neuron] > threshold) ++layer.salient;
        }
        if (layer.alive > 0) {
            layer.mean_saliency = saliency_sum / static_cast<double>(layer.alive);
            weight_sum +=
                static_cast<double>(layer.salient) / static_cast<double>(layer.alive);
        }
    }
    for (auto& layer : summary.layers) {
        if (layer.alive == 0 || weight_sum <= 0.0) {
            if (layer.alive > 0) layer.pct_salient = 0.0;
            continue;
        }
        const double w = static_cast<double>(layer.salient) / static_cast<double>(layer.alive);
        layer.pct_salient = 100.0 * w / weight_sum;
    }
    return summary;
}

std::string export_ranking_csv(const NeuronRanking& ranking, const SaliencyTable& table,
                               std::size_t d) {
    std::ostringstream out;
    out << "neuron_id,layer,index,score,rank,saliency\n";
    for (std::size_t rank = 0; rank < ranking.order.size(); ++rank) {
        const std::uint32_t neuron = ranking.order[rank];
        out << neuron << ',' << neuron / d << ',' << neuron % d << ','
            << format_fixed(ranking.scores[neuron], 9) << ',' << rank << ',';
        if (neuron < table.saliency.size() && table.covered(neuron))
            out << format_fixed(table.saliency[neuron], 6);
        out << '\n';
    }
    return out.str();
}

}  // namespace np
