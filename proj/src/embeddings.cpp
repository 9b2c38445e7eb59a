#include "nplast/embeddings.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace np {

void EmbeddingTable::add(const std::string& token, const std::vector<float>& vec) {
    if (vec.size() != dim_) throw config_error("embedding dimension mismatch for " + token);
    if (index_.count(token)) throw config_error("duplicate embedding for " + token);
    index_.emplace(token, static_cast<std::uint32_t>(tokens_.size()));
    tokens_.push_back(token);
    data_.insert(data_.end(), vec.begin(), vec.end());
}

const float* EmbeddingTable::lookup(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return nullptr;
    return data_.data() + static_cast<std::size_t>(it->second) * dim_;
}

namespace {

// Truncated SVD of a symmetric non-negative matrix via a randomized range
// finder with two power iterations. The probe matrix comes from a fixed
// seed, so results depend only on the input.
Eigen::MatrixXd randomized_symmetric_svd(const Eigen::MatrixXd& A, std::size_t rank,
                                         std::vector<double>& singular_values) {
    const std::size_t n = static_cast<std::size_t>(A.rows());
    const std::size_t oversample = std::min<std::size_t>(n - rank, 8);
    const std::size_t r = rank + oversample;

    Rng rng(0x51d5eedULL);
    Eigen::MatrixXd omega(n, r);
    for (std::size_t j = 0; j < r; ++j)
        for (std::size_t i = 0; i < n; ++i)
            omega(static_cast<long>(i), static_cast<long>(j)) = rng.next_normal();

    Eigen::MatrixXd y = A * omega;
    for (int it = 0; it < 2; ++it) {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
        y = qr.householderQ() * Eigen::MatrixXd::Identity(static_cast<long>(n),
                                                          static_cast<long>(r));
        y = A * y;
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(
                                                      static_cast<long>(n), static_cast<long>(r));

    const Eigen::MatrixXd b = q.transpose() * A;  // r x n
    const Eigen::MatrixXd bbt = b * b.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(bbt);
    if (eig.info() != Eigen::Success) throw numeric_error("embedding SVD failed to converge");

    // Eigenvalues ascend; take the top `rank`.
    Eigen::MatrixXd u(static_cast<long>(n), static_cast<long>(rank));
    singular_values.assign(rank, 0.0);
    for (std::size_t k = 0; k < rank; ++k) {
        const long src = static_cast<long>(r - 1 - k);
        u.col(static_cast<long>(k)) = q * eig.eigenvectors().col(src);
        singular_values[k] = std::sqrt(std::max(0.0, eig.eigenvalues()(src)));
    }
    return u;
}

}  // namespace

EmbeddingTable train_embeddings(const ConceptCorpus& corpus, std::size_t dim,
                                std::size_t window) {
    if (corpus.sentences.empty()) throw data_error("train_embeddings: empty corpus");
    if (dim < 2) throw config_error("train_embeddings: dim must be >= 2");
    const std::size_t V = corpus.vocab.size();
    if (dim > V)
        throw config_error("train_embeddings: dim " + std::to_string(dim) +
                           " exceeds vocab size " + std::to_string(V));

    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(static_cast<long>(V), static_cast<long>(V));
    for (const auto& sentence : corpus.sentences) {
        for (std::size_t i = 0; i < sentence.size(); ++i) {
            const auto wi = corpus.vocab_ids.at(sentence[i].text);
            const std::size_t end = std::min(sentence.size(), i + window + 1);
            for (std::size_t j = i + 1; j < end; ++j) {
                const auto wj = corpus.vocab_ids.at(sentence[j].text);
                counts(wi, wj) += 1.0;
                counts(wj, wi) += 1.0;
            }
        }
    }

    const double total = counts.sum();
    if (total <= 0.0) throw data_error("train_embeddings: no co-occurrences in corpus");
    const Eigen::VectorXd row_sums = counts.rowwise().sum();

    Eigen::MatrixXd ppmi = Eigen::MatrixXd::Zero(static_cast<long>(V), static_cast<long>(V));
    for (long i = 0; i < counts.rows(); ++i) {
        if (row_sums(i) <= 0.0) continue;
        for (long j = 0; j < counts.cols(); ++j) {
            const double c = counts(i, j);
            if (c <= 0.0 || row_sums(j) <= 0.0) continue;
            const double pmi = std::log(c * total / (row_sums(i) * row_sums(j)));
            if (pmi > 0.0) ppmi(i, j) = pmi;
        }
    }

    std::vector<double> sigma;
    const Eigen::MatrixXd u = randomized_symmetric_svd(ppmi, dim, sigma);

    EmbeddingTable table(dim, "corpus-trained");
    std::vector<float> vec(dim);
    for (std::size_t t = 0; t < V; ++t) {
        double norm_sq = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
            const double v = u(static_cast<long>(t), static_cast<long>(k)) * std::sqrt(sigma[k]);
            vec[k] = static_cast<float>(v);
            norm_sq += v * v;
        }
        const double norm = std::sqrt(norm_sq);
        if (norm < 1e-12) continue;  // no usable co-occurrence signal
        for (auto& v : vec) v = static_cast<float>(v / norm);
        table.add(corpus.vocab[t], vec);
    }
    return table;
}

EmbeddingTable import_embeddings(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open embedding table: " + path);
    EmbeddingTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string token;
        row >> token;
        std::vector<float> vec;
        double v;
        while (row >> v) vec.push_back(static_cast<float>(v));
        if (vec.size() < 2)
            throw data_error("embedding parse error at line " + std::to_string(line_no));
        if (table.dim() == 0) table = EmbeddingTable(vec.size(), "imported");
        if (vec.size() != table.dim())
            throw data_error("embedding parse error at line " + std::to_string(line_no) +
                             ": expected " + std::to_string(table.dim()) + " values");
        double norm_sq = 0.0;
        for (float x : vec) norm_sq += static_cast<double>(x) * x;
        const double norm = std::sqrt(norm_sq);
        if (norm < 1e-12)
            throw data_error("zero embedding vector at line " + std::to_string(line_no));
        for (auto& x : vec) x = static_cast<float>(x / norm);
        table.add(token, vec);
    }
    return table;
}

namespace {

std::optional<std::vector<double>> mean_embedding(const HatSet& hats, const EmbeddingTable& table,
                                                  bool weighted, std::size_t& used) {
    std::vector<double> mean(table.dim(), 0.0);
    double weight_sum = 0.0;
    used = 0;
    for (const auto& entry : hats.entries) {
        const float* vec = table.lookup(entry.token);
        if (!vec) continue;
        const double w = weighted ? entry.score : 1.0;
        for (std::size_t k = 0; k < table.dim(); ++k) mean[k] += w * static_cast<double>(vec[k]);
        weight_sum += w;
        ++used;
    }
    if (used == 0 || weight_sum <= 0.0) return std::nullopt;
    for (auto& v : mean) v /= weight_sum;
    double norm_sq = 0.0;
    for (double v : mean) norm_sq += v * v;
    if (norm_sq <= 0.0) return std::nullopt;
    return mean;
}

}  // namespace

SimilarityRecord concept_similarity(const HatSet& before, const HatSet& after,
                                    const EmbeddingTable& table,
                                    const SimilarityOptions& options) {
    SimilarityRecord rec;
    rec.neuron = after.neuron;
    const auto mean_before =
        mean_embedding(before, table, options.weight_by_score, rec.tokens_used_before);
    const auto mean_after =
        mean_embedding(after, table, options.weight_by_score, rec.tokens_used_after);
    if (!mean_before || !mean_after) return rec;

    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t k = 0; k < table.dim(); ++k) {
        dot += (*mean_before)[k] * (*mean_after)[k];
        na += (*mean_before)[k] * (*mean_before)[k];
        nb += (*mean_after)[k] * (*mean_after)[k];
    }
    rec.similarity = dot / (std::sqrt(na) * std::sqrt(nb));
    return rec;
}

ScatterData similarity_saliency_join(const std::vector<SimilarityRecord>& records,
                                     const SaliencyTable& saliency, std::size_t d,
                                     double threshold) {
    ScatterData data;
    std::vector<double> high_sims;
    for (const auto& rec : records) {
        if (rec.neuron >= saliency.saliency.size() || !saliency.covered(rec.neuron))
            throw config_error("similarity_saliency_join: record for uncovered neuron " +
                               std::to_string(rec.neuron));
        ScatterPoint pt;
        pt.neuron = rec.neuron;
        pt.layer = rec.neuron / d;
        pt.saliency = saliency.saliency[rec.neuron];
        pt.similarity = rec.similarity;
        data.points.push_back(pt);

        if (!rec.similarity) continue;
        const bool high_sal = pt.saliency > threshold;
        const bool high_sim = *rec.similarity > threshold;
        if (high_sal && high_sim)
            ++data.high_high;
        else if (high_sal)
            ++data.high_low;
        else if (high_sim)
            ++data.low_high;
        else
            ++data.low_low;
        if (high_sal) high_sims.push_back(*rec.similarity);
    }
    if (!high_sims.empty()) {
        std::sort(high_sims.begin(), high_sims.end());
        const std::size_t n = high_sims.size();
        data.median_similarity_high_saliency =
            n % 2 ? high_sims[n / 2] : 0.5 * (high_sims[n / 2 - 1] + high_sims[n / 2]);
    }
    return data;
}

std::string export_scatter_csv(const ScatterData& data) {
    std::ostringstream out;
    out << "neuron_id,layer,saliency,similarity,defined\n";
    for (const auto& pt : data.points) {
        out << pt.neuron << ',' << pt.layer << ',' << format_fixed(pt.saliency, 6) << ',';
        if (pt.similarity) out << format_fixed(*pt.similarity, 6);
        out << ',' << (pt.similarity ? 1 : 0) << '\n';
    }
    return out.str();
}

}  // namespace np
