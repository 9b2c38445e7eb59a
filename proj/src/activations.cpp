#include "nplast/activations.hpp"

#include <cstring>

#include "json.hpp"
#include "nplast/checkpoint.hpp"

namespace np {

namespace {

constexpr char kMagic[6] = {'N', 'P', 'L', 'A', 'B', '1'};

}  // namespace

ActivationMatrix extract_activations(const TaggerModel& model, const ConceptCorpus& corpus,
                                     std::size_t n_threads) {
    const ModelConfig& cfg = model.config();
    const std::size_t n_layers_plus1 = cfg.n_layers + 1;
    const std::size_t d = cfg.d_model;
    const std::size_t D = n_layers_plus1 * d;

    // Encode and validate up front so errors list the offending tokens.
    std::vector<TokenIds> batch(corpus.sentences.size());
    std::string oov;
    for (std::size_t s = 0; s < corpus.sentences.size(); ++s) {
        batch[s].reserve(corpus.sentences[s].size());
        for (const auto& tok : corpus.sentences[s]) {
            const auto it = corpus.vocab_ids.find(tok.text);
            const std::uint32_t id = it != corpus.vocab_ids.end()
                                         ? it->second
                                         : static_cast<std::uint32_t>(cfg.vocab_size);
            if (id >= cfg.vocab_size) oov += (oov.empty() ? "" : ", ") + tok.text;
            batch[s].push_back(id);
        }
    }
    if (!oov.empty()) throw data_error("tokens outside model vocabulary: " + oov);

    ActivationMatrix matrix;
    matrix.n_layers_plus1 = static_cast<std::uint32_t>(n_layers_plus1);
    matrix.d = static_cast<std::uint32_t>(d);
    matrix.n_cols = static_cast<std::uint32_t>(D);
    matrix.n_rows = static_cast<std::uint32_t>(corpus.token_count());
    matrix.model_fingerprint = model_fingerprint(model);
    matrix.values.assign(static_cast<std::size_t>(matrix.n_rows) * D, 0.0f);
    matrix.token_meta.resize(matrix.n_rows);

    std::vector<std::size_t> row_offset(corpus.sentences.size() + 1, 0);
    for (std::size_t s = 0; s < corpus.sentences.size(); ++s)
        row_offset[s + 1] = row_offset[s] + corpus.sentences[s].size();

    parallel_chunks(corpus.sentences.size(), n_threads,
                    [&](std::size_t, std::size_t begin, std::size_t end) {
                        for (std::size_t s = begin; s < end; ++s) {
                            const SentenceForward fw = model.forward_sentence(batch[s]);
                            const std::size_t T = batch[s].size();
                            for (std::size_t t = 0; t < T; ++t) {
                                float* row = matrix.values.data() + (row_offset[s] + t) * D;
                                for (std::size_t l = 0; l < n_layers_plus1; ++l)
                                    for (std::size_t i = 0; i < d; ++i)
                                        row[l * d + i] =
                                            static_cast<float>(fw.reps[l][t * d + i]);
                                TokenMeta& meta = matrix.token_meta[row_offset[s] + t];
                                const AnnotatedToken& tok = corpus.sentences[s][t];
                                meta.sentence = static_cast<std::uint32_t>(s);
                                meta.position = static_cast<std::uint32_t>(t);
                                meta.text = tok.text;
                                meta.tag = tok.bio_tag;
                                for (const auto& c : tok.concepts) meta.concepts.push_back(c.str());
                            }
                        }
                    });
    return matrix;
}

void write_dump(const ActivationMatrix& matrix, const std::string& path) {
    if (matrix.model_fingerprint.size() != 32)
        throw data_error("write_dump: fingerprint must be 32 bytes");
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + sizeof(kMagic));
    put_u32(out, matrix.n_rows);
    put_u32(out, matrix.n_cols);
    put_u32(out, matrix.n_layers_plus1);
    put_u32(out, matrix.d);
    out.insert(out.end(), matrix.model_fingerprint.begin(), matrix.model_fingerprint.end());
    for (float v : matrix.values) put_f32(out, v);

    nlohmann::json trailer;
    auto& meta = trailer["token_meta"] = nlohmann::json::array();
    for (const auto& m : matrix.token_meta) {
        nlohmann::json row;
        row["sentence"] = m.sentence;
        row["position"] = m.position;
        row["text"] = m.text;
        row["tag"] = m.tag;
        row["concepts"] = m.concepts;
        meta.push_back(std::move(row));
    }
    const std::string trailer_text = trailer.dump();
    put_string(out, trailer_text);
    write_file_bytes(path, out);
}

ActivationMatrix read_dump(const std::string& path,
                           const std::vector<std::uint8_t>* expected_fingerprint, bool strict) {
    const std::vector<std::uint8_t> bytes = read_file_bytes(path);
    ByteReader in(bytes.data(), bytes.size());

    char magic[6];
    in.get_raw(reinterpret_cast<std::uint8_t*>(magic), sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw data_error("activation dump corruption: bad magic in " + path);

    ActivationMatrix matrix;
    matrix.n_rows = in.get_u32();
    matrix.n_cols = in.get_u32();
    matrix.n_layers_plus1 = in.get_u32();
    matrix.d = in.get_u32();
    if (static_cast<std::size_t>(matrix.n_layers_plus1) * matrix.d != matrix.n_cols)
        throw data_error("activation dump corruption: inconsistent header in " + path);
    matrix.model_fingerprint.resize(32);
    in.get_raw(matrix.model_fingerprint.data(), 32);

    const std::size_t payload = static_cast<std::size_t>(matrix.n_rows) * matrix.n_cols;
    if (in.remaining() < payload * 4)
        throw data_error("activation dump corruption: truncated payload in " + path);
    matrix.values.resize(payload);
    for (auto& v : matrix.values) v = in.get_f32();

    nlohmann::json trailer;
    try {
        trailer = nlohmann::json::parse(in.get_string());
    } catch (const nlohmann::json::exception& e) {
        throw data_error("activation dump corruption: bad trailer in " + path + ": " + e.what());
    } catch (const data_error&) {
        // the header promised more payload than the file holds, so the
        // trailer read ran off the end
        throw data_error("activation dump corruption: truncated payload in " + path);
    }
    const auto& meta = trailer.at("token_meta");
    if (meta.size() != matrix.n_rows)
        throw data_error("activation dump corruption: token_meta misaligned in " + path);
    matrix.token_meta.resize(matrix.n_rows);
    for (std::size_t i = 0; i < matrix.token_meta.size(); ++i) {
        TokenMeta& m = matrix.token_meta[i];
        const auto& row = meta[i];
        m.sentence = row.at("sentence").get<std::uint32_t>();
        m.position = row.at("position").get<std::uint32_t>();
        m.text = row.at("text").get<std::string>();
        m.tag = row.at("tag").get<std::string>();
        m.concepts = row.at("concepts").get<std::vector<std::string>>();
    }

    if (expected_fingerprint && *expected_fingerprint != matrix.model_fingerprint) {
        if (strict)
            throw data_error("stale activation dump: fingerprint mismatch in " + path);
        matrix.stale = true;
    }
    return matrix;
}

std::vector<std::uint32_t> binary_labels_from_meta(const ActivationMatrix& matrix,
                                                   const ConceptLabel& target) {
    std::vector<std::uint32_t> labels(matrix.n_rows, 0);
    for (std::size_t row = 0; row < matrix.n_rows; ++row) {
        for (const auto& text : matrix.token_meta[row].concepts) {
            const ConceptLabel label = ConceptLabel::parse(text);
            if (label == target || target.is_ancestor_of(label)) {
                labels[row] = 1;
                break;
            }
        }
    }
    return labels;
}

}  // namespace np
