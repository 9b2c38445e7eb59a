#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nplast/corpus.hpp"
#include "nplast/model.hpp"

namespace np {

struct TokenMeta {
    std::uint32_t sentence = 0;
    std::uint32_t position = 0;
    std::string text;
    std::string tag;
    std::vector<std::string> concepts;

    bool operator==(const TokenMeta& other) const = default;
};

// Token x global-neuron activation values. Rows follow corpus order; columns
// are global neuron ids l*d + i over layers 0..L. Stored f32; analyses that
// average over rows accumulate in f64.
struct ActivationMatrix {
    std::uint32_t n_rows = 0;
    std::uint32_t n_cols = 0;
    std::uint32_t n_layers_plus1 = 0;
    std::uint32_t d = 0;
    std::vector<std::uint8_t> model_fingerprint;  // 32 bytes
    std::vector<float> values;                    // row-major n_rows x n_cols
    std::vector<TokenMeta> token_meta;
    bool stale = false;  // set when read with a mismatched expected fingerprint

    float at(std::size_t row, std::size_t col) const { return values[row * n_cols + col]; }

    bool operator==(const ActivationMatrix& other) const {
        return n_rows == other.n_rows && n_cols == other.n_cols &&
               n_layers_plus1 == other.n_layers_plus1 && d == other.d &&
               model_fingerprint == other.model_fingerprint && values == other.values &&
               token_meta == other.token_meta;
    }
};

// Evaluation-mode extraction for every token of the corpus. The corpus token
// ids must be the model's training vocabulary. Parallelizes across sentences
// into a fixed row layout.
ActivationMatrix extract_activations(const TaggerModel& model, const ConceptCorpus& corpus,
                                     std::size_t n_threads = 2);

void write_dump(const ActivationMatrix& matrix, const std::string& path);

// Header is validated before the payload is read. When `expected_fingerprint`
// is supplied and differs from the stored one, strict mode raises a staleness
// error; otherwise the matrix is returned with `stale` set.
ActivationMatrix read_dump(const std::string& path,
                           const std::vector<std::uint8_t>* expected_fingerprint = nullptr,
                           bool strict = false);

// Binary concept labels recovered from dump metadata: positive iff a row's
// concept set contains the label or any descendant of it.
std::vector<std::uint32_t> binary_labels_from_meta(const ActivationMatrix& matrix,
                                                   const ConceptLabel& label);

}  // namespace np
