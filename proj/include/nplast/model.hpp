#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nplast/common.hpp"

namespace np {

struct ModelConfig {
    std::size_t n_layers = 4;    // transformer blocks (L)
    std::size_t d_model = 64;    // representation width (d)
    std::size_t n_heads = 4;
    std::size_t d_ffn = 256;
    std::size_t vocab_size = 0;
    std::size_t n_tags = 0;
    std::size_t max_len = 16;
    double dropout_rate = 0.1;
    std::uint64_t seed = 0;
    bool causal = false;  // decoder-style attention variant

    void validate() const;
    // Maskable units: layers 0..L, layer 0 being the embedding output.
    std::size_t neuron_count() const { return (n_layers + 1) * d_model; }

    std::string to_json() const;
    static ModelConfig from_json(const std::string& text);
    bool operator==(const ModelConfig& other) const = default;
};

// Per representation-layer binary keep mask. 1 = alive, 0 = pruned.
// Global neuron id = layer * d + index.
class PruneMask {
  public:
    PruneMask() = default;
    PruneMask(std::size_t n_layers_plus1, std::size_t d);

    static PruneMask all_alive(const ModelConfig& config) {
        return PruneMask(config.n_layers + 1, config.d_model);
    }

    std::size_t layers() const { return layers_; }
    std::size_t width() const { return d_; }
    std::size_t size() const { return bits_.size(); }

    bool alive(std::size_t layer, std::size_t index) const { return bits_[layer * d_ + index] != 0; }
    bool alive_global(std::size_t neuron) const { return bits_[neuron] != 0; }
    void set_global(std::size_t neuron, bool alive) { bits_[neuron] = alive ? 1 : 0; }

    std::size_t alive_count() const;
    std::size_t alive_count_in_layer(std::size_t layer) const;
    std::size_t pruned_count() const { return size() - alive_count(); }

    const std::vector<std::uint8_t>& bits() const { return bits_; }
    std::vector<std::uint8_t>& bits() { return bits_; }

    bool operator==(const PruneMask& other) const = default;

  private:
    std::size_t layers_ = 0;
    std::size_t d_ = 0;
    std::vector<std::uint8_t> bits_;
};

struct Tensor {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<double> data;

    std::size_t size() const { return data.size(); }
};

// One gradient buffer per parameter tensor, in parameter order.
struct Gradients {
    std::vector<std::vector<double>> g;

    void zero();
    void add(const Gradients& other);  // elementwise +=
};

struct SentenceForward {
    std::vector<double> logits;             // T x n_tags, row-major
    std::vector<std::vector<double>> reps;  // layers 0..L, each T x d, post-mask
};

using TokenIds = std::vector<std::uint32_t>;

// Small transformer encoder for per-token tag classification with explicit
// gradient computation. All parameters and arithmetic are f64 so analytic
// gradients can be validated against central finite differences.
class TaggerModel {
  public:
    explicit TaggerModel(const ModelConfig& config);

    const ModelConfig& config() const { return config_; }
    const PruneMask& mask() const { return mask_; }
    void set_mask(const PruneMask& mask);

    const std::vector<Tensor>& params() const { return params_; }
    std::vector<Tensor>& params() { return params_; }
    std::size_t param_count() const;

    Gradients make_gradients() const;

    // Evaluation-mode forward (no dropout).
    SentenceForward forward_sentence(const TokenIds& ids) const;
    std::vector<SentenceForward> forward(const std::vector<TokenIds>& batch) const;

    // Mean token cross-entropy over the batch plus gradients for every
    // parameter. `dropout_seed` enables inverted dropout when non-null
    // (one substream per sentence: mix_seed(*dropout_seed, sentence_index)).
    // Gradients into masked units vanish by construction since the mask is
    // applied multiplicatively in the forward pass.
    double loss_and_gradients(const std::vector<TokenIds>& batch,
                              const std::vector<std::vector<std::uint32_t>>& gold_tags,
                              Gradients& out, const std::uint64_t* dropout_seed = nullptr,
                              std::size_t n_threads = 1) const;

    // Argmax tag predictions, evaluation mode.
    std::vector<std::vector<std::uint32_t>> predict(const std::vector<TokenIds>& batch,
                                                    std::size_t n_threads = 1) const;

    // Zeroes every parameter entry that produces or consumes a pruned unit,
    // making the masked-forward and weight-zeroed models numerically
    // identical. Called by apply_mask and after optimizer steps.
    void zero_masked_params();

    // Layout bookkeeping for checkpoint and tests.
    static std::vector<std::pair<std::string, std::vector<std::size_t>>> tensor_layout(
        const ModelConfig& config);

    // Index of a named tensor in params().
    std::size_t tensor_index(const std::string& name) const;

  private:
    void init_params();

    ModelConfig config_;
    PruneMask mask_;
    std::vector<Tensor> params_;
};

TaggerModel init_model(const ModelConfig& config);

// Softmax of one logit row; used by tests and prediction.
std::vector<double> softmax(const std::vector<double>& logits);

}  // namespace np
