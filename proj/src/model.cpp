#include "nplast/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "json.hpp"

namespace np {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kGeluScale = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluCoef = 0.044715;

// out[t,o] = b[o] + sum_i W[o,i] * in[t,i]
void linear_forward(double* out, const double* in, const double* w, const double* b,
                    std::size_t T, std::size_t IN, std::size_t OUT) {
    for (std::size_t t = 0; t < T; ++t) {
        const double* in_t = in + t * IN;
        double* out_t = out + t * OUT;
        for (std::size_t o = 0; o < OUT; ++o) {
            const double* wrow = w + o * IN;
            double acc = b ? b[o] : 0.0;
            for (std::size_t i = 0; i < IN; ++i) acc += wrow[i] * in_t[i];
            out_t[o] = acc;
        }
    }
}

void linear_backward(double* d_in, double* d_w, double* d_b, const double* d_out,
                     const double* in, const double* w, std::size_t T, std::size_t IN,
                     std::size_t OUT) {
    for (std::size_t t = 0; t < T; ++t) {
        const double* dout_t = d_out + t * OUT;
        const double* in_t = in + t * IN;
        double* din_t = d_in ? d_in + t * IN : nullptr;
        for (std::size_t o = 0; o < OUT; ++o) {
            const double d = dout_t[o];
            if (d_b) d_b[o] += d;
            const double* wrow = w + o * IN;
            double* dwrow = d_w + o * IN;
            for (std::size_t i = 0; i < IN; ++i) {
                if (din_t) din_t[i] += wrow[i] * d;
                dwrow[i] += in_t[i] * d;
            }
        }
    }
}

void layernorm_forward(double* out, double* mean, double* rstd, const double* in,
                       const double* gain, const double* bias, std::size_t T, std::size_t d) {
    for (std::size_t t = 0; t < T; ++t) {
        const double* x = in + t * d;
        double m = 0.0;
        for (std::size_t i = 0; i < d; ++i) m += x[i];
        m /= static_cast<double>(d);
        double v = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double s = x[i] - m;
            v += s * s;
        }
        v /= static_cast<double>(d);
        const double r = 1.0 / std::sqrt(v + kLnEps);
        double* y = out + t * d;
        for (std::size_t i = 0; i < d; ++i) y[i] = gain[i] * ((x[i] - m) * r) + bias[i];
        mean[t] = m;
        rstd[t] = r;
    }
}

void layernorm_backward(double* d_in, double* d_gain, double* d_bias, const double* d_out,
                        const double* in, const double* gain, const double* mean,
                        const double* rstd, std::size_t T, std::size_t d) {
    for (std::size_t t = 0; t < T; ++t) {
        const double* dout_t = d_out + t * d;
        const double* in_t = in + t * d;
        double* din_t = d_in + t * d;
        const double m = mean[t];
        const double r = rstd[t];

        double dnorm_mean = 0.0;
        double dnorm_norm_mean = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double norm = (in_t[i] - m) * r;
            const double dnorm = gain[i] * dout_t[i];
            dnorm_mean += dnorm;
            dnorm_norm_mean += dnorm * norm;
        }
        dnorm_mean /= static_cast<double>(d);
        dnorm_norm_mean /= static_cast<double>(d);

        for (std::size_t i = 0; i < d; ++i) {
            const double norm = (in_t[i] - m) * r;
            const double dnorm = gain[i] * dout_t[i];
            d_gain[i] += norm * dout_t[i];
            d_bias[i] += dout_t[i];
            din_t[i] += (dnorm - dnorm_mean - norm * dnorm_norm_mean) * r;
        }
    }
}

double gelu(double x) {
    const double cube = kGeluCoef * x * x * x;
    return 0.5 * x * (1.0 + std::tanh(kGeluScale * (x + cube)));
}

double gelu_grad(double x) {
    const double cube = kGeluCoef * x * x * x;
    const double arg = kGeluScale * (x + cube);
    const double th = std::tanh(arg);
    const double sech2 = 1.0 - th * th;
    return 0.5 * (1.0 + th) + 0.5 * x * sech2 * kGeluScale * (1.0 + 3.0 * kGeluCoef * x * x);
}

struct BlockCache {
    std::vector<double> q, k, v;       // T*d
    std::vector<double> att;           // H*T*T
    std::vector<double> mix;           // T*d
    std::vector<double> a_lin;         // T*d, attention output before dropout
    std::vector<double> a_mult;        // T*d dropout multipliers (empty = 1)
    std::vector<double> r1, x1;        // T*d
    std::vector<double> mean1, rstd1;  // T
    std::vector<double> f1, gact;      // T*ffn
    std::vector<double> f2;            // T*d, FFN output before dropout
    std::vector<double> f2_mult;       // T*d
    std::vector<double> r2, x2;        // T*d
    std::vector<double> mean2, rstd2;  // T
    std::vector<double> out;           // T*d, post-mask representation
};

struct SentenceCache {
    std::vector<double> emb_sum;       // T*d, token + positional embedding
    std::vector<double> mean0, rstd0;  // embedding layer norm statistics
    std::vector<double> emb_mult;      // T*d dropout multipliers (empty = 1)
    std::vector<double> x0;            // T*d, post-mask representation of layer 0
    std::vector<BlockCache> blocks;
    std::vector<double> logits;  // T*n_tags
};

void fill_dropout(std::vector<double>& mult, std::size_t n, double rate, Rng& rng) {
    mult.resize(n);
    const double keep = 1.0 - rate;
    const double scale = 1.0 / keep;
    for (std::size_t i = 0; i < n; ++i) mult[i] = rng.next_double() < keep ? scale : 0.0;
}

}  // namespace

void ModelConfig::validate() const {
    if (n_layers < 1 || d_model < 1 || n_heads < 1 || d_ffn < 1 || vocab_size < 1 || n_tags < 1)
        throw config_error("model config: all size fields must be >= 1");
    if (max_len < 2) throw config_error("model config: max_len must be >= 2");
    if (d_model % n_heads != 0)
        throw config_error("model config: d_model must be divisible by n_heads");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
        throw config_error("model config: dropout_rate must be in [0, 1)");
}

std::string ModelConfig::to_json() const {
    nlohmann::json j;
    j["n_layers"] = n_layers;
    j["d_model"] = d_model;
    j["n_heads"] = n_heads;
    j["d_ffn"] = d_ffn;
    j["vocab_size"] = vocab_size;
    j["n_tags"] = n_tags;
    j["max_len"] = max_len;
    j["dropout_rate"] = dropout_rate;
    j["seed"] = seed;
    j["causal"] = causal;
    return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw data_error(std::string("bad model config json: ") + e.what());
    }
    ModelConfig c;
    c.n_layers = j.at("n_layers").get<std::size_t>();
    c.d_model = j.at("d_model").get<std::size_t>();
    c.n_heads = j.at("n_heads").get<std::size_t>();
    c.d_ffn = j.at("d_ffn").get<std::size_t>();
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.n_tags = j.at("n_tags").get<std::size_t>();
    c.max_len = j.at("max_len").get<std::size_t>();
    c.dropout_rate = j.at("dropout_rate").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.causal = j.at("causal").get<bool>();
    return c;
}

PruneMask::PruneMask(std::size_t n_layers_plus1, std::size_t d)
    : layers_(n_layers_plus1), d_(d), bits_(n_layers_plus1 * d, 1) {}

std::size_t PruneMask::alive_count() const {
    std::size_t n = 0;
    for (std::uint8_t b : bits_) n += b;
    return n;
}

std::size_t PruneMask::alive_count_in_layer(std::size_t layer) const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < d_; ++i) n += bits_[layer * d_ + i];
    return n;
}

void Gradients::zero() {
    for (auto& t : g) std::fill(t.begin(), t.end(), 0.0);
}

void Gradients::add(const Gradients& other) {
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto& src = other.g[i];
        auto& dst = g[i];
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
}

std::vector<std::pair<std::string, std::vector<std::size_t>>> TaggerModel::tensor_layout(
    const ModelConfig& c) {
    std::vector<std::pair<std::string, std::vector<std::size_t>>> layout;
    layout.emplace_back("tok_emb", std::vector<std::size_t>{c.vocab_size, c.d_model});
    layout.emplace_back("pos_emb", std::vector<std::size_t>{c.max_len, c.d_model});
    layout.emplace_back("ln_emb_g", std::vector<std::size_t>{c.d_model});
    layout.emplace_back("ln_emb_b", std::vector<std::size_t>{c.d_model});
    for (std::size_t l = 0; l < c.n_layers; ++l) {
        const std::string p = "blk" + std::to_string(l) + ".";
        layout.emplace_back(p + "attn_wq", std::vector<std::size_t>{c.d_model, c.d_model});
        layout.emplace_back(p + "attn_bq", std::vector<std::size_t>{c.d_model});
        layout.emplace_back(p + "attn_wk", std::vector<std::size_t>{c.d_model, c.d_model});
        layout.emplace_back(p + "attn_bk", std::vector<std::size_t>{c.d_model});
        layout.emplace_back(p + "attn_wv", std::vector<std::size_t>{c.d_model, c.d_model});
        layout.emplace_back(p + "attn_bv", std::vector<std::size_t>{c.d_model});
        layout.emplace_back(p + "attn_wo", std::vector<std::size_t>{c.d_model, c.d_model});
        layout.emplace_back(p + "attn_bo", std::vector<std::size_t>{c.d_model});
        layout.emplace_back(p + "ln1_g", std::vector<std::size_t>{c.d_model});
        layout.emplace_back(p + "ln1_b", std::vector<std::size_t>{c.d_model});
        layout.emplace_back(p + "ffn_w1", std::vector<std::size_t>{c.d_ffn, c.d_model});
        layout.emplace_back(p + "ffn_b1", std::vector<std::size_t>{c.d_ffn});
        layout.emplace_back(p + "ffn_w2", std::vector<std::size_t>{c.d_model, c.d_ffn});
        layout.emplace_back(p + "ffn_b2", std::vector<std::size_t>{c.d_model});
        layout.emplace_back(p + "ln2_g", std::vector<std::size_t>{c.d_model});
        layout.emplace_back(p + "ln2_b", std::vector<std::size_t>{c.d_model});
    }
    layout.emplace_back("head_w", std::vector<std::size_t>{c.n_tags, c.d_model});
    layout.emplace_back("head_b", std::vector<std::size_t>{c.n_tags});
    return layout;
}

TaggerModel::TaggerModel(const ModelConfig& config) : config_(config) {
    config_.validate();
    mask_ = PruneMask::all_alive(config_);
    init_params();
}

TaggerModel init_model(const ModelConfig& config) { return TaggerModel(config); }

void TaggerModel::init_params() {
    params_.clear();
    Rng rng(config_.seed);
    for (const auto& [name, shape] : tensor_layout(config_)) {
        Tensor t;
        t.name = name;
        t.shape = shape;
        std::size_t n = 1;
        for (std::size_t s : shape) n *= s;
        t.data.assign(n, 0.0);
        const bool is_weight = shape.size() == 2;
        const bool is_gain = name.find("ln") != std::string::npos && name.back() == 'g';
        if (is_weight) {
            for (double& v : t.data) v = 0.02 * rng.next_normal();
        } else if (is_gain) {
            std::fill(t.data.begin(), t.data.end(), 1.0);
        }
        params_.push_back(std::move(t));
    }
}

std::size_t TaggerModel::param_count() const {
    std::size_t n = 0;
    for (const auto& t : params_) n += t.size();
    return n;
}

std::size_t TaggerModel::tensor_index(const std::string& name) const {
    for (std::size_t i = 0; i < params_.size(); ++i)
        if (params_[i].name == name) return i;
    throw config_error("unknown tensor: " + name);
}

Gradients TaggerModel::make_gradients() const {
    Gradients grads;
    grads.g.reserve(params_.size());
    for (const auto& t : params_) grads.g.emplace_back(t.size(), 0.0);
    return grads;
}

void TaggerModel::set_mask(const PruneMask& mask) {
    if (mask.layers() != config_.n_layers + 1 || mask.width() != config_.d_model)
        throw config_error("mask dimensions do not match model config");
    mask_ = mask;
}

namespace {

// Runs the full forward pass for one sentence, filling the cache. When
// `training` is set, dropout multipliers are drawn from `rng`.
void forward_cached(const ModelConfig& cfg, const std::vector<Tensor>& P, const PruneMask& mask,
                    const TokenIds& ids, SentenceCache& c, bool training, Rng* rng) {
    const std::size_t T = ids.size();
    const std::size_t d = cfg.d_model;
    const std::size_t H = cfg.n_heads;
    const std::size_t dh = d / H;
    const std::size_t ffn = cfg.d_ffn;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const bool use_dropout = training && cfg.dropout_rate > 0.0;

    const double* tok_emb = P[0].data.data();
    const double* pos_emb = P[1].data.data();
    const double* ln_emb_g = P[2].data.data();
    const double* ln_emb_b = P[3].data.data();

    c.emb_sum.assign(T * d, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        const double* row = tok_emb + static_cast<std::size_t>(ids[t]) * d;
        const double* pos = pos_emb + t * d;
        double* x = c.emb_sum.data() + t * d;
        for (std::size_t i = 0; i < d; ++i) x[i] = row[i] + pos[i];
    }
    std::vector<double> ln_out(T * d);
    c.mean0.resize(T);
    c.rstd0.resize(T);
    layernorm_forward(ln_out.data(), c.mean0.data(), c.rstd0.data(), c.emb_sum.data(), ln_emb_g,
                      ln_emb_b, T, d);
    c.x0.assign(T * d, 0.0);
    if (use_dropout) fill_dropout(c.emb_mult, T * d, cfg.dropout_rate, *rng);
    for (std::size_t t = 0; t < T; ++t) {
        double* x = c.x0.data() + t * d;
        for (std::size_t i = 0; i < d; ++i) {
            double v = ln_out[t * d + i];
            if (use_dropout) v *= c.emb_mult[t * d + i];
            x[i] = mask.alive(0, i) ? v : 0.0;
        }
    }

    c.blocks.resize(cfg.n_layers);
    const double* x_in = c.x0.data();
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        BlockCache& b = c.blocks[l];
        const std::size_t base = 4 + l * 16;
        const double* wq = P[base + 0].data.data();
        const double* bq = P[base + 1].data.data();
        const double* wk = P[base + 2].data.data();
        const double* bk = P[base + 3].data.data();
        const double* wv = P[base + 4].data.data();
        const double* bv = P[base + 5].data.data();
        const double* wo = P[base + 6].data.data();
        const double* bo = P[base + 7].data.data();
        const double* ln1g = P[base + 8].data.data();
        const double* ln1b = P[base + 9].data.data();
        const double* w1 = P[base + 10].data.data();
        const double* b1 = P[base + 11].data.data();
        const double* w2 = P[base + 12].data.data();
        const double* b2 = P[base + 13].data.data();
        const double* ln2g = P[base + 14].data.data();
        const double* ln2b = P[base + 15].data.data();

        b.q.assign(T * d, 0.0);
        b.k.assign(T * d, 0.0);
        b.v.assign(T * d, 0.0);
        linear_forward(b.q.data(), x_in, wq, bq, T, d, d);
        linear_forward(b.k.data(), x_in, wk, bk, T, d, d);
        linear_forward(b.v.data(), x_in, wv, bv, T, d, d);

        b.att.assign(H * T * T, 0.0);
        b.mix.assign(T * d, 0.0);
        std::vector<double> scores(T);
        for (std::size_t h = 0; h < H; ++h) {
            for (std::size_t t = 0; t < T; ++t) {
                const std::size_t t_max = cfg.causal ? t + 1 : T;
                const double* q_t = b.q.data() + t * d + h * dh;
                double maxv = -1e30;
                for (std::size_t t2 = 0; t2 < t_max; ++t2) {
                    const double* k_t2 = b.k.data() + t2 * d + h * dh;
                    double s = 0.0;
                    for (std::size_t j = 0; j < dh; ++j) s += q_t[j] * k_t2[j];
                    s *= scale;
                    scores[t2] = s;
                    maxv = std::max(maxv, s);
                }
                double sum = 0.0;
                double* att_t = b.att.data() + h * T * T + t * T;
                for (std::size_t t2 = 0; t2 < t_max; ++t2) {
                    const double e = std::exp(scores[t2] - maxv);
                    att_t[t2] = e;
                    sum += e;
                }
                const double inv = 1.0 / sum;
                for (std::size_t t2 = 0; t2 < t_max; ++t2) att_t[t2] *= inv;
                double* mix_t = b.mix.data() + t * d + h * dh;
                for (std::size_t t2 = 0; t2 < t_max; ++t2) {
                    const double* v_t2 = b.v.data() + t2 * d + h * dh;
                    const double a = att_t[t2];
                    for (std::size_t j = 0; j < dh; ++j) mix_t[j] += a * v_t2[j];
                }
            }
        }

        b.a_lin.assign(T * d, 0.0);
        linear_forward(b.a_lin.data(), b.mix.data(), wo, bo, T, d, d);
        if (use_dropout) fill_dropout(b.a_mult, T * d, cfg.dropout_rate, *rng);

        b.r1.resize(T * d);
        for (std::size_t i = 0; i < T * d; ++i) {
            const double a = use_dropout ? b.a_lin[i] * b.a_mult[i] : b.a_lin[i];
            b.r1[i] = x_in[i] + a;
        }
        b.x1.resize(T * d);
        b.mean1.resize(T);
        b.rstd1.resize(T);
        layernorm_forward(b.x1.data(), b.mean1.data(), b.rstd1.data(), b.r1.data(), ln1g, ln1b, T,
                          d);

        b.f1.assign(T * ffn, 0.0);
        linear_forward(b.f1.data(), b.x1.data(), w1, b1, T, d, ffn);
        b.gact.resize(T * ffn);
        for (std::size_t i = 0; i < T * ffn; ++i) b.gact[i] = gelu(b.f1[i]);
        b.f2.assign(T * d, 0.0);
        linear_forward(b.f2.data(), b.gact.data(), w2, b2, T, ffn, d);
        if (use_dropout) fill_dropout(b.f2_mult, T * d, cfg.dropout_rate, *rng);

        b.r2.resize(T * d);
        for (std::size_t i = 0; i < T * d; ++i) {
            const double f = use_dropout ? b.f2[i] * b.f2_mult[i] : b.f2[i];
            b.r2[i] = b.x1[i] + f;
        }
        b.x2.resize(T * d);
        b.mean2.resize(T);
        b.rstd2.resize(T);
        layernorm_forward(b.x2.data(), b.mean2.data(), b.rstd2.data(), b.r2.data(), ln2g, ln2b, T,
                          d);

        b.out.resize(T * d);
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t i = 0; i < d; ++i)
                b.out[t * d + i] = mask.alive(l + 1, i) ? b.x2[t * d + i] : 0.0;
        x_in = b.out.data();
    }

    const std::size_t head = 4 + cfg.n_layers * 16;
    c.logits.assign(T * cfg.n_tags, 0.0);
    linear_forward(c.logits.data(), x_in, P[head].data.data(), P[head + 1].data.data(), T, d,
                   cfg.n_tags);
}

// Backpropagates d_logits through the cached forward pass, accumulating into
// `G` (parallel to the parameter list).
void backward_cached(const ModelConfig& cfg, const std::vector<Tensor>& P, const PruneMask& mask,
                     const TokenIds& ids, const SentenceCache& c,
                     const std::vector<double>& d_logits, Gradients& G) {
    const std::size_t T = ids.size();
    const std::size_t d = cfg.d_model;
    const std::size_t H = cfg.n_heads;
    const std::size_t dh = d / H;
    const std::size_t ffn = cfg.d_ffn;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const bool have_dropout = !c.emb_mult.empty();

    const std::size_t head = 4 + cfg.n_layers * 16;
    std::vector<double> d_out(T * d, 0.0);
    const double* top = cfg.n_layers > 0 ? c.blocks.back().out.data() : c.x0.data();
    linear_backward(d_out.data(), G.g[head].data(), G.g[head + 1].data(), d_logits.data(), top,
                    P[head].data.data(), T, d, cfg.n_tags);

    std::vector<double> d_x2(T * d), d_r2(T * d), d_x1(T * d), d_f2(T * d), d_gact(T * ffn),
        d_f1(T * ffn), d_r1(T * d), d_alin(T * d), d_mix(T * d), d_q(T * d), d_k(T * d),
        d_v(T * d), d_in(T * d);

    for (std::size_t l = cfg.n_layers; l-- > 0;) {
        const BlockCache& b = c.blocks[l];
        const std::size_t base = 4 + l * 16;
        const double* x_in = l == 0 ? c.x0.data() : c.blocks[l - 1].out.data();

        // mask on block output
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t i = 0; i < d; ++i)
                d_x2[t * d + i] = mask.alive(l + 1, i) ? d_out[t * d + i] : 0.0;

        std::fill(d_r2.begin(), d_r2.end(), 0.0);
        layernorm_backward(d_r2.data(), G.g[base + 14].data(), G.g[base + 15].data(), d_x2.data(),
                           b.r2.data(), P[base + 14].data.data(), b.mean2.data(), b.rstd2.data(),
                           T, d);

        // r2 = x1 + dropout(f2)
        std::copy(d_r2.begin(), d_r2.end(), d_x1.begin());
        for (std::size_t i = 0; i < T * d; ++i)
            d_f2[i] = have_dropout ? d_r2[i] * b.f2_mult[i] : d_r2[i];

        std::fill(d_gact.begin(), d_gact.end(), 0.0);
        linear_backward(d_gact.data(), G.g[base + 12].data(), G.g[base + 13].data(), d_f2.data(),
                        b.gact.data(), P[base + 12].data.data(), T, ffn, d);
        for (std::size_t i = 0; i < T * ffn; ++i) d_f1[i] = d_gact[i] * gelu_grad(b.f1[i]);
        linear_backward(d_x1.data(), G.g[base + 10].data(), G.g[base + 11].data(), d_f1.data(),
                        b.x1.data(), P[base + 10].data.data(), T, d, ffn);

        std::fill(d_r1.begin(), d_r1.end(), 0.0);
        layernorm_backward(d_r1.data(), G.g[base + 8].data(), G.g[base + 9].data(), d_x1.data(),
                           b.r1.data(), P[base + 8].data.data(), b.mean1.data(), b.rstd1.data(),
                           T, d);

        // r1 = x_in + dropout(a_lin)
        std::copy(d_r1.begin(), d_r1.end(), d_in.begin());
        for (std::size_t i = 0; i < T * d; ++i)
            d_alin[i] = have_dropout ? d_r1[i] * b.a_mult[i] : d_r1[i];

        std::fill(d_mix.begin(), d_mix.end(), 0.0);
        linear_backward(d_mix.data(), G.g[base + 6].data(), G.g[base + 7].data(), d_alin.data(),
                        b.mix.data(), P[base + 6].data.data(), T, d, d);

        std::fill(d_q.begin(), d_q.end(), 0.0);
        std::fill(d_k.begin(), d_k.end(), 0.0);
        std::fill(d_v.begin(), d_v.end(), 0.0);
        std::vector<double> d_att(T), d_pre(T);
        for (std::size_t h = 0; h < H; ++h) {
            for (std::size_t t = 0; t < T; ++t) {
                const std::size_t t_max = cfg.causal ? t + 1 : T;
                const double* att_t = b.att.data() + h * T * T + t * T;
                const double* dmix_t = d_mix.data() + t * d + h * dh;
                for (std::size_t t2 = 0; t2 < t_max; ++t2) {
                    const double* v_t2 = b.v.data() + t2 * d + h * dh;
                    double* dv_t2 = d_v.data() + t2 * d + h * dh;
                    double acc = 0.0;
                    const double a = att_t[t2];
                    for (std::size_t j = 0; j < dh; ++j) {
                        acc += v_t2[j] * dmix_t[j];
                        dv_t2[j] += a * dmix_t[j];
                    }
                    d_att[t2] = acc;
                }
                // softmax jacobian: d_pre = att .* (d_att - sum(att .* d_att))
                double dot = 0.0;
                for (std::size_t t2 = 0; t2 < t_max; ++t2) dot += att_t[t2] * d_att[t2];
                for (std::size_t t2 = 0; t2 < t_max; ++t2)
                    d_pre[t2] = att_t[t2] * (d_att[t2] - dot);

                const double* q_t = b.q.data() + t * d + h * dh;
                double* dq_t = d_q.data() + t * d + h * dh;
                for (std::size_t t2 = 0; t2 < t_max; ++t2) {
                    const double* k_t2 = b.k.data() + t2 * d + h * dh;
                    double* dk_t2 = d_k.data() + t2 * d + h * dh;
                    const double dp = d_pre[t2] * scale;
                    for (std::size_t j = 0; j < dh; ++j) {
                        dq_t[j] += k_t2[j] * dp;
                        dk_t2[j] += q_t[j] * dp;
                    }
                }
            }
        }

        linear_backward(d_in.data(), G.g[base + 0].data(), G.g[base + 1].data(), d_q.data(), x_in,
                        P[base + 0].data.data(), T, d, d);
        linear_backward(d_in.data(), G.g[base + 2].data(), G.g[base + 3].data(), d_k.data(), x_in,
                        P[base + 2].data.data(), T, d, d);
        linear_backward(d_in.data(), G.g[base + 4].data(), G.g[base + 5].data(), d_v.data(), x_in,
                        P[base + 4].data.data(), T, d, d);

        std::swap(d_out, d_in);
    }

    // embedding: x0 = mask .* dropout(layer_norm(tok_emb[id] + pos_emb[t]))
    std::vector<double> d_ln(T * d);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t i = 0; i < d; ++i) {
            double dv = mask.alive(0, i) ? d_out[t * d + i] : 0.0;
            if (have_dropout) dv *= c.emb_mult[t * d + i];
            d_ln[t * d + i] = dv;
        }
    }
    std::vector<double> d_emb(T * d, 0.0);
    layernorm_backward(d_emb.data(), G.g[2].data(), G.g[3].data(), d_ln.data(), c.emb_sum.data(),
                       P[2].data.data(), c.mean0.data(), c.rstd0.data(), T, d);
    double* d_tok = G.g[0].data();
    double* d_pos = G.g[1].data();
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t i = 0; i < d; ++i) {
            d_tok[static_cast<std::size_t>(ids[t]) * d + i] += d_emb[t * d + i];
            d_pos[t * d + i] += d_emb[t * d + i];
        }
    }
}

void check_sentence(const ModelConfig& cfg, const TokenIds& ids) {
    if (ids.size() > cfg.max_len)
        throw data_error("sentence length " + std::to_string(ids.size()) + " exceeds max_len " +
                         std::to_string(cfg.max_len));
    std::string bad;
    for (std::uint32_t id : ids)
        if (id >= cfg.vocab_size) bad += (bad.empty() ? "" : ", ") + std::to_string(id);
    if (!bad.empty()) throw data_error("token ids out of range: " + bad);
}

}  // namespace

SentenceForward TaggerModel::forward_sentence(const TokenIds& ids) const {
    check_sentence(config_, ids);
    SentenceCache cache;
    forward_cached(config_, params_, mask_, ids, cache, false, nullptr);
    SentenceForward out;
    out.logits = std::move(cache.logits);
    out.reps.reserve(config_.n_layers + 1);
    out.reps.push_back(std::move(cache.x0));
    for (auto& b : cache.blocks) out.reps.push_back(std::move(b.out));
    return out;
}

std::vector<SentenceForward> TaggerModel::forward(const std::vector<TokenIds>& batch) const {
    std::vector<SentenceForward> out(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) out[i] = forward_sentence(batch[i]);
    return out;
}

double TaggerModel::loss_and_gradients(const std::vector<TokenIds>& batch,
                                       const std::vector<std::vector<std::uint32_t>>& gold_tags,
                                       Gradients& out, const std::uint64_t* dropout_seed,
                                       std::size_t n_threads) const {
    if (batch.empty()) throw data_error("loss_and_gradients: empty batch");
    if (gold_tags.size() != batch.size())
        throw data_error("loss_and_gradients: gold tags misaligned with batch");
    std::size_t total_tokens = 0;
    for (std::size_t s = 0; s < batch.size(); ++s) {
        check_sentence(config_, batch[s]);
        if (gold_tags[s].size() != batch[s].size())
            throw data_error("loss_and_gradients: gold tags misaligned with batch");
        for (std::uint32_t tag : gold_tags[s])
            if (tag >= config_.n_tags) throw data_error("gold tag id out of range");
        total_tokens += batch[s].size();
    }
    if (total_tokens == 0) throw data_error("loss_and_gradients: batch has no tokens");

    out.zero();
    const double inv_tokens = 1.0 / static_cast<double>(total_tokens);
    const std::size_t workers = std::max<std::size_t>(1, std::min(n_threads, batch.size()));

    std::vector<Gradients> worker_grads(workers);
    std::vector<double> worker_loss(workers, 0.0);
    for (std::size_t w = 0; w < workers; ++w) worker_grads[w] = make_gradients();

    parallel_chunks(batch.size(), workers, [&](std::size_t w, std::size_t begin, std::size_t end) {
        Gradients& G = worker_grads[w];
        double loss = 0.0;
        SentenceCache cache;
        for (std::size_t s = begin; s < end; ++s) {
            const TokenIds& ids = batch[s];
            const std::size_t T = ids.size();
            Rng drop_rng(dropout_seed ? mix_seed(*dropout_seed, s) : 0);
            forward_cached(config_, params_, mask_, ids, cache, dropout_seed != nullptr,
                           &drop_rng);

            std::vector<double> d_logits(T * config_.n_tags, 0.0);
            for (std::size_t t = 0; t < T; ++t) {
                const double* row = cache.logits.data() + t * config_.n_tags;
                double maxv = row[0];
                for (std::size_t k = 1; k < config_.n_tags; ++k) maxv = std::max(maxv, row[k]);
                double sum = 0.0;
                for (std::size_t k = 0; k < config_.n_tags; ++k) sum += std::exp(row[k] - maxv);
                const double log_sum = std::log(sum) + maxv;
                const std::uint32_t gold = gold_tags[s][t];
                loss += log_sum - row[gold];
                double* dl = d_logits.data() + t * config_.n_tags;
                for (std::size_t k = 0; k < config_.n_tags; ++k)
                    dl[k] = std::exp(row[k] - log_sum) * inv_tokens;
                dl[gold] -= inv_tokens;
            }
            backward_cached(config_, params_, mask_, ids, cache, d_logits, G);
        }
        worker_loss[w] = loss;
    });

    double loss = 0.0;
    for (std::size_t w = 0; w < workers; ++w) {
        loss += worker_loss[w];
        out.add(worker_grads[w]);
    }
    loss *= inv_tokens;
    if (!std::isfinite(loss)) throw numeric_error("non-finite training loss");
    return loss;
}

std::vector<std::vector<std::uint32_t>> TaggerModel::predict(const std::vector<TokenIds>& batch,
                                                             std::size_t n_threads) const {
    std::vector<std::vector<std::uint32_t>> out(batch.size());
    parallel_chunks(batch.size(), n_threads, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t s = begin; s < end; ++s) {
            const SentenceForward fw = forward_sentence(batch[s]);
            const std::size_t T = batch[s].size();
            std::vector<std::uint32_t> tags(T, 0);
            for (std::size_t t = 0; t < T; ++t) {
                const double* row = fw.logits.data() + t * config_.n_tags;
                std::size_t best = 0;
                for (std::size_t k = 1; k < config_.n_tags; ++k)
                    if (row[k] > row[best]) best = k;
                tags[t] = static_cast<std::uint32_t>(best);
            }
            out[s] = std::move(tags);
        }
    });
    return out;
}

void TaggerModel::zero_masked_params() {
    const std::size_t d = config_.d_model;
    const std::size_t L = config_.n_layers;
    for (std::size_t l = 0; l <= L; ++l) {
        for (std::size_t i = 0; i < d; ++i) {
            if (mask_.alive(l, i)) continue;
            if (l == 0) {
                // producing: embedding layer norm (zeroing raw embedding
                // columns instead would shift the norm statistics of the
                // other units and break mask equivalence)
                params_[2].data[i] = 0.0;
                params_[3].data[i] = 0.0;
            } else {
                // producing: final layer norm of block l-1
                const std::size_t base = 4 + (l - 1) * 16;
                params_[base + 14].data[i] = 0.0;
                params_[base + 15].data[i] = 0.0;
            }
            if (l < L) {
                // outgoing: q/k/v columns of the consuming block
                const std::size_t base = 4 + l * 16;
                for (std::size_t which : {base + 0, base + 2, base + 4}) {
                    auto& w = params_[which].data;
                    for (std::size_t r = 0; r < d; ++r) w[r * d + i] = 0.0;
                }
            } else {
                // outgoing: classifier head columns
                auto& w = params_[tensor_index("head_w")].data;
                for (std::size_t r = 0; r < config_.n_tags; ++r) w[r * d + i] = 0.0;
            }
        }
    }
}

std::vector<double> softmax(const std::vector<double>& logits) {
    std::vector<double> p(logits.size());
    double maxv = logits[0];
    for (double v : logits) maxv = std::max(maxv, v);
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - maxv);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

}  // namespace np
