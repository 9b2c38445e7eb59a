#include "nplast/checkpoint.hpp"

#include <cstring>

namespace np {

namespace {

constexpr char kMagic[6] = {'N', 'P', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_tensor(std::vector<std::uint8_t>& out, const Tensor& t) {
    put_string(out, t.name);
    out.push_back(1);  // dtype: f64
    put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (std::size_t s : t.shape) put_u32(out, static_cast<std::uint32_t>(s));
    for (double v : t.data) put_f64(out, v);
}

void put_moments(std::vector<std::uint8_t>& out, const std::vector<std::vector<double>>& ms) {
    put_u32(out, static_cast<std::uint32_t>(ms.size()));
    for (const auto& m : ms) {
        put_u32(out, static_cast<std::uint32_t>(m.size()));
        for (double v : m) put_f64(out, v);
    }
}

std::vector<std::vector<double>> get_moments(ByteReader& in) {
    const std::uint32_t n = in.get_u32();
    std::vector<std::vector<double>> ms(n);
    for (auto& m : ms) {
        const std::uint32_t k = in.get_u32();
        m.resize(k);
        for (auto& v : m) v = in.get_f64();
    }
    return ms;
}

// Config, mask and parameters; shared by save_checkpoint and the fingerprint.
void serialize_core(const TaggerModel& model, std::vector<std::uint8_t>& out) {
    put_string(out, model.config().to_json());
    const PruneMask& mask = model.mask();
    put_u32(out, static_cast<std::uint32_t>(mask.layers()));
    put_u32(out, static_cast<std::uint32_t>(mask.width()));
    for (std::uint8_t b : mask.bits()) put_f32(out, b ? 1.0f : 0.0f);
    put_u32(out, static_cast<std::uint32_t>(model.params().size()));
    for (const auto& t : model.params()) put_tensor(out, t);
}

}  // namespace

void save_checkpoint(const TaggerModel& model, const OptimizerState* opt_state,
                     const std::string& path) {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + sizeof(kMagic));
    put_u32(out, kVersion);
    serialize_core(model, out);
    out.push_back(opt_state ? 1 : 0);
    if (opt_state) {
        put_u64(out, opt_state->step);
        put_f64(out, opt_state->schedule.base_lr);
        put_u64(out, opt_state->schedule.warmup_steps);
        put_u64(out, opt_state->schedule.total_steps);
        put_f64(out, opt_state->weight_decay);
        put_f64(out, opt_state->beta1);
        put_f64(out, opt_state->beta2);
        put_f64(out, opt_state->eps);
        put_moments(out, opt_state->m);
        put_moments(out, opt_state->v);
    }
    write_file_bytes(path, out);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    const std::vector<std::uint8_t> bytes = read_file_bytes(path);
    ByteReader in(bytes.data(), bytes.size());

    char magic[6];
    in.get_raw(reinterpret_cast<std::uint8_t*>(magic), sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw data_error("incompatible checkpoint: bad magic in " + path);
    const std::uint32_t version = in.get_u32();
    if (version != kVersion)
        throw data_error("incompatible checkpoint version " + std::to_string(version) +
                         " (expected " + std::to_string(kVersion) + ")");

    const ModelConfig config = ModelConfig::from_json(in.get_string());
    const std::uint32_t mask_layers = in.get_u32();
    const std::uint32_t mask_d = in.get_u32();
    PruneMask mask(mask_layers, mask_d);
    for (std::size_t i = 0; i < mask.size(); ++i) mask.bits()[i] = in.get_f32() != 0.0f ? 1 : 0;

    TaggerModel model(config);
    model.set_mask(mask);
    const std::uint32_t n_tensors = in.get_u32();
    if (n_tensors != model.params().size())
        throw data_error("incompatible checkpoint: tensor count mismatch");
    for (std::uint32_t i = 0; i < n_tensors; ++i) {
        const std::string name = in.get_string();
        const std::uint8_t dtype = [&] {
            std::uint8_t b;
            in.get_raw(&b, 1);
            return b;
        }();
        if (dtype != 1) throw data_error("incompatible checkpoint: unknown dtype");
        const std::uint32_t ndim = in.get_u32();
        std::vector<std::size_t> shape(ndim);
        for (auto& s : shape) s = in.get_u32();
        Tensor& t = model.params()[i];
        if (t.name != name || t.shape != shape)
            throw data_error("incompatible checkpoint: tensor layout mismatch at " + name);
        for (auto& v : t.data) v = in.get_f64();
    }

    LoadedCheckpoint loaded{std::move(model), std::nullopt};
    std::uint8_t has_opt = 0;
    in.get_raw(&has_opt, 1);
    if (has_opt) {
        OptimizerState opt;
        opt.step = in.get_u64();
        opt.schedule.base_lr = in.get_f64();
        opt.schedule.warmup_steps = in.get_u64();
        opt.schedule.total_steps = in.get_u64();
        opt.weight_decay = in.get_f64();
        opt.beta1 = in.get_f64();
        opt.beta2 = in.get_f64();
        opt.eps = in.get_f64();
        opt.m = get_moments(in);
        opt.v = get_moments(in);
        loaded.opt_state = std::move(opt);
    }
    return loaded;
}

std::vector<std::uint8_t> model_fingerprint(const TaggerModel& model) {
    std::vector<std::uint8_t> core;
    serialize_core(model, core);
    return sha256(core.data(), core.size());
}

}  // namespace np
