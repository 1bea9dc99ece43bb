#pragma once

// Full model assembly: encoder with adapters, expert stub + BC, prompt
// encoder + mixer, and the two mask decoders, plus the named parameter
// registry that drives the optimizer, the freeze contract and checkpoints.
//
// All parameters are drawn from the config seed via tagged sub-streams, so
// (seed, config) fully determines the initial state. Frozen backbone and
// expert weights stand in for pretrained checkpoints.

#include <string>
#include <vector>

#include "camoadapt/config.hpp"
#include "camoadapt/decoder.hpp"
#include "camoadapt/distill.hpp"
#include "camoadapt/encoder.hpp"
#include "camoadapt/objective.hpp"
#include "camoadapt/prompt.hpp"

namespace camo {

template <class T>
struct ParamRef {
    std::string name;
    Value<T> v;
    bool trainable = false;
    bool no_decay = false;  // norm gains/biases skip weight decay
};

template <class T>
struct Model {
    Config cfg;
    EncoderParams<T> enc;
    ExpertStub<T> expert;
    BCParams<T> bc;
    bool has_expert = false;
    PromptParams<T> prompt;
    MixerParams<T> mixer;
    DecoderParams<T> dec_rgb;
    DecoderParams<T> dec_depth;
    bool has_depth_decoder = false;
    Value<T> pe_tokens;  // decoder-side grid position table, constant

    std::vector<ParamRef<T>> params;

    bool dual_stream() const { return cfg.dual_stream(); }

    const ParamRef<T>* find(const std::string& name) const {
        for (const auto& p : params)
            if (p.name == name) return &p;
        return nullptr;
    }
};

namespace detail {

template <class T>
void reg(Model<T>& m, const std::string& name, const Value<T>& v, bool no_decay = false) {
    m.params.push_back({name, v, v.requires_grad(), no_decay});
}

template <class T>
void reg_linear(Model<T>& m, const std::string& name, const Linear<T>& l) {
    reg(m, name + ".w", l.w);
    reg(m, name + ".b", l.b);
}

template <class T>
void reg_ln(Model<T>& m, const std::string& name, const LayerNormP<T>& l) {
    reg(m, name + ".gain", l.gain, true);
    reg(m, name + ".bias", l.bias, true);
}

template <class T>
void reg_mha(Model<T>& m, const std::string& name, const Mha<T>& a) {
    reg_linear(m, name + ".q", a.q);
    reg_linear(m, name + ".k", a.k);
    reg_linear(m, name + ".v", a.v);
    reg_linear(m, name + ".o", a.o);
}

template <class T>
void reg_mlp(Model<T>& m, const std::string& name, const Mlp<T>& p) {
    reg_linear(m, name + ".fc1", p.fc1);
    reg_linear(m, name + ".fc2", p.fc2);
}

template <class T>
void reg_adapter(Model<T>& m, const std::string& name, const AdapterParams<T>& a) {
    reg_linear(m, name + ".down", a.down);
    reg_linear(m, name + ".up", a.up);
    reg_linear(m, name + ".dwt_proj", a.dwt_proj);
}

template <class T>
void reg_decoder(Model<T>& m, const std::string& name, const DecoderParams<T>& d) {
    reg(m, name + ".mask_token", d.mask_token);
    for (size_t i = 0; i < d.layers.size(); ++i) {
        const std::string ln = name + ".layer" + std::to_string(i);
        reg_mha(m, ln + ".self", d.layers[i].self_attn);
        reg_mha(m, ln + ".t2i", d.layers[i].cross_t2i);
        reg_mha(m, ln + ".i2t", d.layers[i].cross_i2t);
        reg_mlp(m, ln + ".mlp", d.layers[i].mlp);
        reg_ln(m, ln + ".ln1", d.layers[i].ln1);
        reg_ln(m, ln + ".ln2", d.layers[i].ln2);
        reg_ln(m, ln + ".ln3", d.layers[i].ln3);
        reg_ln(m, ln + ".ln4", d.layers[i].ln4);
    }
    reg(m, name + ".up1.w", d.up1_w);
    reg(m, name + ".up1.b", d.up1_b);
    reg(m, name + ".up2.w", d.up2_w);
    reg(m, name + ".up2.b", d.up2_b);
    reg_mlp(m, name + ".hyper", d.hyper);
}

inline int expert_stages_for(int patch_size) {
    int s = 0;
    while ((1 << s) < patch_size) ++s;
    return s;
}

}  // namespace detail

template <class T>
Model<T> build_model(const Config& cfg) {
    cfg.validate();
    Model<T> m;
    m.cfg = cfg;
    const EncoderConfig ec = cfg.encoder_config();
    const AdapterForm form = cfg.form();
    const int d = ec.embed_dim;

    Rng root(cfg.seed);
    Rng r_backbone = root.fork(1);
    Rng r_expert = root.fork(2);
    Rng r_prompt = root.fork(3);
    Rng r_dec_rgb = root.fork(4);
    Rng r_dec_depth = root.fork(5);

    m.enc = make_encoder<T>(r_backbone, ec, form, cfg.dwt_on());
    m.has_expert = (cfg.kd_mode() != KdMode::off && cfg.kd_mode() != KdMode::modal_only) ||
                   cfg.mix_mode() == PromptMix::full;
    if (m.has_expert) {
        m.expert = make_expert_stub<T>(r_expert, detail::expert_stages_for(ec.patch_size));
        m.bc = make_bc<T>(r_expert, m.expert.out_channels, d);
    }
    m.prompt = make_prompt_params<T>(r_prompt, d);
    m.mixer = make_mixer<T>(d, cfg.mix_mode());
    m.dec_rgb = make_decoder<T>(r_dec_rgb, d, ec.heads);
    m.has_depth_decoder = cfg.dual_stream();
    if (m.has_depth_decoder) m.dec_depth = make_decoder<T>(r_dec_depth, d, ec.heads);
    m.pe_tokens = fourier_grid_pe(m.prompt, ec.grid_side());

    // ---- registry (fixed order) ----
    detail::reg_linear(m, "enc.patch.proj", m.enc.patch.proj);
    for (int i = 0; i < ec.depth; ++i) {
        const std::string bn = "enc.block" + std::to_string(i);
        auto& b = m.enc.blocks[i];
        detail::reg_ln(m, bn + ".norm1", b.norm1);
        detail::reg_mha(m, bn + ".attn", b.attn);
        detail::reg_ln(m, bn + ".norm2", b.norm2);
        detail::reg_mlp(m, bn + ".mlp", b.mlp);
        if (b.has_adapters) {
            detail::reg_adapter(m, bn + ".adapter_rgb", b.adapter_rgb);
            if (form == AdapterForm::dual) detail::reg_adapter(m, bn + ".adapter_depth", b.adapter_depth);
        }
        if (b.has_lora) {
            detail::reg(m, bn + ".lora_rgb.a", b.lora_rgb.a);
            detail::reg(m, bn + ".lora_rgb.b", b.lora_rgb.b);
            detail::reg(m, bn + ".lora_depth.a", b.lora_depth.a);
            detail::reg(m, bn + ".lora_depth.b", b.lora_depth.b);
        }
    }
    if (m.has_expert) {
        for (size_t i = 0; i < m.expert.stages.size(); ++i) {
            detail::reg(m, "expert.stage" + std::to_string(i) + ".w", m.expert.stages[i].w);
            detail::reg(m, "expert.stage" + std::to_string(i) + ".b", m.expert.stages[i].b);
        }
        detail::reg_linear(m, "bc.proj", m.bc.proj);
        detail::reg(m, "bc.alpha", m.bc.alpha);
        detail::reg(m, "bc.beta", m.bc.beta);
    }
    detail::reg(m, "prompt.fourier", m.prompt.fourier);
    detail::reg(m, "prompt.corner_embed", m.prompt.corner_embed);
    detail::reg(m, "prompt.no_mask", m.prompt.no_mask);
    if (cfg.mix_mode() != PromptMix::off) {
        detail::reg(m, "mixer.dw_dense", m.mixer.dw_dense);
        detail::reg(m, "mixer.dw_mix", m.mixer.dw_mix);
        detail::reg(m, "mixer.pw.w", m.mixer.pw_w);
        detail::reg(m, "mixer.pw.b", m.mixer.pw_b);
    }
    detail::reg_decoder(m, "dec_rgb", m.dec_rgb);
    if (m.has_depth_decoder) detail::reg_decoder(m, "dec_depth", m.dec_depth);
    return m;
}

// Copy parameter values across scalar types, by registry position.
template <class Dst, class Src>
void copy_params(Model<Dst>& dst, const Model<Src>& src) {
    if (dst.params.size() != src.params.size())
        throw std::runtime_error("copy_params: registry size mismatch (different configs?)");
    for (size_t i = 0; i < dst.params.size(); ++i) {
        if (dst.params[i].name != src.params[i].name)
            throw std::runtime_error("copy_params: registry order mismatch at " + dst.params[i].name);
        auto& d = dst.params[i].v.data();
        const auto& s = src.params[i].v.data();
        for (size_t j = 0; j < d.size(); ++j) d[j] = (Dst)s[j];
    }
}

// Effective KD mode once stream availability is accounted for: modal terms
// need the depth stream.
inline KdMode effective_kd_mode(KdMode mode, bool dual) {
    if (dual) return mode;
    switch (mode) {
        case KdMode::both:
        case KdMode::reversed:
        case KdMode::model_only:
            return KdMode::model_only;
        default:
            return KdMode::off;
    }
}

template <class T>
struct ForwardOut {
    Value<T> y_rgb;
    Value<T> y_depth;  // undefined in single-stream configurations
    Value<T> kd_model;
    Value<T> kd_modal;
};

// One full forward pass: dual-stream encode, expert calibration, prompt
// encode + mix, dual decode, KD losses.
template <class T>
ForwardOut<T> forward_sample(const Model<T>& m, const Value<T>& rgb, const Value<T>& depth, const Box& box) {
    const EncoderConfig ec = m.enc.cfg;
    const int gs = ec.grid_side();
    ForwardOut<T> out;

    Value<T> x_rgb, x_depth;
    if (m.dual_stream()) {
        auto pair = encode_dual_stream(rgb, depth, m.enc);
        x_rgb = pair.first;
        x_depth = pair.second;
    } else {
        x_rgb = encode_stream(rgb, m.enc, Stream::rgb);
    }

    Value<T> x_expert;
    if (m.has_expert) x_expert = expert_forward(rgb, m.expert, m.bc);

    const KdMode kd = effective_kd_mode(m.cfg.kd_mode(), m.dual_stream());
    KdLosses<T> kdl = bikd_losses(x_expert, x_rgb, x_depth, kd);
    out.kd_model = kdl.model;
    out.kd_modal = kdl.modal;

    PromptBundle<T> bundle = encode_box_prompt(box, m.prompt, ec.image_size, ec.image_size, gs);
    bundle.dense = mix_dense_prompt(bundle, x_expert, x_rgb, x_depth, m.mixer, m.cfg.mix_mode(), gs);

    out.y_rgb = decode_mask(x_rgb, bundle, m.pe_tokens, m.dec_rgb, gs, ec.image_size, ec.image_size);
    if (m.dual_stream())
        out.y_depth = decode_mask(x_depth, bundle, m.pe_tokens, m.dec_depth, gs, ec.image_size, ec.image_size);
    return out;
}

// L = lambda * (DiceCE terms) + (1 - lambda) * (L_KD_model + L_KD_modal).
template <class T>
Value<T> sample_loss(const ForwardOut<T>& f, const Value<T>& gt, double lambda) {
    Value<T> l_kd = add(f.kd_model, f.kd_modal);
    return total_loss(f.y_rgb, f.y_depth, gt, l_kd, lambda);
}

}  // namespace camo
