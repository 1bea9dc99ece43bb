#pragma once

// Toy ViT image encoder with frozen backbone and per-stream
// frequency-separating adapters. Both streams run through the same backbone
// weights (including the trainable Norm1); the only stream-specific state is
// the adapter (or LoRA) set of each block.

#include <stdexcept>
#include <string>
#include <vector>

#include "camoadapt/nn.hpp"
#include "camoadapt/rng.hpp"
#include "camoadapt/tensor.hpp"
#include "camoadapt/wavelet.hpp"

namespace camo {

enum class AdapterForm { dual, lora, rgb_only, none };
enum class Stream { rgb, depth };

struct EncoderConfig {
    int image_size = 64;
    int patch_size = 8;
    int embed_dim = 32;
    int heads = 4;
    int depth = 4;
    int adapter_dim = 8;
    int mlp_hidden = 64;
    WaveletKind wavelet = WaveletKind::db2;

    int grid_side() const { return image_size / patch_size; }
    int tokens() const { return grid_side() * grid_side(); }

    void validate() const {
        if (image_size % patch_size != 0)
            throw std::invalid_argument("EncoderConfig: image_size " + std::to_string(image_size) +
                                        " not divisible by patch_size " + std::to_string(patch_size));
        if (embed_dim % heads != 0)
            throw std::invalid_argument("EncoderConfig: embed_dim must be divisible by heads");
        if (adapter_dim >= embed_dim)
            throw std::invalid_argument("EncoderConfig: adapter_dim must be < embed_dim");
    }
};

template <class T>
struct AdapterParams {
    Linear<T> down;      // D -> d
    Linear<T> up;        // d -> D, zero-initialized: the adapter starts as an identity
    Linear<T> dwt_proj;  // d -> d on the upsampled high-frequency map
};

template <class T>
AdapterParams<T> make_adapter(Rng& rng, int d_model, int d_bottleneck) {
    AdapterParams<T> a;
    a.down = make_linear<T>(rng, d_model, d_bottleneck, true);
    a.up.w = Value<T>::zeros({d_bottleneck, d_model}, true);
    a.up.b = Value<T>::zeros({d_model}, true);
    a.dwt_proj = make_linear<T>(rng, d_bottleneck, d_bottleneck, true);
    return a;
}

template <class T>
struct BlockParams {
    LayerNormP<T> norm1;  // trainable, shared across streams
    Mha<T> attn;          // frozen
    LayerNormP<T> norm2;  // frozen
    Mlp<T> mlp;           // frozen
    AdapterParams<T> adapter_rgb, adapter_depth;
    LoraPair<T> lora_rgb, lora_depth;
    bool has_adapters = false;
    bool has_lora = false;
};

template <class T>
struct PatchEmbedParams {
    Linear<T> proj;  // (3*p*p) -> D, frozen
    Value<T> pos;    // [N x D] fixed sinusoidal table (constant, not a parameter)
};

template <class T>
struct EncoderParams {
    EncoderConfig cfg;
    AdapterForm form = AdapterForm::dual;
    bool use_dwt = true;
    PatchEmbedParams<T> patch;
    std::vector<BlockParams<T>> blocks;
};

template <class T>
EncoderParams<T> make_encoder(Rng& rng, const EncoderConfig& cfg, AdapterForm form, bool use_dwt) {
    cfg.validate();
    EncoderParams<T> e;
    e.cfg = cfg;
    e.form = form;
    e.use_dwt = use_dwt;
    const int p = cfg.patch_size, d = cfg.embed_dim;
    e.patch.proj = make_linear<T>(rng, 3 * p * p, d, false);
    e.patch.pos = sinusoidal_pe<T>(cfg.tokens(), d);
    e.blocks.resize(cfg.depth);
    for (auto& b : e.blocks) {
        b.norm1 = make_layer_norm<T>(d, true);
        b.attn = make_mha<T>(rng, d, cfg.heads, false);
        b.norm2 = make_layer_norm<T>(d, false);
        b.mlp = make_mlp<T>(rng, d, cfg.mlp_hidden, false);
        if (form == AdapterForm::dual || form == AdapterForm::rgb_only) {
            b.has_adapters = true;
            b.adapter_rgb = make_adapter<T>(rng, d, cfg.adapter_dim);
            if (form == AdapterForm::dual) b.adapter_depth = make_adapter<T>(rng, d, cfg.adapter_dim);
        } else if (form == AdapterForm::lora) {
            b.has_lora = true;
            b.lora_rgb = make_lora<T>(rng, d, cfg.adapter_dim);
            b.lora_depth = make_lora<T>(rng, d, cfg.adapter_dim);
        }
    }
    return e;
}

// Non-overlapping p x p patches of img[3 x H x W] -> [N x 3*p*p], rows in
// row-major patch-grid order.
template <class T>
Value<T> extract_patches(const Value<T>& img, int p) {
    if (img.rank() != 3 || img.dim(0) != 3) throw std::invalid_argument("extract_patches: need [3 x H x W]");
    const int h = img.dim(1), w = img.dim(2);
    if (h % p != 0 || w % p != 0)
        throw std::invalid_argument("extract_patches: image " + shape_str(img.shape()) +
                                    " not divisible by patch size " + std::to_string(p));
    const int gh = h / p, gw = w / p, n = gh * gw, pl = 3 * p * p;
    Value<T> out = Value<T>::zeros({n, pl});
    auto src = [&](int c, int y, int x) { return (c * h + y) * w + x; };
    for (int ti = 0; ti < gh; ++ti)
        for (int tj = 0; tj < gw; ++tj)
            for (int c = 0; c < 3; ++c)
                for (int u = 0; u < p; ++u)
                    for (int v = 0; v < p; ++v)
                        out.data()[(ti * gw + tj) * pl + (c * p + u) * p + v] =
                            img.data()[src(c, ti * p + u, tj * p + v)];
    if (detail::track<T>({img.requires_grad()})) {
        out.set_requires_grad(true);
        Tape<T>::active().record([in = img.handle(), on = out.handle(), p, h, w, gh, gw, pl]() {
            if (on->g.empty() || !in->requires_grad) return;
            auto& gi = detail::grad_of(in.get());
            for (int ti = 0; ti < gh; ++ti)
                for (int tj = 0; tj < gw; ++tj)
                    for (int c = 0; c < 3; ++c)
                        for (int u = 0; u < p; ++u)
                            for (int v = 0; v < p; ++v)
                                gi[(c * h + ti * p + u) * w + tj * p + v] +=
                                    on->g[(ti * gw + tj) * pl + (c * p + u) * p + v];
        });
    }
    return out;
}

// Patchify + linear projection + fixed sinusoidal position table.
template <class T>
Value<T> patch_embed(const Value<T>& img, const EncoderParams<T>& e) {
    Value<T> tokens = linear(extract_patches(img, e.cfg.patch_size), e.patch.proj);
    return add(tokens, e.patch.pos);
}

// x + L_up(relu(L_down(x) + proj(upsample(Hf(DWT(L_down(x))))))).
// The DWT branch reshapes the bottleneck tokens onto the sqrt(N) grid, takes
// the high-frequency magnitude at half resolution, and bilinearly upsamples
// it back onto the token grid before the d->d projection.
template <class T>
Value<T> adapter_forward(const Value<T>& x, const AdapterParams<T>& ap, const EncoderConfig& cfg, bool use_dwt) {
    const int gs = cfg.grid_side();
    if (x.rank() != 2 || x.dim(0) != gs * gs)
        throw std::invalid_argument("adapter_forward: token count " + shape_str(x.shape()) +
                                    " does not form a square grid of side " + std::to_string(gs));
    Value<T> h = linear(x, ap.down);
    Value<T> pre = h;
    if (use_dwt) {
        Value<T> grid = tokens_to_grid(h, gs);
        Value<T> hf = highfreq_magnitude(dwt2_single_level(grid, cfg.wavelet));
        Value<T> up = bilinear_resize(hf, gs, gs);
        Value<T> proj = linear(grid_to_tokens(up), ap.dwt_proj);
        pre = add(h, proj);
    }
    return add(x, linear(relu(pre), ap.up));
}

// a = x + MHA(Norm1(x)); y = a + MLP(Norm2(a)) + (adapter(a) - a).
// The stream's adapter runs parallel to the frozen MLP branch.
template <class T>
Value<T> encoder_block_forward(const Value<T>& x, const BlockParams<T>& b, Stream stream,
                               const EncoderConfig& cfg, AdapterForm form, bool use_dwt) {
    const LoraPair<T>* lora = nullptr;
    if (form == AdapterForm::lora) lora = (stream == Stream::rgb) ? &b.lora_rgb : &b.lora_depth;
    Value<T> n1 = apply_ln(x, b.norm1);
    Value<T> a = add(x, mha_forward(n1, n1, b.attn, lora));
    Value<T> y = add(a, mlp_forward(apply_ln(a, b.norm2), b.mlp));
    if (form == AdapterForm::dual || form == AdapterForm::rgb_only) {
        const AdapterParams<T>& ap = (stream == Stream::depth) ? b.adapter_depth : b.adapter_rgb;
        y = add(y, sub(adapter_forward(a, ap, cfg, use_dwt), a));
    }
    return y;
}

template <class T>
Value<T> encode_stream(const Value<T>& img, const EncoderParams<T>& e, Stream stream) {
    Value<T> x = patch_embed(img, e);
    for (const auto& b : e.blocks) x = encoder_block_forward(x, b, stream, e.cfg, e.form, e.use_dwt);
    return x;
}

template <class T>
std::pair<Value<T>, Value<T>> encode_dual_stream(const Value<T>& rgb, const Value<T>& depth,
                                                 const EncoderParams<T>& e) {
    if (rgb.shape() != depth.shape())
        throw std::invalid_argument("encode_dual_stream: size mismatch " + shape_str(rgb.shape()) + " vs " +
                                    shape_str(depth.shape()));
    return {encode_stream(rgb, e, Stream::rgb), encode_stream(depth, e, Stream::depth)};
}

}  // namespace camo
