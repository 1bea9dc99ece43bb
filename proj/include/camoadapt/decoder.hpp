#pragma once

// Toy SAM-style mask decoder: prompt self-attention + bidirectional
// cross-attention layers, a x4 transpose-conv upsampler, and a hypernetwork
// MLP that turns the mask token into a per-image mask filter. The model owns
// two structurally identical decoders (RGB and its depth replica) that share
// nothing but their initialization scheme.

#include <stdexcept>
#include <vector>

#include "camoadapt/nn.hpp"
#include "camoadapt/prompt.hpp"
#include "camoadapt/tensor.hpp"

namespace camo {

template <class T>
struct TwoWayLayer {
    Mha<T> self_attn;   // token self-attention
    Mha<T> cross_t2i;   // tokens query image
    Mha<T> cross_i2t;   // image queries tokens
    Mlp<T> mlp;
    LayerNormP<T> ln1, ln2, ln3, ln4;
};

template <class T>
struct DecoderParams {
    Value<T> mask_token;  // [1 x D]
    std::vector<TwoWayLayer<T>> layers;
    Value<T> up1_w, up1_b;  // ConvT D -> D/2, k2 s2
    Value<T> up2_w, up2_b;  // ConvT D/2 -> D/4, k2 s2
    Mlp<T> hyper;           // D -> D -> D/4
};

template <class T>
DecoderParams<T> make_decoder(Rng& rng, int d, int heads, int num_layers = 2) {
    if (d % 4 != 0) throw std::invalid_argument("make_decoder: embed dim must be divisible by 4");
    DecoderParams<T> p;
    p.mask_token = Value<T>::zeros({1, d}, true);
    for (auto& v : p.mask_token.data()) v = T(rng.gaussian() * 0.02);
    p.layers.resize(num_layers);
    for (auto& l : p.layers) {
        l.self_attn = make_mha<T>(rng, d, heads, true);
        l.cross_t2i = make_mha<T>(rng, d, heads, true);
        l.cross_i2t = make_mha<T>(rng, d, heads, true);
        l.mlp = make_mlp<T>(rng, d, 2 * d, true);
        l.ln1 = make_layer_norm<T>(d, true);
        l.ln2 = make_layer_norm<T>(d, true);
        l.ln3 = make_layer_norm<T>(d, true);
        l.ln4 = make_layer_norm<T>(d, true);
    }
    auto convt = [&](int cin, int cout) {
        Value<T> w = Value<T>::zeros({cin, cout, 2, 2}, true);
        const double s = std::sqrt(2.0 / double(cin * 4));
        for (auto& v : w.data()) v = T(rng.gaussian() * s);
        return w;
    };
    p.up1_w = convt(d, d / 2);
    p.up1_b = Value<T>::zeros({d / 2}, true);
    p.up2_w = convt(d / 2, d / 4);
    p.up2_b = Value<T>::zeros({d / 4}, true);
    p.hyper = make_mlp<T>(rng, d, d, true);
    p.hyper.fc2 = make_linear<T>(rng, d, d / 4, true);
    return p;
}

// Self-attention on tokens, tokens->image cross, MLP, image->tokens cross;
// each step residual + layer norm.
template <class T>
std::pair<Value<T>, Value<T>> two_way_attention_layer(const Value<T>& tokens, const Value<T>& image,
                                                      const TwoWayLayer<T>& l) {
    if (tokens.dim(1) != image.dim(1))
        throw std::invalid_argument("two_way_attention_layer: dim mismatch " + shape_str(tokens.shape()) +
                                    " vs " + shape_str(image.shape()));
    Value<T> t = apply_ln(add(tokens, mha_forward(tokens, tokens, l.self_attn)), l.ln1);
    t = apply_ln(add(t, mha_forward(t, image, l.cross_t2i)), l.ln2);
    t = apply_ln(add(t, mlp_forward(t, l.mlp)), l.ln3);
    Value<T> img = apply_ln(add(image, mha_forward(image, t, l.cross_i2t)), l.ln4);
    return {t, img};
}

// Dense prompt and grid position encoding are added to the image tokens
// before the first layer; the upsampled features are collapsed against the
// hypernetwork-mapped mask token, resized to the output and squashed.
template <class T>
Value<T> decode_mask(const Value<T>& image_embed, const PromptBundle<T>& bundle, const Value<T>& pe_tokens,
                     const DecoderParams<T>& p, int gs, int out_h, int out_w) {
    Value<T> img = add(add(image_embed, grid_to_tokens(bundle.dense)), pe_tokens);
    Value<T> tok = concat(p.mask_token, bundle.sparse, 0);
    for (const auto& l : p.layers) {
        auto [t2, i2] = two_way_attention_layer(tok, img, l);
        tok = t2;
        img = i2;
    }
    Value<T> grid = tokens_to_grid(img, gs);
    // gelu keeps the upsampler trainable even when a stage output goes
    // all-negative (a relu here can die and pin the mask at logit 0)
    Value<T> up = gelu(conv_transpose2d_2x(grid, p.up1_w, p.up1_b));
    up = gelu(conv_transpose2d_2x(up, p.up2_w, p.up2_b));
    Value<T> filt = mlp_forward(slice_axis(tok, 0, 0, 1), p.hyper);  // [1 x D/4]
    Value<T> logits = channel_dot(up, reshape(filt, {filt.dim(1)}));
    logits = bilinear_resize(logits, out_h, out_w);
    return sigmoid(logits);
}

}  // namespace camo
