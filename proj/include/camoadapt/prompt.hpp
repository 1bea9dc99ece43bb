#pragma once

// Box prompts: ground-truth box perturbation, sparse/dense prompt encoding,
// and the mixed dense prompt embedding that fuses expert and dual-stream
// image embeddings back into the prompt path.

#include <cmath>
#include <stdexcept>
#include <string>

#include "camoadapt/nn.hpp"
#include "camoadapt/rng.hpp"
#include "camoadapt/tensor.hpp"

namespace camo {

enum class PromptMix { full, cat_only, sum_only, single, off };

// Pixel box, inclusive-exclusive: [x0,x1) x [y0,y1).
struct Box {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    bool valid(int w, int h) const { return 0 <= x0 && x0 < x1 && x1 <= w && 0 <= y0 && y0 < y1 && y1 <= h; }
};

// Jitter each coordinate by uniform noise within +-amplitude of the box's
// width/height, clamp to the image, and re-validate. A degenerate result
// retries with halved noise (3 retries), then falls back to the input box.
inline Box perturb_box(const Box& b, int img_w, int img_h, uint64_t seed, double amplitude = 0.05) {
    if (!b.valid(img_w, img_h)) throw std::invalid_argument("perturb_box: invalid input box");
    Rng rng(seed);
    const double bw = double(b.x1 - b.x0), bh = double(b.y1 - b.y0);
    double amp = amplitude;
    for (int attempt = 0; attempt < 4; ++attempt) {
        Box p;
        p.x0 = b.x0 + (int)std::lround(rng.uniform(-amp * bw, amp * bw));
        p.y0 = b.y0 + (int)std::lround(rng.uniform(-amp * bh, amp * bh));
        p.x1 = b.x1 + (int)std::lround(rng.uniform(-amp * bw, amp * bw));
        p.y1 = b.y1 + (int)std::lround(rng.uniform(-amp * bh, amp * bh));
        p.x0 = std::max(0, std::min(p.x0, img_w));
        p.y0 = std::max(0, std::min(p.y0, img_h));
        p.x1 = std::max(0, std::min(p.x1, img_w));
        p.y1 = std::max(0, std::min(p.y1, img_h));
        if (p.valid(img_w, img_h)) return p;
        amp *= 0.5;
    }
    return b;
}

template <class T>
struct PromptBundle {
    Value<T> sparse;  // [2 x D]: rows (top-left, bottom-right)
    Value<T> dense;   // [D x gs x gs]
};

template <class T>
struct PromptParams {
    Value<T> fourier;       // [2 x D/2] frozen random-Fourier frequencies (sigma = 1)
    Value<T> corner_embed;  // [2 x D] learned corner-type embeddings
    Value<T> no_mask;       // [D] learned dense embedding, broadcast over the grid
};

template <class T>
PromptParams<T> make_prompt_params(Rng& rng, int d) {
    PromptParams<T> p;
    p.fourier = Value<T>::zeros({2, d / 2}, false);
    for (auto& v : p.fourier.data()) v = T(rng.gaussian());
    p.corner_embed = Value<T>::zeros({2, d}, true);
    for (auto& v : p.corner_embed.data()) v = T(rng.gaussian() * 0.02);
    p.no_mask = Value<T>::zeros({d}, true);
    for (auto& v : p.no_mask.data()) v = T(rng.gaussian() * 0.02);
    return p;
}

// [sin(2*pi*B*p), cos(2*pi*B*p)] for a normalized point p. Constant w.r.t.
// the tape (the Fourier matrix is frozen).
template <class T>
std::vector<T> fourier_features(const PromptParams<T>& pp, double u, double v) {
    const int half = pp.fourier.dim(1);
    std::vector<T> out(2 * half);
    for (int j = 0; j < half; ++j) {
        const double a =
            6.283185307179586 * (u * double(pp.fourier.data()[j]) + v * double(pp.fourier.data()[half + j]));
        out[j] = T(std::sin(a));
        out[half + j] = T(std::cos(a));
    }
    return out;
}

// Position table for the gs x gs token grid at cell centers, [N x D].
template <class T>
Value<T> fourier_grid_pe(const PromptParams<T>& pp, int gs) {
    const int d = 2 * pp.fourier.dim(1);
    Value<T> pe = Value<T>::zeros({gs * gs, d});
    for (int i = 0; i < gs; ++i)
        for (int j = 0; j < gs; ++j) {
            auto f = fourier_features(pp, (j + 0.5) / gs, (i + 0.5) / gs);
            std::copy(f.begin(), f.end(), pe.data().begin() + (i * gs + j) * d);
        }
    return pe;
}

template <class T>
PromptBundle<T> encode_box_prompt(const Box& b, const PromptParams<T>& pp, int img_w, int img_h, int gs) {
    if (!b.valid(img_w, img_h)) throw std::invalid_argument("encode_box_prompt: invalid box");
    const int d = 2 * pp.fourier.dim(1);
    Value<T> pe = Value<T>::zeros({2, d});
    auto tl = fourier_features(pp, double(b.x0) / img_w, double(b.y0) / img_h);
    auto br = fourier_features(pp, double(b.x1) / img_w, double(b.y1) / img_h);
    std::copy(tl.begin(), tl.end(), pe.data().begin());
    std::copy(br.begin(), br.end(), pe.data().begin() + d);
    PromptBundle<T> out;
    out.sparse = add(pe, pp.corner_embed);
    out.dense = broadcast_grid(pp.no_mask, gs, gs);
    return out;
}

// Depthwise 3x3 stages plus a pointwise projection back to D channels.
// hybrid_channels is the channel count of the image-embedding mix the
// configured PromptMix variant produces.
template <class T>
struct MixerParams {
    Value<T> dw_dense;   // [D x 3 x 3] over the incoming dense prompt
    Value<T> dw_mix;     // [(D + hybrid) x 3 x 3]
    Value<T> pw_w;       // [D x (D + hybrid)]
    Value<T> pw_b;       // [D]
    int hybrid_channels = 0;
};

inline int hybrid_channels_for(PromptMix mode, int d) {
    switch (mode) {
        case PromptMix::full:
        case PromptMix::cat_only:
            return 2 * d;
        case PromptMix::sum_only:
        case PromptMix::single:
            return d;
        case PromptMix::off:
            return 0;
    }
    return 0;
}

// Kernels start as centered deltas and the pointwise projection starts as
// the identity on the dense channels, so mixing is a near-identity at init.
template <class T>
MixerParams<T> make_mixer(int d, PromptMix mode) {
    MixerParams<T> m;
    m.hybrid_channels = hybrid_channels_for(mode, d);
    if (mode == PromptMix::off) return m;
    const int cin = d + m.hybrid_channels;
    m.dw_dense = Value<T>::zeros({d, 3, 3}, true);
    for (int c = 0; c < d; ++c) m.dw_dense.data()[c * 9 + 4] = T(1);
    m.dw_mix = Value<T>::zeros({cin, 3, 3}, true);
    for (int c = 0; c < cin; ++c) m.dw_mix.data()[c * 9 + 4] = T(1);
    m.pw_w = Value<T>::zeros({d, cin}, true);
    for (int c = 0; c < d; ++c) m.pw_w.data()[c * cin + c] = T(1);
    m.pw_b = Value<T>::zeros({d}, true);
    return m;
}

// X_Hybrid = cat[X_expert, X_rgb + X_depth] (variant-dependent), then
// dense' = pointwise(DWConv(cat[DWConv(dense), X_Hybrid])).
// Token-sequence inputs are laid onto the D x gs x gs grid. x_depth may be
// undefined in single-stream configurations; the sum term degrades to the
// RGB embedding alone.
template <class T>
Value<T> mix_dense_prompt(const PromptBundle<T>& bundle, const Value<T>& x_expert, const Value<T>& x_rgb,
                          const Value<T>& x_depth, const MixerParams<T>& m, PromptMix mode, int gs) {
    if (mode == PromptMix::off) return bundle.dense;
    if (bundle.dense.dim(1) != gs || bundle.dense.dim(2) != gs)
        throw std::invalid_argument("mix_dense_prompt: dense grid " + shape_str(bundle.dense.shape()) +
                                    " does not match token grid side " + std::to_string(gs));
    Value<T> rgb_g = tokens_to_grid(x_rgb, gs);
    Value<T> sum_g = x_depth.defined() ? add(rgb_g, tokens_to_grid(x_depth, gs)) : rgb_g;
    Value<T> hybrid;
    switch (mode) {
        case PromptMix::full:
            hybrid = concat(tokens_to_grid(x_expert, gs), sum_g, 0);
            break;
        case PromptMix::cat_only:
            hybrid = x_depth.defined() ? concat(rgb_g, tokens_to_grid(x_depth, gs), 0) : concat(rgb_g, rgb_g, 0);
            break;
        case PromptMix::sum_only:
            hybrid = sum_g;
            break;
        case PromptMix::single:
            hybrid = rgb_g;
            break;
        case PromptMix::off:
            break;
    }
    Value<T> dense_t = depthwise_conv2d(bundle.dense, m.dw_dense);
    Value<T> mixed = depthwise_conv2d(concat(dense_t, hybrid, 0), m.dw_mix);
    return pointwise_conv(mixed, m.pw_w, m.pw_b);
}

}  // namespace camo
