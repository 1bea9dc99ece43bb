#pragma once

// Shared layer primitives: linear, layer norm, multi-head attention, token
// grid reshapes and position encodings.

#include <cmath>

#include "camoadapt/rng.hpp"
#include "camoadapt/tensor.hpp"

namespace camo {

template <class T>
struct Linear {
    Value<T> w;  // [in x out]
    Value<T> b;  // [out]
};

template <class T>
Linear<T> make_linear(Rng& rng, int in, int out, bool trainable) {
    Linear<T> l;
    l.w = Value<T>::zeros({in, out}, trainable);
    l.b = Value<T>::zeros({out}, trainable);
    const double s = std::sqrt(2.0 / double(in + out));
    for (auto& v : l.w.data()) v = T(rng.gaussian() * s);
    return l;
}

template <class T>
Value<T> linear(const Value<T>& x, const Linear<T>& l) {
    return add_row_vector(matmul(x, l.w), l.b);
}

template <class T>
struct LayerNormP {
    Value<T> gain;
    Value<T> bias;
};

template <class T>
LayerNormP<T> make_layer_norm(int d, bool trainable) {
    LayerNormP<T> p;
    p.gain = Value<T>::full({d}, T(1), trainable);
    p.bias = Value<T>::zeros({d}, trainable);
    return p;
}

template <class T>
Value<T> apply_ln(const Value<T>& x, const LayerNormP<T>& p) {
    return layer_norm(x, p.gain, p.bias);
}

// Low-rank additive update on an attention projection (ablation path).
// b starts at zero so the update is inactive at init.
template <class T>
struct LoraPair {
    Value<T> a;  // [D x r]
    Value<T> b;  // [r x D]
};

template <class T>
LoraPair<T> make_lora(Rng& rng, int d, int r) {
    LoraPair<T> p;
    p.a = Value<T>::zeros({d, r}, true);
    p.b = Value<T>::zeros({r, d}, true);
    const double s = 1.0 / std::sqrt(double(r));
    for (auto& v : p.a.data()) v = T(rng.gaussian() * s);
    return p;
}

template <class T>
struct Mha {
    Linear<T> q, k, v, o;
    int heads = 1;
};

template <class T>
Mha<T> make_mha(Rng& rng, int d, int heads, bool trainable) {
    Mha<T> m;
    m.q = make_linear<T>(rng, d, d, trainable);
    m.k = make_linear<T>(rng, d, d, trainable);
    m.v = make_linear<T>(rng, d, d, trainable);
    m.o = make_linear<T>(rng, d, d, trainable);
    m.heads = heads;
    return m;
}

// q_in: [Tq x D], kv_in: [Tk x D]. Self-attention when both are the same.
template <class T>
Value<T> mha_forward(const Value<T>& q_in, const Value<T>& kv_in, const Mha<T>& p,
                     const LoraPair<T>* lora = nullptr) {
    const int d = q_in.dim(1);
    const int dh = d / p.heads;
    Value<T> q = linear(q_in, p.q);
    Value<T> k = linear(kv_in, p.k);
    Value<T> v = linear(kv_in, p.v);
    std::vector<Value<T>> heads;
    heads.reserve(p.heads);
    for (int h = 0; h < p.heads; ++h) {
        Value<T> qh = slice_axis(q, 1, h * dh, dh);
        Value<T> kh = slice_axis(k, 1, h * dh, dh);
        Value<T> vh = slice_axis(v, 1, h * dh, dh);
        Value<T> att = softmax_axis(scale(matmul(qh, transpose2d(kh)), T(1.0 / std::sqrt(double(dh)))), 1);
        heads.push_back(matmul(att, vh));
    }
    Value<T> ctx = concat(heads, 1);
    Value<T> out = linear(ctx, p.o);
    if (lora) out = add(out, matmul(matmul(ctx, lora->a), lora->b));
    return out;
}

template <class T>
struct Mlp {
    Linear<T> fc1, fc2;
};

template <class T>
Mlp<T> make_mlp(Rng& rng, int d, int hidden, bool trainable) {
    return {make_linear<T>(rng, d, hidden, trainable), make_linear<T>(rng, hidden, d, trainable)};
}

template <class T>
Value<T> mlp_forward(const Value<T>& x, const Mlp<T>& p) {
    return linear(relu(linear(x, p.fc1)), p.fc2);
}

// Token sequence [N x D] <-> channel grid [D x s x s], N = s*s row-major.
template <class T>
Value<T> tokens_to_grid(const Value<T>& x, int side) {
    if (x.rank() != 2 || x.dim(0) != side * side)
        throw std::invalid_argument("tokens_to_grid: " + shape_str(x.shape()) + " is not a " +
                                    std::to_string(side) + "^2 token sequence");
    return reshape(transpose2d(x), {x.dim(1), side, side});
}

template <class T>
Value<T> grid_to_tokens(const Value<T>& g) {
    if (g.rank() != 3) throw std::invalid_argument("grid_to_tokens: need [D x H x W]");
    return transpose2d(reshape(g, {g.dim(0), g.dim(1) * g.dim(2)}));
}

// Fixed 1-D sinusoidal position table [N x D].
template <class T>
Value<T> sinusoidal_pe(int n, int d) {
    Value<T> pe = Value<T>::zeros({n, d});
    for (int pos = 0; pos < n; ++pos)
        for (int i = 0; i < d; ++i) {
            const double freq = std::pow(10000.0, -2.0 * double(i / 2) / double(d));
            const double a = double(pos) * freq;
            pe.data()[pos * d + i] = T((i % 2 == 0) ? std::sin(a) : std::cos(a));
        }
    return pe;
}

}  // namespace camo
