#pragma once

// Single-level separable 2-D DWT with stride-2 downsampling, plus the
// pointwise L2 magnitude of the three detail bands.
//
// Filtering runs along the width first, then the height. Orientation
// convention used throughout: LH is low-pass along width / high-pass along
// height, so a horizontally-constant, vertically-varying image puts its
// detail energy into LH; HL is the transpose case; HH is diagonal.
//
// Boundary rule: even-length axes wrap periodically, which keeps the
// decimated orthonormal filter bank an exact orthogonal transform (energy is
// conserved); odd-length axes use symmetric mirror extension with edge
// repetition.

#include <string>
#include <vector>

#include "camoadapt/tensor.hpp"

namespace camo {

enum class WaveletKind { haar, db2 };

inline const char* wavelet_name(WaveletKind k) { return k == WaveletKind::haar ? "haar" : "db2"; }

struct WaveletFilters {
    std::vector<double> lo;  // analysis low-pass, orthonormal (sum of squares = 1)
    std::vector<double> hi;  // quadrature mirror: hi[k] = (-1)^k * lo[L-1-k]
};

inline WaveletFilters wavelet_filters(WaveletKind kind) {
    WaveletFilters f;
    if (kind == WaveletKind::haar) {
        const double s = 0.7071067811865476;  // 1/sqrt(2)
        f.lo = {s, s};
    } else {
        // Standard Daubechies-2 analysis low-pass taps.
        f.lo = {0.48296291314469025, 0.8365163037378079, 0.22414386804185735, -0.12940952255092145};
    }
    const int n = (int)f.lo.size();
    f.hi.resize(n);
    for (int k = 0; k < n; ++k) f.hi[k] = ((k % 2 == 0) ? 1.0 : -1.0) * f.lo[n - 1 - k];
    return f;
}

template <class T>
struct Subbands {
    Value<T> ll, lh, hl, hh;
};

namespace detail {

inline int extend_index(int idx, int n, bool periodic) {
    if (periodic) {
        idx %= n;
        return idx < 0 ? idx + n : idx;
    }
    while (idx < 0 || idx >= n) {
        if (idx < 0) idx = -idx - 1;
        if (idx >= n) idx = 2 * n - 1 - idx;
    }
    return idx;
}

}  // namespace detail

// Filter + decimate one spatial axis of x[C x H x W]; axis 2 = width, 1 = height.
template <class T>
Value<T> dwt_filter_axis(const Value<T>& x, const std::vector<double>& taps, int axis) {
    if (x.rank() != 3 || (axis != 1 && axis != 2)) throw std::invalid_argument("dwt_filter_axis: need [CxHxW]");
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int n = axis == 2 ? w : h;
    const int L = (int)taps.size();
    if (n < L)
        throw std::invalid_argument("dwt_filter_axis: axis length " + std::to_string(n) +
                                    " shorter than filter length " + std::to_string(L));
    const bool periodic = (n % 2 == 0);
    const int no = (n + 1) / 2;
    const int oh = axis == 1 ? no : h;
    const int ow = axis == 2 ? no : w;

    Value<T> out = Value<T>::zeros({c, oh, ow});
    auto in_idx = [&](int ch, int i, int j) { return (ch * h + i) * w + j; };
    auto out_idx = [&](int ch, int i, int j) { return (ch * oh + i) * ow + j; };
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < oh; ++i)
            for (int j = 0; j < ow; ++j) {
                double acc = 0.0;
                for (int k = 0; k < L; ++k) {
                    const int s = detail::extend_index(2 * (axis == 2 ? j : i) + k, n, periodic);
                    acc += taps[k] * double(axis == 2 ? x.data()[in_idx(ch, i, s)] : x.data()[in_idx(ch, s, j)]);
                }
                out.data()[out_idx(ch, i, j)] = T(acc);
            }
    if (detail::track<T>({x.requires_grad()})) {
        out.set_requires_grad(true);
        Tape<T>::active().record([xn = x.handle(), on = out.handle(), taps, axis, c, h, w, oh, ow, n, L, periodic]() {
            if (on->g.empty() || !xn->requires_grad) return;
            auto& gx = detail::grad_of(xn.get());
            for (int ch = 0; ch < c; ++ch)
                for (int i = 0; i < oh; ++i)
                    for (int j = 0; j < ow; ++j) {
                        const T go = on->g[(ch * oh + i) * ow + j];
                        if (go == T(0)) continue;
                        for (int k = 0; k < L; ++k) {
                            const int s = detail::extend_index(2 * (axis == 2 ? j : i) + k, n, periodic);
                            if (axis == 2)
                                gx[(ch * h + i) * w + s] += T(taps[k]) * go;
                            else
                                gx[(ch * h + s) * w + j] += T(taps[k]) * go;
                        }
                    }
        });
    }
    return out;
}

template <class T>
Subbands<T> dwt2_single_level(const Value<T>& x, WaveletKind kind) {
    if (x.rank() != 3) throw std::invalid_argument("dwt2_single_level: need [CxHxW]");
    const WaveletFilters f = wavelet_filters(kind);
    const int L = (int)f.lo.size();
    if (x.dim(1) < L || x.dim(2) < L)
        throw std::invalid_argument("dwt2_single_level: input " + shape_str(x.shape()) +
                                    " smaller than " + std::string(wavelet_name(kind)) + " filter (" +
                                    std::to_string(L) + " taps)");
    Value<T> row_lo = dwt_filter_axis(x, f.lo, 2);
    Value<T> row_hi = dwt_filter_axis(x, f.hi, 2);
    Subbands<T> s;
    s.ll = dwt_filter_axis(row_lo, f.lo, 1);
    s.lh = dwt_filter_axis(row_lo, f.hi, 1);
    s.hl = dwt_filter_axis(row_hi, f.lo, 1);
    s.hh = dwt_filter_axis(row_hi, f.hi, 1);
    return s;
}

// X_Hf = sqrt(LH^2 + HL^2 + HH^2 + eps), eps under the root for a finite
// gradient where all three details vanish.
template <class T>
Value<T> highfreq_magnitude(const Subbands<T>& s, T eps = T(1e-12)) {
    Value<T> sq = add(add(mul(s.lh, s.lh), mul(s.hl, s.hl)), mul(s.hh, s.hh));
    return sqrt_eps(sq, eps);
}

}  // namespace camo
