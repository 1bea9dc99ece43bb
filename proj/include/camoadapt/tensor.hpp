#pragma once

// Dense float tensors with tape-based reverse-mode autodiff.
//
// Templated on the scalar type: the model runs Value<float>; the
// finite-difference harness instantiates the identical code with double so
// the oracle side is free of single-precision noise.
//
// Execution is single-threaded and deterministic: fixed loop orders, double
// accumulation in matmul/reductions, no parallel reductions. The tape is a
// thread_local append-only list of backward closures, rebuilt every forward
// pass; backward replays it in strict reverse order.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace camo {

using Shape = std::vector<int>;

inline int numel_of(const Shape& s) {
    int n = 1;
    for (int d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

namespace detail {

template <class T>
struct Node {
    Shape shape;
    std::vector<T> x;  // forward data, row-major
    std::vector<T> g;  // adjoint; empty until first accumulation
    bool requires_grad = false;
};

// Materialize the adjoint buffer (zero-filled) on first touch.
template <class T>
inline std::vector<T>& grad_of(Node<T>* n) {
    if (n->g.empty()) n->g.assign(n->x.size(), T(0));
    return n->g;
}

}  // namespace detail

template <class T>
class Value {
public:
    Value() = default;

    static Value zeros(Shape shape, bool requires_grad = false) {
        Value v;
        v.n_ = std::make_shared<detail::Node<T>>();
        v.n_->shape = std::move(shape);
        v.n_->x.assign(numel_of(v.n_->shape), T(0));
        v.n_->requires_grad = requires_grad;
        return v;
    }

    static Value full(Shape shape, T fill, bool requires_grad = false) {
        Value v = zeros(std::move(shape), requires_grad);
        std::fill(v.n_->x.begin(), v.n_->x.end(), fill);
        return v;
    }

    static Value scalar(T x, bool requires_grad = false) {
        return full({1}, x, requires_grad);
    }

    static Value from(Shape shape, std::vector<T> data, bool requires_grad = false) {
        if ((int)data.size() != numel_of(shape))
            throw std::invalid_argument("Value::from: data size " + std::to_string(data.size()) +
                                        " does not match shape " + shape_str(shape));
        Value v;
        v.n_ = std::make_shared<detail::Node<T>>();
        v.n_->shape = std::move(shape);
        v.n_->x = std::move(data);
        v.n_->requires_grad = requires_grad;
        return v;
    }

    bool defined() const { return n_ != nullptr; }
    const Shape& shape() const { return n_->shape; }
    int rank() const { return (int)n_->shape.size(); }
    int dim(int i) const { return n_->shape[i]; }
    int numel() const { return (int)n_->x.size(); }

    std::vector<T>& data() { return n_->x; }
    const std::vector<T>& data() const { return n_->x; }

    T item() const {
        if (numel() != 1) throw std::invalid_argument("item(): tensor " + shape_str(shape()) + " is not scalar");
        return n_->x[0];
    }

    bool requires_grad() const { return n_->requires_grad; }
    void set_requires_grad(bool b) { n_->requires_grad = b; }

    // Adjoint view; empty vector if backward never reached this node.
    const std::vector<T>& grad() const {
        static const std::vector<T> kEmpty;
        return n_->g.empty() ? kEmpty : n_->g;
    }
    bool has_grad() const { return !n_->g.empty(); }
    std::vector<T>& grad_buf() { return detail::grad_of(n_.get()); }
    void zero_grad() { n_->g.clear(); }

    template <class U>
    Value<U> cast() const {
        std::vector<U> d(n_->x.size());
        for (size_t i = 0; i < d.size(); ++i) d[i] = (U)n_->x[i];
        return Value<U>::from(n_->shape, std::move(d), n_->requires_grad);
    }

    detail::Node<T>* node() const { return n_.get(); }
    std::shared_ptr<detail::Node<T>> handle() const { return n_; }

private:
    std::shared_ptr<detail::Node<T>> n_;
};

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

template <class T>
class Tape {
public:
    static Tape& active() {
        static thread_local Tape tape;
        return tape;
    }

    bool enabled() const { return enabled_; }
    void set_enabled(bool b) { enabled_ = b; }

    void record(std::function<void()> fn) { entries_.push_back(std::move(fn)); }

    size_t size() const { return entries_.size(); }

    // Dropping the closures releases the saved activations; node handles held
    // elsewhere stay valid, but their tape positions do not.
    void clear() { entries_.clear(); }

    void run_backward() {
        for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
    }

private:
    std::vector<std::function<void()>> entries_;
    bool enabled_ = true;
};

// Scoped no-grad: forwards run without recording, outputs come out detached.
template <class T>
struct NoGradGuard {
    NoGradGuard() : prev_(Tape<T>::active().enabled()) { Tape<T>::active().set_enabled(false); }
    ~NoGradGuard() { Tape<T>::active().set_enabled(prev_); }
    bool prev_;
};

namespace detail {

template <class T>
inline bool track(std::initializer_list<bool> rgs) {
    if (!Tape<T>::active().enabled()) return false;
    for (bool b : rgs)
        if (b) return true;
    return false;
}

}  // namespace detail

template <class T>
void backward(const Value<T>& loss) {
    if (loss.numel() != 1)
        throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(loss.shape()));
    detail::grad_of(loss.node())[0] += T(1);
    Tape<T>::active().run_backward();
}

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

namespace detail {

// Binary ops accept equal shapes, or one side being a single-element tensor
// that broadcasts as a scalar.
enum class BinKind { Equal, ScalarLeft, ScalarRight };

template <class T>
inline BinKind bin_kind(const Value<T>& a, const Value<T>& b, const char* op) {
    if (a.shape() == b.shape()) return BinKind::Equal;
    if (a.numel() == 1) return BinKind::ScalarLeft;
    if (b.numel() == 1) return BinKind::ScalarRight;
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
}

}  // namespace detail

template <class T, class Fwd, class Bwd>
Value<T> binary_op(const char* name, const Value<T>& a, const Value<T>& b, Fwd fwd, Bwd bwd) {
    auto kind = detail::bin_kind(a, b, name);
    const Shape& oshape = (kind == detail::BinKind::ScalarLeft) ? b.shape() : a.shape();
    Value<T> out = Value<T>::zeros(oshape);
    const int n = out.numel();
    const auto& ax = a.data();
    const auto& bx = b.data();
    auto& ox = out.data();
    for (int i = 0; i < n; ++i) {
        T av = (kind == detail::BinKind::ScalarLeft) ? ax[0] : ax[i];
        T bv = (kind == detail::BinKind::ScalarRight) ? bx[0] : bx[i];
        ox[i] = fwd(av, bv);
    }
    if (detail::track<T>({a.requires_grad(), b.requires_grad()})) {
        out.set_requires_grad(true);
        Tape<T>::active().record([an = a.handle(), bn = b.handle(), on = out.handle(), kind, bwd]() {
            if (on->g.empty()) return;
            const int n = (int)on->x.size();
            for (int i = 0; i < n; ++i) {
                T go = on->g[i];
                if (go == T(0)) continue;
                T av = (kind == detail::BinKind::ScalarLeft) ? an->x[0] : an->x[i];
                T bv = (kind == detail::BinKind::ScalarRight) ? bn->x[0] : bn->x[i];
                T da, db;
                bwd(av, bv, go, da, db);
                if (an->requires_grad) detail::grad_of(an.get())[(kind == detail::BinKind::ScalarLeft) ? 0 : i] += da;
                if (bn->requires_grad) detail::grad_of(bn.get())[(kind == detail::BinKind::ScalarRight) ? 0 : i] += db;
            }
        });
    }
    return out;
}

template <class T, class Fwd, class Bwd>
Value<T> unary_op(const Value<T>& a, Fwd fwd, Bwd bwd) {
    Value<T> out = Value<T>::zeros(a.shape());
    const int n = a.numel();
    for (int i = 0; i < n; ++i) out.data()[i] = fwd(a.data()[i]);
    if (detail::track<T>({a.requires_grad()})) {
        out.set_requires_grad(true);
        Tape<T>::active().record([an = a.handle(), on = out.handle(), bwd]() {
            if (on->g.empty() || !an->requires_grad) return;
            auto& ga = detail::grad_of(an.get());
            const int n = (int)on->x.size();
            for (int i = 0; i < n; ++i) ga[i] += bwd(an->x[i], on->x[i]) * on->g[i];
        });
    }
    return out;
}

template <class T>
Value<T> add(const Value<T>& a, const Value<T>& b) {
    return binary_op("add", a, b, [](T x, T y) { return x + y; },
                     [](T, T, T go, T& da, T& db) { da = go; db = go; });
}

template <class T>
Value<T> sub(const Value<T>& a, const Value<T>& b) {
    return binary_op("sub", a, b, [](T x, T y) { return x - y; },
                     [](T, T, T go, T& da, T& db) { da = go; db = -go; });
}

template <class T>
Value<T> mul(const Value<T>& a, const Value<T>& b) {
    return binary_op("mul", a, b, [](T x, T y) { return x * y; },
                     [](T x, T y, T go, T& da, T& db) { da = go * y; db = go * x; });
}

template <class T>
Value<T> div(const Value<T>& a, const Value<T>& b) {
    return binary_op("div", a, b, [](T x, T y) { return x / y; },
                     [](T x, T y, T go, T& da, T& db) {
                         da = go / y;
                         db = -go * x / (y * y);
                     });
}

template <class T>
Value<T> relu(const Value<T>& a) {
    return unary_op(a, [](T x) { return x > T(0) ? x : T(0); },
                    [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <class T>
Value<T> exp(const Value<T>& a) {
    return unary_op(a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <class T>
Value<T> log(const Value<T>& a) {
    return unary_op(a, [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
}

// Exact (erf) form; the derivative keeps gradient alive on the negative side.
template <class T>
Value<T> gelu(const Value<T>& a) {
    return unary_op(a,
                    [](T x) { return T(0.5) * x * (T(1) + std::erf(x * T(0.7071067811865476))); },
                    [](T x, T) {
                        const T cdf = T(0.5) * (T(1) + std::erf(x * T(0.7071067811865476)));
                        const T pdf = T(0.3989422804014327) * std::exp(T(-0.5) * x * x);
                        return cdf + x * pdf;
                    });
}

template <class T>
Value<T> sigmoid(const Value<T>& a) {
    return unary_op(a, [](T x) { return T(1) / (T(1) + std::exp(-x)); },
                    [](T, T y) { return y * (T(1) - y); });
}

template <class T>
Value<T> scale(const Value<T>& a, T c) {
    return unary_op(a, [c](T x) { return x * c; }, [c](T, T) { return c; });
}

template <class T>
Value<T> neg(const Value<T>& a) {
    return scale(a, T(-1));
}

// sqrt(x + eps); eps keeps the gradient finite at x = 0.
template <class T>
Value<T> sqrt_eps(const Value<T>& a, T eps) {
    return unary_op(a, [eps](T x) { return std::sqrt(x + eps); },
                    [](T, T y) { return T(0.5) / y; });
}

// Gradient passes through the un-clamped region only.
template <class T>
Value<T> clamp(const Value<T>& a, T lo, T hi) {
    return unary_op(a, [lo, hi](T x) { return std::min(hi, std::max(lo, x)); },
                    [lo, hi](T x, T) { return (x >= lo && x <= hi) ? T(1) : T(0); });
}

template <class T>
Value<T> detach(const Value<T>& a) {
    std::vector<T> d = a.data();
    return Value<T>::from(a.shape(), std::move(d), false);
}

// ---------------------------------------------------------------------------
// Matmul and friends
// ---------------------------------------------------------------------------

template <class T>
Value<T> matmul(const Value<T>& a, const Value<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Value<T> out = Value<T>::zeros({m, n});
    const T* A = a.data().data();
    const T* B = b.data().data();
    T* C = out.data().data();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += double(A[i * k + p]) * double(B[p * n + j]);
            C[i * n + j] = T(acc);
        }
    if (detail::track<T>({a.requires_grad(), b.requires_grad()})) {
        out.set_requires_grad(true);
        Tape<T>::active().record([an = a.handle(), bn = b.handle(), on = out.handle(), m, k, n]() {
            if (on->g.empty()) return;
            const T* G = on->g.data();
            if (an->requires_grad) {  // dA = G * B^T
                auto& ga = detail::grad_of(an.get());
                const T* B = bn->x.data();
                for (int i = 0; i < m; ++i)
                    for (int p = 0; p < k; ++p) {
                        double acc = 0.0;
                        for (int j = 0; j < n; ++j) acc += double(G[i * n + j]) * double(B[p * n + j]);
                        ga[i * k + p] += T(acc);
                    }
            }
            if (bn->requires_grad) {  // dB = A^T * G
                auto& gb = detail::grad_of(bn.get());
                const T* A = an->x.data();
                for (int p = 0; p < k; ++p)
                    for (int j = 0; j < n; ++j) {
                        double acc = 0.0;
                        for (int i = 0; i < m; ++i) acc += double(A[i * k + p]) * double(G[i * n + j]);
                        gb[p * n + j] += T(acc);
                    }
            }
        });
    }
    return out;
}

template <class T>
Value<T> transpose2d(const Value<T>& a) {
    if (a.rank() != 2) throw std::invalid_argument("transpose2d: need rank 2, got " + shape_str(a.shape()));
    const int m = a.dim(0), n = a.dim(1);
    Value<T> out = Value<T>::zeros({n, m});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.data()[j * m + i] = a.data()[i * n + j];
    if (detail::track<T>({a.requires_grad()})) {
        out.set_requires_grad(true);
        Tape<T>::active().record([an = a.handle(), on = out.handle(), m, n]() {
            if (on->g.empty() || !an->requires_grad) return;
            auto& ga = detail::grad_of(an.get());
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) ga[i * n + j] += on->g[j * m + i];
        });
    }
    return out;
}

template <class T>
Value<T> reshape(const Value<T>& a, Shape shape) {
    if (numel_of(shape) != a.numel())
        throw std::invalid_argument("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    std::vector<T> d = a.data();
    Value<T> out = Value<T>::from(std::move(shape), std::move(d));
    if (detail::track<T>({a.requires_grad()})) {
        out.set_requires_grad(true);
        Tape<T>::active().record([an = a.handle(), on = out.handle()]() {
            if (on->g.empty() || !an->requires_grad) return;
            auto& ga = detail::grad_of(an.get());
            for (size_t i = 0; i < ga.size(); ++i) ga[i] += on->g[i];
        });
    }
    return out;
}

// Row-wise broadcast: x[N x D] + v[D].
template <class T>
Value<T> add_row_vector(const Value<T>& x, const Value<T>& v) {
    if (x.rank() != 2 || v.rank() != 1 || x.dim(1) != v.dim(0))
        throw std::invalid_argument("add_row_vector: " + shape_str(x.shape()) + " vs " + shape_str(v.shape()));
    const int n = x.dim(0), d = x.dim(1);
    Value<T> out = Value<T>::zeros({n, d});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) out.data()[i * d + j] = x.data()[i * d + j] + v.data()[j];
    if (detail::track<T>({x.requires_grad(), v.requires_grad()})) {
        out.set_requires_grad(true);
        Tape<T>::active().record([xn = x.handle(), vn = v.handle(), on = out.handle(), n, d]() {
            if (on->g.empty()) return;
            if (xn->requires_grad) {
                auto& gx = detail::grad_of(xn.get());
                for (size_t i = 0; i < gx.size(); ++i) gx[i] += on->g[i];
            }
            if (vn->requires_grad) {
                auto& gv = detail::grad_of(vn.get());
                for (int j = 0; j < d; ++j) {
                    double acc = 0.0;
                    for (int i = 0; i < n; ++i) acc += double(on->g[i * d + j]);
                    gv[j] += T(acc);
                }
            }
        });
    }
    return out;
}

// Row-wise broadcast product: x[N x D] * v[D].
template <class T>
Value<T> mul_row_vector(const Value<T>& x, const Value<T>& v) {
    if (x.rank() != 2 || v.rank() != 1 || x.dim(1) != v.dim(0))
        throw std::invalid_argument("mul_row_vector: " + shape_str(x.shape()) + " vs " + shape_str(v.shape()));
    const int n = x.dim(0), d = x.dim(1);
    Value<T> out = Value<T>::zeros({n, d});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) out.data()[i * d + j] = x.data()[i * d + j] * v.data()[j];
    if (detail::track<T>({x.requires_grad(), v.requires_grad()})) {
        out.set_requires_grad(true);
        Tape<T>::active().record([xn = x.handle(), vn = v.handle(), on = out.handle(), n, d]() {
            if (on->g.empty()) return;
            if (xn->requires_grad) {
                auto& gx = detail::grad_of(xn.get());
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < d; ++j) gx[i * d + j] += on->g[i * d + j] * vn->x[j];
            }
            if (vn->requires_grad) {
                auto& gv = detail::grad_of(vn.get());
                for (int j = 0; j < d; ++j) {
                    double acc = 0.0;
                    for (int i = 0; i < n; ++i) acc += double(on->g[i * d + j]) * double(xn->x[i * d + j]);
                    gv[j] += T(acc);
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Shape surgery
// ---------------------------------------------------------------------------

template <class T>
Value<T> concat(const std::vector<Value<T>>& xs, int axis) {
    if (xs.empty()) throw std::invalid_argument("concat: empty input list");
    const int rank = xs[0].rank();
    if (axis < 0 || axis >= rank) throw std::invalid_argument("concat: bad axis " + std::to_string(axis));
    Shape oshape = xs[0].shape();
    for (size_t i = 1; i < xs.size(); ++i) {
        if (xs[i].rank() != rank) throw std::invalid_argument("concat: rank mismatch");
        for (int d = 0; d < rank; ++d)
            if (d != axis && xs[i].dim(d) != oshape[d])
                throw std::invalid_argument("concat: shape mismatch " + shape_str(xs[i].shape()) + " vs " +
                                            shape_str(xs[0].shape()));
        oshape[axis] += xs[i].dim(axis);
    }
    int outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= oshape[d];
    for (int d = axis + 1; d < rank; ++d) inner *= oshape[d];

    Value<T> out = Value<T>::zeros(oshape);
    const int ostride = oshape[axis] * inner;
    int off = 0;
    bool any_rg = false;
    for (const auto& x : xs) {
        const int len = x.dim(axis) * inner;
        for (int o = 0; o < outer; ++o)
            std::copy_n(x.data().data() + o * len, len, out.data().data() + o * ostride + off);
        off += len;
        any_rg = any_rg || x.requires_grad();
    }
    if (Tape<T>::active().enabled() && any_rg) {
        out.set_requires_grad(true);
        std::vector<std::shared_ptr<detail::Node<T>>> hs;
        std::vector<int> lens;
        for (const auto& x : xs) {
            hs.push_back(x.handle());
            lens.push_back(x.dim(axis) * inner);
        }
        Tape<T>::active().record([hs, lens, on = out.handle(), outer, ostride]() {
            if (on->g.empty()) return;
            int off = 0;
            for (size_t i = 0; i < hs.size(); ++i) {
                if (hs[i]->requires_grad) {
                    auto& g = detail::grad_of(hs[i].get());
                    for (int o = 0; o < outer; ++o)
                        for (int j = 0; j < lens[i]; ++j) g[o * lens[i] + j] += on->g[o * ostride + off + j];
                }
                off += lens[i];
            }
        });
    }
    return out;
}

template <class T>
Value<T> concat(const Value<T>& a, const Value<T>& b, int axis) {
    return concat(std::vector<Value<T>>{a, b}, axis);
}

template <class T>
Value<T> slice_axis(const Value<T>& x, int axis, int start, int len) {
    if (axis < 0 || axis >= x.rank()) throw std::invalid_argument("slice_axis: bad axis");
    if (start < 0 || len <= 0 || start + len > x.dim(axis))
        throw std::invalid_argument("slice_axis: range [" + std::to_string(start) + "," +
                                    std::to_string(start + len) + ") out of bounds for " + shape_str(x.shape()));
    Shape oshape = x.shape();
    oshape[axis] = len;
    int outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= x.dim(d);
    for (int d = axis + 1; d < x.rank(); ++d) inner *= x.dim(d);
    const int xstride = x.dim(axis) * inner;
    const int osl = len * inner;

    Value<T> out = Value<T>::zeros(oshape);
    for (int o = 0; o < outer; ++o)
        std::copy_n(x.data().data() + o * xstride + start * inner, osl, out.data().data() + o * osl);
    if (detail::track<T>({x.requires_grad()})) {
        out.set_requires_grad(true);
        Tape<T>::active().record([xn = x.handle(), on = out.handle(), outer, xstride, osl, start, inner]() {
            if (on->g.empty() || !xn->requires_grad) return;
            auto& gx = detail::grad_of(xn.get());
            for (int o = 0; o < outer; ++o)
                for (int j = 0; j < osl; ++j) gx[o * xstride + start * inner + j] += on->g[o * osl + j];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <class T>
Value<T> sum_all(const Value<T>& a) {
    double acc = 0.0;
    for (T v : a.data()) acc += double(v);
    Value<T> out = Value<T>::scalar(T(acc));
    if (detail::track<T>({a.requires_grad()})) {
        out.set_requires_grad(true);
        Tape<T>::active().record([an = a.handle(), on = out.handle()]() {
            if (on->g.empty() || !an->requires_grad) return;
            auto& ga = detail::grad_of(an.get());
            for (auto& g : ga) g += on->g[0];
        });
    }
    return out;
}

template <class T>
Value<T> mean_all(const Value<T>& a) {
    return scale(sum_all(a), T(1) / T(a.numel()));
}

// ---------------------------------------------------------------------------
// Softmax family (any axis, max-subtraction for stability)
// ---------------------------------------------------------------------------

namespace detail {

struct AxisGeom {
    int outer, n, inner;
};

template <class T>
inline AxisGeom axis_geom(const Value<T>& x, int axis, const char* op) {
    if (axis < 0 || axis >= x.rank()) throw std::invalid_argument(std::string(op) + ": bad axis");
    AxisGeom g{1, x.dim(axis), 1};
    for (int d = 0; d < axis; ++d) g.outer *= x.dim(d);
    for (int d = axis + 1; d < x.rank(); ++d) g.inner *= x.dim(d);
    return g;
}

}  // namespace detail

template <class T>
Value<T> softmax_axis(const Value<T>& x, int axis) {
    auto geom = detail::axis_geom(x, axis, "softmax_axis");
    for (T v : x.data())
        if (std::isnan(v)) throw std::invalid_argument("softmax_axis: NaN input");
    Value<T> out = Value<T>::zeros(x.shape());
    const auto& in = x.data();
    auto& ox = out.data();
    for (int o = 0; o < geom.outer; ++o)
        for (int i = 0; i < geom.inner; ++i) {
            const int base = o * geom.n * geom.inner + i;
            T mx = in[base];
            for (int j = 1; j < geom.n; ++j) mx = std::max(mx, in[base + j * geom.inner]);
            double denom = 0.0;
            for (int j = 0; j < geom.n; ++j) {
                T e = std::exp(in[base + j * geom.inner] - mx);
                ox[base + j * geom.inner] = e;
                denom += double(e);
            }
            for (int j = 0; j < geom.n; ++j) ox[base + j * geom.inner] = T(double(ox[base + j * geom.inner]) / denom);
        }
    if (detail::track<T>({x.requires_grad()})) {
        out.set_requires_grad(true);
        Tape<T>::active().record([xn = x.handle(), on = out.handle(), geom]() {
            if (on->g.empty() || !xn->requires_grad) return;
            auto& gx = detail::grad_of(xn.get());
            for (int o = 0; o < geom.outer; ++o)
                for (int i = 0; i < geom.inner; ++i) {
                    const int base = o * geom.n * geom.inner + i;
                    double dot = 0.0;
                    for (int j = 0; j < geom.n; ++j)
                        dot += double(on->g[base + j * geom.inner]) * double(on->x[base + j * geom.inner]);
                    for (int j = 0; j < geom.n; ++j) {
                        const int idx = base + j * geom.inner;
                        gx[idx] += on->x[idx] * (on->g[idx] - T(dot));
                    }
                }
        });
    }
    return out;
}

template <class T>
Value<T> log_softmax_axis(const Value<T>& x, int axis) {
    auto geom = detail::axis_geom(x, axis, "log_softmax_axis");
    for (T v : x.data())
        if (std::isnan(v)) throw std::invalid_argument("log_softmax_axis: NaN input");
    Value<T> out = Value<T>::zeros(x.shape());
    const auto& in = x.data();
    auto& ox = out.data();
    for (int o = 0; o < geom.outer; ++o)
        for (int i = 0; i < geom.inner; ++i) {
            const int base = o * geom.n * geom.inner + i;
            T mx = in[base];
            for (int j = 1; j < geom.n; ++j) mx = std::max(mx, in[base + j * geom.inner]);
            double denom = 0.0;
            for (int j = 0; j < geom.n; ++j) denom += std::exp(double(in[base + j * geom.inner] - mx));
            const T lse = mx + T(std::log(denom));
            for (int j = 0; j < geom.n; ++j) ox[base + j * geom.inner] = in[base + j * geom.inner] - lse;
        }
    if (detail::track<T>({x.requires_grad()})) {
        out.set_requires_grad(true);
        Tape<T>::active().record([xn = x.handle(), on = out.handle(), geom]() {
            if (on->g.empty() || !xn->requires_grad) return;
            auto& gx = detail::grad_of(xn.get());
            for (int o = 0; o < geom.outer; ++o)
                for (int i = 0; i < geom.inner; ++i) {
                    const int base = o * geom.n * geom.inner + i;
                    double gsum = 0.0;
                    for (int j = 0; j < geom.n; ++j) gsum += double(on->g[base + j * geom.inner]);
                    for (int j = 0; j < geom.n; ++j) {
                        const int idx = base + j * geom.inner;
                        gx[idx] += on->g[idx] - T(std::exp(double(on->x[idx])) * gsum);
                    }
                }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Layer norm over the last axis
// ---------------------------------------------------------------------------

template <class T>
Value<T> layer_norm(const Value<T>& x, const Value<T>& gain, const Value<T>& bias, T eps = T(1e-5)) {
    if (x.rank() < 1) throw std::invalid_argument("layer_norm: rank 0 input");
    const int d = x.dim(x.rank() - 1);
    if (gain.rank() != 1 || bias.rank() != 1 || gain.dim(0) != d || bias.dim(0) != d)
        throw std::invalid_argument("layer_norm: gain/bias " + shape_str(gain.shape()) + "/" +
                                    shape_str(bias.shape()) + " do not match feature dim " + std::to_string(d));
    const int rows = x.numel() / d;
    Value<T> out = Value<T>::zeros(x.shape());
    std::vector<T> inv_std(rows), xhat(x.numel());
    for (int r = 0; r < rows; ++r) {
        const T* xi = x.data().data() + r * d;
        double mu = 0.0;
        for (int j = 0; j < d; ++j) mu += double(xi[j]);
        mu /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) {
            double c = double(xi[j]) - mu;
            var += c * c;
        }
        var /= d;
        const T istd = T(1.0 / std::sqrt(var + double(eps)));
        inv_std[r] = istd;
        for (int j = 0; j < d; ++j) {
            T xh = (xi[j] - T(mu)) * istd;
            xhat[r * d + j] = xh;
            out.data()[r * d + j] = xh * gain.data()[j] + bias.data()[j];
        }
    }
    if (detail::track<T>({x.requires_grad(), gain.requires_grad(), bias.requires_grad()})) {
        out.set_requires_grad(true);
        Tape<T>::active().record([xn = x.handle(), gn = gain.handle(), bn = bias.handle(), on = out.handle(),
                                  inv_std = std::move(inv_std), xhat = std::move(xhat), rows, d]() {
            if (on->g.empty()) return;
            for (int r = 0; r < rows; ++r) {
                const T* go = on->g.data() + r * d;
                const T* xh = xhat.data() + r * d;
                if (gn->requires_grad) {
                    auto& gg = detail::grad_of(gn.get());
                    for (int j = 0; j < d; ++j) gg[j] += go[j] * xh[j];
                }
                if (bn->requires_grad) {
                    auto& gb = detail::grad_of(bn.get());
                    for (int j = 0; j < d; ++j) gb[j] += go[j];
                }
                if (xn->requires_grad) {
                    auto& gx = detail::grad_of(xn.get());
                    double m1 = 0.0, m2 = 0.0;  // mean(gy), mean(gy*xhat)
                    for (int j = 0; j < d; ++j) {
                        double gy = double(go[j]) * double(gn->x[j]);
                        m1 += gy;
                        m2 += gy * double(xh[j]);
                    }
                    m1 /= d;
                    m2 /= d;
                    for (int j = 0; j < d; ++j) {
                        double gy = double(go[j]) * double(gn->x[j]);
                        gx[r * d + j] += T(double(inv_std[r]) * (gy - m1 - double(xh[j]) * m2));
                    }
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Convolutions
// ---------------------------------------------------------------------------

// Per-channel 2-D correlation, zero padding, stride 1, odd kernel.
template <class T>
Value<T> depthwise_conv2d(const Value<T>& x, const Value<T>& k) {
    if (x.rank() != 3 || k.rank() != 3)
        throw std::invalid_argument("depthwise_conv2d: need x[CxHxW], k[Cxkxk]");
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int kc = k.dim(0), kh = k.dim(1), kw = k.dim(2);
    if (kc != c)
        throw std::invalid_argument("depthwise_conv2d: channel mismatch " + shape_str(x.shape()) + " vs " +
                                    shape_str(k.shape()));
    if (kh % 2 == 0 || kw % 2 == 0)
        throw std::invalid_argument("depthwise_conv2d: kernel size must be odd, got " + shape_str(k.shape()));
    const int rh = kh / 2, rw = kw / 2;
    Value<T> out = Value<T>::zeros({c, h, w});
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                double acc = 0.0;
                for (int u = 0; u < kh; ++u)
                    for (int v = 0; v < kw; ++v) {
                        const int ii = i + u - rh, jj = j + v - rw;
                        if (ii < 0 || ii >= h || jj < 0 || jj >= w) continue;
                        acc += double(x.data()[(ch * h + ii) * w + jj]) * double(k.data()[(ch * kh + u) * kw + v]);
                    }
                out.data()[(ch * h + i) * w + j] = T(acc);
            }
    if (detail::track<T>({x.requires_grad(), k.requires_grad()})) {
        out.set_requires_grad(true);
        Tape<T>::active().record([xn = x.handle(), kn = k.handle(), on = out.handle(), c, h, w, kh, kw, rh, rw]() {
            if (on->g.empty()) return;
            for (int ch = 0; ch < c; ++ch)
                for (int i = 0; i < h; ++i)
                    for (int j = 0; j < w; ++j) {
                        const T go = on->g[(ch * h + i) * w + j];
                        if (go == T(0)) continue;
                        for (int u = 0; u < kh; ++u)
                            for (int v = 0; v < kw; ++v) {
                                const int ii = i + u - rh, jj = j + v - rw;
                                if (ii < 0 || ii >= h || jj < 0 || jj >= w) continue;
                                if (xn->requires_grad)
                                    detail::grad_of(xn.get())[(ch * h + ii) * w + jj] +=
                                        go * kn->x[(ch * kh + u) * kw + v];
                                if (kn->requires_grad)
                                    detail::grad_of(kn.get())[(ch * kh + u) * kw + v] +=
                                        go * xn->x[(ch * h + ii) * w + jj];
                            }
                    }
        });
    }
    return out;
}

// Full conv: x[Cin,H,W] * w[Cout,Cin,kh,kw] + b[Cout], arbitrary stride/pad.
template <class T>
Value<T> conv2d(const Value<T>& x, const Value<T>& w, const Value<T>& b, int stride, int pad) {
    if (x.rank() != 3 || w.rank() != 4 || b.rank() != 1)
        throw std::invalid_argument("conv2d: need x[Cin,H,W], w[Cout,Cin,kh,kw], b[Cout]");
    const int cin = x.dim(0), h = x.dim(1), wd = x.dim(2);
    const int cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    if (w.dim(1) != cin || b.dim(0) != cout)
        throw std::invalid_argument("conv2d: shape mismatch " + shape_str(x.shape()) + " vs " + shape_str(w.shape()));
    const int ho = (h + 2 * pad - kh) / stride + 1;
    const int wo = (wd + 2 * pad - kw) / stride + 1;
    Value<T> out = Value<T>::zeros({cout, ho, wo});
    for (int co = 0; co < cout; ++co)
        for (int i = 0; i < ho; ++i)
            for (int j = 0; j < wo; ++j) {
                double acc = double(b.data()[co]);
                for (int ci = 0; ci < cin; ++ci)
                    for (int u = 0; u < kh; ++u)
                        for (int v = 0; v < kw; ++v) {
                            const int ii = i * stride + u - pad, jj = j * stride + v - pad;
                            if (ii < 0 || ii >= h || jj < 0 || jj >= wd) continue;
                            acc += double(x.data()[(ci * h + ii) * wd + jj]) *
                                   double(w.data()[((co * cin + ci) * kh + u) * kw + v]);
                        }
                out.data()[(co * ho + i) * wo + j] = T(acc);
            }
    if (detail::track<T>({x.requires_grad(), w.requires_grad(), b.requires_grad()})) {
        out.set_requires_grad(true);
        Tape<T>::active().record([xn = x.handle(), wn = w.handle(), bn = b.handle(), on = out.handle(), cin, h, wd,
                                  cout, kh, kw, ho, wo, stride, pad]() {
            if (on->g.empty()) return;
            for (int co = 0; co < cout; ++co)
                for (int i = 0; i < ho; ++i)
                    for (int j = 0; j < wo; ++j) {
                        const T go = on->g[(co * ho + i) * wo + j];
                        if (go == T(0)) continue;
                        if (bn->requires_grad) detail::grad_of(bn.get())[co] += go;
                        for (int ci = 0; ci < cin; ++ci)
                            for (int u = 0; u < kh; ++u)
                                for (int v = 0; v < kw; ++v) {
                                    const int ii = i * stride + u - pad, jj = j * stride + v - pad;
                                    if (ii < 0 || ii >= h || jj < 0 || jj >= wd) continue;
                                    if (xn->requires_grad)
                                        detail::grad_of(xn.get())[(ci * h + ii) * wd + jj] +=
                                            go * wn->x[((co * cin + ci) * kh + u) * kw + v];
                                    if (wn->requires_grad)
                                        detail::grad_of(wn.get())[((co * cin + ci) * kh + u) * kw + v] +=
                                            go * xn->x[(ci * h + ii) * wd + jj];
                                }
                    }
        });
    }
    return out;
}

// Transpose conv, kernel 2, stride 2: x[Cin,H,W] -> [Cout,2H,2W].
template <class T>
Value<T> conv_transpose2d_2x(const Value<T>& x, const Value<T>& w, const Value<T>& b) {
    if (x.rank() != 3 || w.rank() != 4 || w.dim(2) != 2 || w.dim(3) != 2)
        throw std::invalid_argument("conv_transpose2d_2x: need x[Cin,H,W], w[Cin,Cout,2,2]");
    const int cin = x.dim(0), h = x.dim(1), wd = x.dim(2), cout = w.dim(1);
    if (w.dim(0) != cin || b.dim(0) != cout)
        throw std::invalid_argument("conv_transpose2d_2x: shape mismatch " + shape_str(x.shape()) + " vs " +
                                    shape_str(w.shape()));
    Value<T> out = Value<T>::zeros({cout, 2 * h, 2 * wd});
    for (int co = 0; co < cout; ++co)
        for (int i = 0; i < 2 * h; ++i)
            for (int j = 0; j < 2 * wd; ++j) {
                double acc = double(b.data()[co]);
                const int si = i / 2, sj = j / 2, u = i % 2, v = j % 2;
                for (int ci = 0; ci < cin; ++ci)
                    acc += double(x.data()[(ci * h + si) * wd + sj]) *
                           double(w.data()[((ci * cout + co) * 2 + u) * 2 + v]);
                out.data()[(co * 2 * h + i) * 2 * wd + j] = T(acc);
            }
    if (detail::track<T>({x.requires_grad(), w.requires_grad(), b.requires_grad()})) {
        out.set_requires_grad(true);
        Tape<T>::active().record(
            [xn = x.handle(), wn = w.handle(), bn = b.handle(), on = out.handle(), cin, h, wd, cout]() {
                if (on->g.empty()) return;
                for (int co = 0; co < cout; ++co)
                    for (int i = 0; i < 2 * h; ++i)
                        for (int j = 0; j < 2 * wd; ++j) {
                            const T go = on->g[(co * 2 * h + i) * 2 * wd + j];
                            if (go == T(0)) continue;
                            if (bn->requires_grad) detail::grad_of(bn.get())[co] += go;
                            const int si = i / 2, sj = j / 2, u = i % 2, v = j % 2;
                            for (int ci = 0; ci < cin; ++ci) {
                                if (xn->requires_grad)
                                    detail::grad_of(xn.get())[(ci * h + si) * wd + sj] +=
                                        go * wn->x[((ci * cout + co) * 2 + u) * 2 + v];
                                if (wn->requires_grad)
                                    detail::grad_of(wn.get())[((ci * cout + co) * 2 + u) * 2 + v] +=
                                        go * xn->x[(ci * h + si) * wd + sj];
                            }
                        }
            });
    }
    return out;
}

// Pointwise 1x1 conv: x[Cin,H,W] -> [Cout,H,W] through w[Cout,Cin] + b[Cout].
template <class T>
Value<T> pointwise_conv(const Value<T>& x, const Value<T>& w, const Value<T>& b) {
    if (x.rank() != 3 || w.rank() != 2 || b.rank() != 1)
        throw std::invalid_argument("pointwise_conv: need x[Cin,H,W], w[Cout,Cin], b[Cout]");
    const int cin = x.dim(0), h = x.dim(1), wd = x.dim(2), cout = w.dim(0);
    if (w.dim(1) != cin || b.dim(0) != cout)
        throw std::invalid_argument("pointwise_conv: shape mismatch " + shape_str(x.shape()) + " vs " +
                                    shape_str(w.shape()));
    const int hw = h * wd;
    Value<T> out = Value<T>::zeros({cout, h, wd});
    for (int co = 0; co < cout; ++co)
        for (int p = 0; p < hw; ++p) {
            double acc = double(b.data()[co]);
            for (int ci = 0; ci < cin; ++ci) acc += double(w.data()[co * cin + ci]) * double(x.data()[ci * hw + p]);
            out.data()[co * hw + p] = T(acc);
        }
    if (detail::track<T>({x.requires_grad(), w.requires_grad(), b.requires_grad()})) {
        out.set_requires_grad(true);
        Tape<T>::active().record(
            [xn = x.handle(), wn = w.handle(), bn = b.handle(), on = out.handle(), cin, cout, hw]() {
                if (on->g.empty()) return;
                for (int co = 0; co < cout; ++co)
                    for (int p = 0; p < hw; ++p) {
                        const T go = on->g[co * hw + p];
                        if (go == T(0)) continue;
                        if (bn->requires_grad) detail::grad_of(bn.get())[co] += go;
                        for (int ci = 0; ci < cin; ++ci) {
                            if (xn->requires_grad) detail::grad_of(xn.get())[ci * hw + p] += go * wn->x[co * cin + ci];
                            if (wn->requires_grad) detail::grad_of(wn.get())[co * cin + ci] += go * xn->x[ci * hw + p];
                        }
                    }
            });
    }
    return out;
}

// Tile a channel vector over a spatial grid: v[C] -> [C,H,W].
template <class T>
Value<T> broadcast_grid(const Value<T>& v, int h, int w) {
    if (v.rank() != 1) throw std::invalid_argument("broadcast_grid: need a vector, got " + shape_str(v.shape()));
    const int c = v.dim(0), hw = h * w;
    Value<T> out = Value<T>::zeros({c, h, w});
    for (int ch = 0; ch < c; ++ch) std::fill_n(out.data().data() + ch * hw, hw, v.data()[ch]);
    if (detail::track<T>({v.requires_grad()})) {
        out.set_requires_grad(true);
        Tape<T>::active().record([vn = v.handle(), on = out.handle(), c, hw]() {
            if (on->g.empty() || !vn->requires_grad) return;
            auto& gv = detail::grad_of(vn.get());
            for (int ch = 0; ch < c; ++ch) {
                double acc = 0.0;
                for (int p = 0; p < hw; ++p) acc += double(on->g[ch * hw + p]);
                gv[ch] += T(acc);
            }
        });
    }
    return out;
}

// Channel-weighted collapse: feat[C,H,W] dotted with w[C] -> [1,H,W].
template <class T>
Value<T> channel_dot(const Value<T>& feat, const Value<T>& w) {
    if (feat.rank() != 3 || w.rank() != 1 || feat.dim(0) != w.dim(0))
        throw std::invalid_argument("channel_dot: " + shape_str(feat.shape()) + " vs " + shape_str(w.shape()));
    const int c = feat.dim(0), h = feat.dim(1), wd = feat.dim(2), hw = h * wd;
    Value<T> out = Value<T>::zeros({1, h, wd});
    for (int p = 0; p < hw; ++p) {
        double acc = 0.0;
        for (int ch = 0; ch < c; ++ch) acc += double(feat.data()[ch * hw + p]) * double(w.data()[ch]);
        out.data()[p] = T(acc);
    }
    if (detail::track<T>({feat.requires_grad(), w.requires_grad()})) {
        out.set_requires_grad(true);
        Tape<T>::active().record([fn = feat.handle(), wn = w.handle(), on = out.handle(), c, hw]() {
            if (on->g.empty()) return;
            for (int p = 0; p < hw; ++p) {
                const T go = on->g[p];
                if (go == T(0)) continue;
                for (int ch = 0; ch < c; ++ch) {
                    if (fn->requires_grad) detail::grad_of(fn.get())[ch * hw + p] += go * wn->x[ch];
                    if (wn->requires_grad) detail::grad_of(wn.get())[ch] += go * fn->x[ch * hw + p];
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Bilinear resize (half-pixel centers, coordinates clamped to the frame)
// ---------------------------------------------------------------------------

namespace detail {

struct LerpTap {
    int i0, i1;
    double t;
};

inline std::vector<LerpTap> lerp_taps(int in, int out) {
    std::vector<LerpTap> taps(out);
    const double sc = double(in) / double(out);
    for (int i = 0; i < out; ++i) {
        double s = (i + 0.5) * sc - 0.5;
        s = std::min(double(in - 1), std::max(0.0, s));
        int i0 = (int)std::floor(s);
        if (i0 > in - 1) i0 = in - 1;
        taps[i] = {i0, std::min(i0 + 1, in - 1), s - i0};
    }
    return taps;
}

}  // namespace detail

template <class T>
Value<T> bilinear_resize(const Value<T>& x, int h2, int w2) {
    if (x.rank() != 3) throw std::invalid_argument("bilinear_resize: need x[CxHxW]");
    if (h2 < 1 || w2 < 1) throw std::invalid_argument("bilinear_resize: target size must be >= 1");
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    auto ty = detail::lerp_taps(h, h2);
    auto tx = detail::lerp_taps(w, w2);
    Value<T> out = Value<T>::zeros({c, h2, w2});
    for (int ch = 0; ch < c; ++ch) {
        const T* xi = x.data().data() + ch * h * w;
        T* oi = out.data().data() + ch * h2 * w2;
        for (int i = 0; i < h2; ++i)
            for (int j = 0; j < w2; ++j) {
                const auto& ry = ty[i];
                const auto& rx = tx[j];
                // v0 + t*(v1-v0) form keeps constants exact.
                T r0 = xi[ry.i0 * w + rx.i0] + T(rx.t) * (xi[ry.i0 * w + rx.i1] - xi[ry.i0 * w + rx.i0]);
                T r1 = xi[ry.i1 * w + rx.i0] + T(rx.t) * (xi[ry.i1 * w + rx.i1] - xi[ry.i1 * w + rx.i0]);
                oi[i * w2 + j] = r0 + T(ry.t) * (r1 - r0);
            }
    }
    if (detail::track<T>({x.requires_grad()})) {
        out.set_requires_grad(true);
        Tape<T>::active().record([xn = x.handle(), on = out.handle(), ty, tx, c, h, w, h2, w2]() {
            if (on->g.empty() || !xn->requires_grad) return;
            auto& gx = detail::grad_of(xn.get());
            for (int ch = 0; ch < c; ++ch)
                for (int i = 0; i < h2; ++i)
                    for (int j = 0; j < w2; ++j) {
                        const T go = on->g[(ch * h2 + i) * w2 + j];
                        if (go == T(0)) continue;
                        const auto& ry = ty[i];
                        const auto& rx = tx[j];
                        const T wy0 = T(1.0 - ry.t), wy1 = T(ry.t), wx0 = T(1.0 - rx.t), wx1 = T(rx.t);
                        gx[(ch * h + ry.i0) * w + rx.i0] += go * wy0 * wx0;
                        gx[(ch * h + ry.i0) * w + rx.i1] += go * wy0 * wx1;
                        gx[(ch * h + ry.i1) * w + rx.i0] += go * wy1 * wx0;
                        gx[(ch * h + ry.i1) * w + rx.i1] += go * wy1 * wx1;
                    }
        });
    }
    return out;
}

}  // namespace camo
