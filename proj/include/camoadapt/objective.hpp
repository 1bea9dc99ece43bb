#pragma once

// Training losses and the inference fusion rule.

#include <stdexcept>

#include "camoadapt/tensor.hpp"

namespace camo {

// 0.5 * dice + 0.5 * BCE. Dice uses Laplace smoothing (eps = 1.0) so empty
// masks stay stable; probabilities are clamped away from {0,1} for the log.
template <class T>
Value<T> dice_ce_loss(const Value<T>& pred, const Value<T>& gt) {
    if (pred.shape() != gt.shape() && !(pred.rank() == 3 && pred.dim(0) == 1 && gt.rank() == 2 &&
                                        pred.dim(1) == gt.dim(0) && pred.dim(2) == gt.dim(1)))
        throw std::invalid_argument("dice_ce_loss: shape mismatch " + shape_str(pred.shape()) + " vs " +
                                    shape_str(gt.shape()));
    Value<T> g = gt.rank() == 2 ? reshape(detach(gt), pred.shape()) : detach(gt);
    const T eps = T(1);
    Value<T> p = clamp(pred, T(1e-7), T(1) - T(1e-7));
    Value<T> inter = sum_all(mul(p, g));
    Value<T> sums = add(sum_all(p), sum_all(g));
    Value<T> dice = sub(Value<T>::scalar(T(1)),
                        div(add(scale(inter, T(2)), Value<T>::scalar(eps)), add(sums, Value<T>::scalar(eps))));
    Value<T> one = Value<T>::scalar(T(1));
    Value<T> ce_map = add(mul(g, log(p)), mul(sub(one, g), log(sub(one, p))));
    Value<T> bce = neg(mean_all(ce_map));
    return add(scale(dice, T(0.5)), scale(bce, T(0.5)));
}

// L = lambda * (DiceCE(Y_rgb) + DiceCE(Y_depth)) + (1 - lambda) * L_KD.
// y_depth may be undefined (single-stream mode); its term is dropped.
template <class T>
Value<T> total_loss(const Value<T>& y_rgb, const Value<T>& y_depth, const Value<T>& gt, const Value<T>& l_kd,
                    double lambda) {
    if (lambda < 0.0 || lambda > 1.0)
        throw std::invalid_argument("total_loss: lambda " + std::to_string(lambda) + " outside [0,1]");
    Value<T> sup = dice_ce_loss(y_rgb, gt);
    if (y_depth.defined()) sup = add(sup, dice_ce_loss(y_depth, gt));
    return add(scale(sup, T(lambda)), scale(l_kd, T(1.0 - lambda)));
}

// Pixel is foreground iff 0.5*a + 0.5*b > 0.5, strictly. Returns a {0,1} map.
template <class T>
std::vector<T> fuse_predictions(const std::vector<T>& a, const std::vector<T>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("fuse_predictions: size mismatch");
    std::vector<T> out(a.size());
    for (size_t i = 0; i < a.size(); ++i) out[i] = (T(0.5) * a[i] + T(0.5) * b[i] > T(0.5)) ? T(1) : T(0);
    return out;
}

}  // namespace camo
