#pragma once

// Central finite-difference verifier for tape gradients. The harness is the
// project's independent oracle: it re-evaluates the forward closure at
// perturbed parameter values and compares the quotient against the adjoint
// from backward(). Instantiate with T=double for a 64-bit oracle.

#include <functional>
#include <vector>

#include "camoadapt/rng.hpp"
#include "camoadapt/tensor.hpp"

namespace camo {

struct GradCheckOptions {
    int max_coords_per_param = 20;
    double h = 1e-3;
    uint64_t seed = 7;
};

// f rebuilds the graph from current parameter values and returns a scalar
// loss. Returns max over sampled coordinates of
// |analytic - central| / (|central| + 1e-8).
template <class T>
double finite_diff_check(const std::function<Value<T>()>& f, const std::vector<Value<T>>& params,
                         GradCheckOptions opt = {}) {
    auto& tape = Tape<T>::active();

    tape.clear();
    for (const auto& p : params) const_cast<Value<T>&>(p).zero_grad();
    Value<T> loss = f();
    backward(loss);
    std::vector<std::vector<T>> analytic;
    analytic.reserve(params.size());
    for (const auto& p : params) {
        if (p.has_grad())
            analytic.push_back(p.grad());
        else
            analytic.emplace_back(p.numel(), T(0));
    }
    tape.clear();

    Rng rng(opt.seed);
    double max_rel = 0.0;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto& pdata = const_cast<Value<T>&>(params[pi]).data();
        const int n = (int)pdata.size();
        std::vector<int> coords;
        if (n <= opt.max_coords_per_param) {
            coords.resize(n);
            for (int i = 0; i < n; ++i) coords[i] = i;
        } else {
            for (int i = 0; i < opt.max_coords_per_param; ++i) coords.push_back((int)(rng.next_u64() % n));
        }
        for (int ci : coords) {
            const T orig = pdata[ci];
            double fp, fm, xp, xm;
            {
                NoGradGuard<T> ng;
                pdata[ci] = T(double(orig) + opt.h);
                xp = double(pdata[ci]);
                fp = double(f().item());
                pdata[ci] = T(double(orig) - opt.h);
                xm = double(pdata[ci]);
                fm = double(f().item());
                pdata[ci] = orig;
            }
            const double central = (fp - fm) / (xp - xm);
            const double rel = std::abs(double(analytic[pi][ci]) - central) / (std::abs(central) + 1e-8);
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

}  // namespace camo
