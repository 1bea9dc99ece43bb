#pragma once

// AdamW with decoupled weight decay. Decay is skipped for parameters flagged
// no_decay (norm gains/biases). Frozen parameters are never touched.

#include <cmath>
#include <vector>

#include "camoadapt/model.hpp"

namespace camo {

template <class T>
class AdamW {
public:
    AdamW(double lr = 1e-4, double weight_decay = 0.01, double beta1 = 0.9, double beta2 = 0.999,
          double eps = 1e-8)
        : lr_(lr), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(std::vector<ParamRef<T>>& params) {
        if (m_.empty()) {
            m_.resize(params.size());
            v_.resize(params.size());
            for (size_t i = 0; i < params.size(); ++i)
                if (params[i].trainable) {
                    m_[i].assign(params[i].v.numel(), T(0));
                    v_[i].assign(params[i].v.numel(), T(0));
                }
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, double(t_));
        const double bc2 = 1.0 - std::pow(beta2_, double(t_));
        for (size_t i = 0; i < params.size(); ++i) {
            if (!params[i].trainable) continue;
            auto& p = params[i].v.data();
            const auto& g = params[i].v.grad();
            const bool has_g = !g.empty();
            for (size_t j = 0; j < p.size(); ++j) {
                const double gj = has_g ? double(g[j]) : 0.0;
                m_[i][j] = T(beta1_ * double(m_[i][j]) + (1.0 - beta1_) * gj);
                v_[i][j] = T(beta2_ * double(v_[i][j]) + (1.0 - beta2_) * gj * gj);
                const double mhat = double(m_[i][j]) / bc1;
                const double vhat = double(v_[i][j]) / bc2;
                double upd = lr_ * mhat / (std::sqrt(vhat) + eps_);
                if (!params[i].no_decay) upd += lr_ * wd_ * double(p[j]);
                p[j] = T(double(p[j]) - upd);
            }
        }
    }

    void zero_grad(std::vector<ParamRef<T>>& params) {
        for (auto& p : params) p.v.zero_grad();
    }

    int64_t steps() const { return t_; }

private:
    double lr_, wd_, beta1_, beta2_, eps_;
    int64_t t_ = 0;
    std::vector<std::vector<T>> m_, v_;
};

}  // namespace camo
