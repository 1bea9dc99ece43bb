#pragma once

// Bidirectional knowledge distillation: a frozen convolutional expert stub
// calibrated into the encoder's embedding space by the trainable BC affine,
// and KL losses over per-token channel distributions. Teachers are always
// gradient-detached.

#include <stdexcept>
#include <vector>

#include "camoadapt/nn.hpp"
#include "camoadapt/tensor.hpp"

namespace camo {

enum class KdMode { both, model_only, modal_only, reversed, off };

// Frozen strided conv pyramid: 3 x H x W -> C_e x H/2^stages x W/2^stages.
// Stands in for a pretrained expert; fixed-seed initialized, never updated.
template <class T>
struct ExpertStub {
    struct Stage {
        Value<T> w, b;
    };
    std::vector<Stage> stages;
    int out_channels = 48;
};

template <class T>
ExpertStub<T> make_expert_stub(Rng& rng, int num_stages, int out_channels = 48) {
    ExpertStub<T> s;
    s.out_channels = out_channels;
    int cin = 3;
    for (int i = 0; i < num_stages; ++i) {
        // Channel plan: halve toward the output width for each earlier stage.
        int cout = out_channels;
        for (int j = i + 1; j < num_stages; ++j) cout = std::max(4, cout / 2);
        typename ExpertStub<T>::Stage st;
        st.w = Value<T>::zeros({cout, cin, 3, 3}, false);
        st.b = Value<T>::zeros({cout}, false);
        const double sc = std::sqrt(2.0 / double(cin * 9));
        for (auto& v : st.w.data()) v = T(rng.gaussian() * sc);
        s.stages.push_back(std::move(st));
        cin = cout;
    }
    return s;
}

// Trainable bias calibration: BC(X) = alpha * proj(X) + beta, per channel.
template <class T>
struct BCParams {
    Linear<T> proj;  // C_e -> D
    Value<T> alpha;  // [D]
    Value<T> beta;   // [D]
};

template <class T>
BCParams<T> make_bc(Rng& rng, int c_e, int d) {
    BCParams<T> bc;
    bc.proj = make_linear<T>(rng, c_e, d, true);
    bc.alpha = Value<T>::full({d}, T(1), true);
    bc.beta = Value<T>::zeros({d}, true);
    return bc;
}

// Pyramid features flattened to the encoder token grid, then calibrated.
// Gradient reaches the BC parameters only; the stub is frozen.
template <class T>
Value<T> expert_forward(const Value<T>& rgb, const ExpertStub<T>& stub, const BCParams<T>& bc) {
    Value<T> f = rgb;
    for (size_t i = 0; i < stub.stages.size(); ++i) {
        f = conv2d(f, stub.stages[i].w, stub.stages[i].b, 2, 1);
        if (i + 1 < stub.stages.size()) f = relu(f);
    }
    Value<T> tokens = grid_to_tokens(f);  // [N x C_e]
    Value<T> proj = linear(tokens, bc.proj);
    return add_row_vector(mul_row_vector(proj, bc.alpha), bc.beta);
}

// Mean over tokens of KL(p || q) where p/q are channel softmaxes of the
// teacher/student rows. The teacher is detached: distillation is strictly
// teacher -> student.
template <class T>
Value<T> kl_feature_divergence(const Value<T>& teacher, const Value<T>& student) {
    if (teacher.shape() != student.shape())
        throw std::invalid_argument("kl_feature_divergence: shape mismatch " + shape_str(teacher.shape()) +
                                    " vs " + shape_str(student.shape()));
    Value<T> t = detach(teacher);
    Value<T> p = softmax_axis(t, 1);
    Value<T> lp = log_softmax_axis(t, 1);
    Value<T> lq = log_softmax_axis(student, 1);
    Value<T> per = mul(p, sub(lp, lq));
    return scale(sum_all(per), T(1) / T(teacher.dim(0)));
}

template <class T>
struct KdLosses {
    Value<T> model;  // expert -> RGB stream
    Value<T> modal;  // RGB stream -> depth stream
};

// Direction variants are argument permutations of the same KL, nothing more.
template <class T>
KdLosses<T> bikd_losses(const Value<T>& x_expert, const Value<T>& x_rgb, const Value<T>& x_depth, KdMode mode) {
    KdLosses<T> out{Value<T>::scalar(T(0)), Value<T>::scalar(T(0))};
    switch (mode) {
        case KdMode::both:
            out.model = kl_feature_divergence(x_expert, x_rgb);
            out.modal = kl_feature_divergence(x_rgb, x_depth);
            break;
        case KdMode::model_only:
            out.model = kl_feature_divergence(x_expert, x_rgb);
            break;
        case KdMode::modal_only:
            out.modal = kl_feature_divergence(x_rgb, x_depth);
            break;
        case KdMode::reversed:
            out.model = kl_feature_divergence(x_expert, x_depth);
            out.modal = kl_feature_divergence(x_depth, x_rgb);
            break;
        case KdMode::off:
            break;
    }
    return out;
}

}  // namespace camo
