#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstring>

#include "camoadapt/decoder.hpp"
#include "camoadapt/gradcheck.hpp"

using namespace camo;

namespace {

template <class T>
bool bits_equal(const Value<T>& a, const Value<T>& b) {
    return a.numel() == b.numel() &&
           std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(T)) == 0;
}

template <class T>
Value<T> randv(Rng& rng, Shape shape, bool rg = false, double s = 1.0) {
    auto v = Value<T>::zeros(std::move(shape), rg);
    for (auto& x : v.data()) x = T(rng.gaussian() * s);
    return v;
}

}  // namespace

TEST_CASE("two-way layer: shapes preserved; zeroed cross projections cut the image path") {
    Tape<float>::active().clear();
    Rng rng(1);
    const int d = 8;
    auto dec = make_decoder<float>(rng, d, 2, 1);
    auto& layer = dec.layers[0];
    auto tokens = randv<float>(rng, {3, d});
    auto image = randv<float>(rng, {4, d});

    auto [t1, i1] = two_way_attention_layer(tokens, image, layer);
    CHECK(t1.shape() == tokens.shape());
    CHECK(i1.shape() == image.shape());

    // zero the token->image cross-attention output projection: tokens' can no
    // longer depend on the image (the layer reduces to the feedforward path)
    for (auto& v : layer.cross_t2i.o.w.data()) v = 0.0f;
    for (auto& v : layer.cross_t2i.o.b.data()) v = 0.0f;
    auto [ta, ia] = two_way_attention_layer(tokens, image, layer);
    auto [tb, ib] = two_way_attention_layer(tokens, randv<float>(rng, {4, d}), layer);
    CHECK(bits_equal(ta, tb));
    CHECK_FALSE(bits_equal(ia, ib));

    CHECK_THROWS_AS(two_way_attention_layer(randv<float>(rng, {3, 4}), image, layer), std::invalid_argument);
}

TEST_CASE("two-way layer gradcheck at tiny dims (T=3, N=4, D=8)") {
    Tape<double>::active().clear();
    Rng rng(2);
    const int d = 8;
    auto dec = make_decoder<double>(rng, d, 2, 1);
    auto& l = dec.layers[0];
    // unit-gain norms make quadratic readouts nearly constant; randomize them
    for (auto* ln : {&l.ln1, &l.ln2, &l.ln3, &l.ln4}) {
        for (auto& v : ln->gain.data()) v = 1.0 + 0.3 * rng.gaussian();
        for (auto& v : ln->bias.data()) v = 0.3 * rng.gaussian();
    }
    auto tokens = randv<double>(rng, {3, d}, true, 0.5);
    auto image = randv<double>(rng, {4, d}, true, 0.5);
    auto wt = randv<double>(rng, {3, d});
    auto wi = randv<double>(rng, {4, d});
    auto f = [&]() {
        auto [t, i] = two_way_attention_layer(tokens, image, l);
        return add(sum_all(mul(t, wt)), sum_all(mul(i, wi)));
    };
    std::vector<Value<double>> ps = {tokens,          image,          l.self_attn.q.w, l.self_attn.o.w,
                                     l.cross_t2i.q.w, l.cross_t2i.v.w, l.cross_i2t.q.w, l.cross_i2t.o.w,
                                     l.mlp.fc1.w,     l.mlp.fc1.b,    l.mlp.fc2.w,     l.ln1.gain,
                                     l.ln2.bias,      l.ln3.gain,     l.ln4.gain};
    GradCheckOptions opt;
    opt.max_coords_per_param = 10;
    opt.h = 1e-4;  // keeps the oracle's relu kink band narrow
    CHECK(finite_diff_check<double>(f, ps, opt) < 1e-4);
}

TEST_CASE("decode_mask: range, shape, determinism") {
    Tape<float>::active().clear();
    Rng rng(3);
    const int d = 16, gs = 4;
    auto dec = make_decoder<float>(rng, d, 2);
    auto pp = make_prompt_params<float>(rng, d);
    auto pe = fourier_grid_pe(pp, gs);
    auto image = randv<float>(rng, {gs * gs, d}, false, 0.5);
    auto bundle = encode_box_prompt(Box{8, 8, 40, 40}, pp, 64, 64, gs);

    auto y = decode_mask(image, bundle, pe, dec, gs, 64, 64);
    CHECK(y.shape() == Shape{1, 64, 64});
    for (float v : y.data()) {
        CHECK(v > 0.0f);
        CHECK(v < 1.0f);
    }

    auto y2 = decode_mask(image, bundle, pe, dec, gs, 64, 64);
    CHECK(bits_equal(y, y2));

    // two decoders with identical weights produce identical masks
    Rng rng_a(77), rng_b(77);
    auto dec_a = make_decoder<float>(rng_a, d, 2);
    auto dec_b = make_decoder<float>(rng_b, d, 2);
    CHECK(bits_equal(decode_mask(image, bundle, pe, dec_a, gs, 32, 32),
                     decode_mask(image, bundle, pe, dec_b, gs, 32, 32)));

    // disjoint parameter sets: updating one leaves the other's output unchanged
    auto before = decode_mask(image, bundle, pe, dec_b, gs, 32, 32);
    dec_a.mask_token.data()[0] += 1.0f;
    dec_a.layers[0].self_attn.q.w.data()[3] += 0.5f;
    auto after_b = decode_mask(image, bundle, pe, dec_b, gs, 32, 32);
    CHECK(bits_equal(before, after_b));
    CHECK_FALSE(bits_equal(decode_mask(image, bundle, pe, dec_a, gs, 32, 32), before));
}

TEST_CASE("decode_mask gradcheck on a 16x16 output configuration") {
    Tape<double>::active().clear();
    Rng rng(4);
    const int d = 8, gs = 2;
    auto dec = make_decoder<double>(rng, d, 2);
    for (auto& l : dec.layers)
        for (auto* ln : {&l.ln1, &l.ln2, &l.ln3, &l.ln4}) {
            for (auto& v : ln->gain.data()) v = 1.0 + 0.3 * rng.gaussian();
            for (auto& v : ln->bias.data()) v = 0.3 * rng.gaussian();
        }
    // zero biases put relu-dead positions exactly on the kink, where central
    // differences and the subgradient legitimately disagree; nudge off it
    for (auto* b : {&dec.up1_b, &dec.up2_b, &dec.hyper.fc1.b, &dec.hyper.fc2.b})
        for (auto& v : b->data()) v = 0.1 * rng.gaussian();
    auto pp = make_prompt_params<double>(rng, d);
    auto pe = fourier_grid_pe(pp, gs);
    auto image = randv<double>(rng, {gs * gs, d}, true, 0.5);
    auto bundle = encode_box_prompt(Box{2, 2, 12, 12}, pp, 16, 16, gs);
    bundle.sparse.set_requires_grad(true);
    bundle.dense.set_requires_grad(true);

    auto wy = randv<double>(rng, {1, 16, 16});
    auto f = [&]() {
        auto y = decode_mask(image, bundle, pe, dec, gs, 16, 16);
        return sum_all(mul(y, wy));
    };
    std::vector<Value<double>> ps = {image,
                                     bundle.sparse,
                                     bundle.dense,
                                     dec.mask_token,
                                     dec.layers[0].self_attn.q.w,
                                     dec.layers[0].cross_t2i.o.w,
                                     dec.layers[0].cross_i2t.v.w,
                                     dec.layers[1].mlp.fc1.w,
                                     dec.layers[1].ln4.gain,
                                     dec.up1_w,
                                     dec.up1_b,
                                     dec.up2_w,
                                     dec.up2_b,
                                     dec.hyper.fc1.w,
                                     dec.hyper.fc2.w,
                                     dec.hyper.fc2.b};
    GradCheckOptions opt;
    opt.max_coords_per_param = 8;
    opt.h = 1e-4;
    CHECK(finite_diff_check<double>(f, ps, opt) < 1e-4);
}
