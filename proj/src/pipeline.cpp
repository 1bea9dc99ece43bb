#include "camoadapt/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <thread>

#include "camoadapt/gradcheck.hpp"
#include "camoadapt/netpbm.hpp"
#include "camoadapt/objective.hpp"
#include "camoadapt/optim.hpp"

namespace fs = std::filesystem;

namespace camo {

Value<float> rgb_to_value(const Sample& s) {
    return Value<float>::from({3, s.h, s.w}, s.rgb);
}

Value<float> depth_to_value(const Sample& s) {
    std::vector<float> rep(3 * s.depth.size());
    for (int c = 0; c < 3; ++c) std::copy(s.depth.begin(), s.depth.end(), rep.begin() + c * s.depth.size());
    return Value<float>::from({3, s.h, s.w}, std::move(rep));
}

SoftPrediction predict(const Model<float>& m, const Sample& s) {
    NoGradGuard<float> ng;
    auto out = forward_sample(m, rgb_to_value(s), depth_to_value(s), s.box);
    SoftPrediction p;
    p.rgb = out.y_rgb.data();
    if (out.y_depth.defined()) {
        p.depth = out.y_depth.data();
        p.fused = fuse_predictions(p.rgb, p.depth);
    } else {
        p.fused = fuse_predictions(p.rgb, p.rgb);
    }
    return p;
}

void run_synth(const Config& cfg, int count, const std::string& dir) {
    if (count <= 0) throw std::invalid_argument("synth: count must be positive");
    fs::create_directories(dir);
    std::ofstream index(dir + "/index.txt");
    if (!index) throw std::runtime_error("synth: cannot write " + dir + "/index.txt");
    for (int i = 0; i < count; ++i) {
        SceneSpec spec;
        spec.seed = cfg.seed * 100000ull + (uint64_t)i;
        spec.texture_freq = cfg.texture_freq;
        spec.camo_strength = cfg.camo_strength;
        spec.depth_noise = cfg.depth_noise;
        Sample s = generate_scene(spec, cfg.image_size);
        char id[32];
        std::snprintf(id, sizeof id, "scene%04d", i);
        s.id = id;
        write_sample(dir, s);
        index << id << "\n";
    }
}

TrainResult run_train(const Config& cfg, std::ostream& log) {
    auto samples = load_dataset(cfg.data_dir);
    for (const auto& s : samples)
        if (s.h != cfg.image_size || s.w != cfg.image_size)
            throw std::runtime_error("train: sample " + s.id + " is " + std::to_string(s.w) + "x" +
                                     std::to_string(s.h) + " but the config expects " +
                                     std::to_string(cfg.image_size));

    Model<float> m = build_model<float>(cfg);
    AdamW<float> opt(cfg.lr, cfg.weight_decay);
    fs::create_directories(cfg.out_dir);

    TrainResult res;
    res.ckpt_step0 = cfg.out_dir + "/checkpoint_step0.smcd";
    res.ckpt_final = cfg.out_dir + "/checkpoint_final.smcd";
    res.loss_csv = cfg.out_dir + "/loss.csv";
    save_checkpoint(m.params, res.ckpt_step0);

    std::string csv = "step,L,L_DiceCE,L_KD_model,L_KD_modal\n";
    const int steps = cfg.epochs * (int)samples.size();
    res.steps = steps;
    Rng jitter_root(cfg.seed ^ 0xB0C5EEDull);

    auto& tape = Tape<float>::active();
    for (int step = 0; step < steps; ++step) {
        const Sample& s = samples[step % samples.size()];
        const Box box = perturb_box(s.box, s.w, s.h, jitter_root.fork((uint64_t)step).next_u64(), cfg.box_jitter);

        tape.clear();
        opt.zero_grad(m.params);
        auto out = forward_sample(m, rgb_to_value(s), depth_to_value(s), box);

        Value<float> gt = Value<float>::from({s.h, s.w}, s.gt);
        Value<float> l_dice = dice_ce_loss(out.y_rgb, gt);
        if (out.y_depth.defined()) l_dice = add(l_dice, dice_ce_loss(out.y_depth, gt));
        Value<float> l_kd = add(out.kd_model, out.kd_modal);
        Value<float> loss = add(scale(l_dice, (float)cfg.lambda), scale(l_kd, (float)(1.0 - cfg.lambda)));

        const float lv = loss.item();
        if (!std::isfinite(lv)) {
            tape.clear();
            throw std::runtime_error("train: non-finite loss at step " + std::to_string(step));
        }
        if (step == 0) res.first_loss = lv;
        res.final_loss = lv;

        char line[160];
        std::snprintf(line, sizeof line, "%d,%.9g,%.9g,%.9g,%.9g\n", step, lv, l_dice.item(),
                      out.kd_model.item(), out.kd_modal.item());
        csv += line;

        backward(loss);
        opt.step(m.params);
    }
    tape.clear();

    save_checkpoint(m.params, res.ckpt_final);
    std::ofstream f(res.loss_csv, std::ios::binary);
    f << csv;
    log << "train: " << steps << " steps, loss " << res.first_loss << " -> " << res.final_loss << "\n";
    return res;
}

EvalResult run_eval(const Config& cfg, const std::string& ckpt_path, const std::string& stream, int threads,
                    std::ostream& log) {
    if (stream != "rgb" && stream != "depth" && stream != "fused")
        throw std::invalid_argument("eval: unknown stream '" + stream + "'");
    auto samples = load_dataset(cfg.data_dir);
    Model<float> m = build_model<float>(cfg);
    apply_checkpoint(m, ckpt_path);
    if (stream == "depth" && !m.dual_stream())
        throw std::invalid_argument("eval: config '" + cfg.adapter_form + "' has no depth stream");

    EvalResult res;
    res.per_image.resize(samples.size());
    for (const auto& s : samples) res.ids.push_back(s.id);

    auto worker = [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i) {
            SoftPrediction p = predict(m, samples[i]);
            const std::vector<float>& pred = (stream == "rgb") ? p.rgb : (stream == "depth") ? p.depth : p.fused;
            res.per_image[i] = evaluate_one(pred, samples[i].gt, samples[i].h, samples[i].w);
        }
    };
    threads = std::max(1, threads);
    if (threads == 1 || samples.size() < 2) {
        worker(0, samples.size());
    } else {
        std::vector<std::thread> pool;
        const size_t chunk = (samples.size() + threads - 1) / threads;
        for (size_t b = 0; b < samples.size(); b += chunk)
            pool.emplace_back(worker, b, std::min(b + chunk, samples.size()));
        for (auto& t : pool) t.join();
    }

    MetricsReport mean;
    for (const auto& r : res.per_image) {
        mean.mae += r.mae;
        mean.fx += r.fx;
        mean.fw += r.fw;
        mean.sm += r.sm;
        mean.ex += r.ex;
        mean.ae += r.ae;
    }
    const double inv = 1.0 / double(res.per_image.size());
    mean.mae *= inv;
    mean.fx *= inv;
    mean.fw *= inv;
    mean.sm *= inv;
    mean.ex *= inv;
    mean.ae *= inv;
    res.mean = mean;

    fs::create_directories(cfg.out_dir);
    res.csv_path = cfg.out_dir + "/metrics.csv";
    std::ofstream csv(res.csv_path, std::ios::binary);
    csv << "id,M,Fx,Fw,Sm,Ex,aE\n";
    char line[256];
    for (size_t i = 0; i < res.per_image.size(); ++i) {
        const auto& r = res.per_image[i];
        std::snprintf(line, sizeof line, "%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", res.ids[i].c_str(), r.mae, r.fx,
                      r.fw, r.sm, r.ex, r.ae);
        csv << line;
    }
    std::snprintf(line, sizeof line, "mean,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", mean.mae, mean.fx, mean.fw, mean.sm,
                  mean.ex, mean.ae);
    csv << line;

    log << std::left << std::setw(12) << "id" << std::right;
    for (const char* h : {"M", "Fx", "Fw", "Sm", "Ex", "aE"}) log << std::setw(9) << h;
    log << "\n";
    auto print_row = [&](const std::string& id, const MetricsReport& r) {
        log << std::left << std::setw(12) << id << std::right << std::fixed << std::setprecision(4);
        log << std::setw(9) << r.mae << std::setw(9) << r.fx << std::setw(9) << r.fw << std::setw(9) << r.sm
            << std::setw(9) << r.ex << std::setw(9) << r.ae << "\n";
        log.unsetf(std::ios::fixed);
    };
    for (size_t i = 0; i < res.per_image.size(); ++i) print_row(res.ids[i], res.per_image[i]);
    print_row("mean", mean);
    return res;
}

void run_infer(const Config& cfg, const std::string& ckpt_path, const std::string& rgb_path,
               const std::string& depth_path, const std::string& out_path, bool soft, const Box* box,
               std::ostream& log) {
    Model<float> m = build_model<float>(cfg);
    apply_checkpoint(m, ckpt_path);

    Sample s;
    PnmImage rgb = read_pnm(rgb_path);
    if (rgb.w != cfg.image_size || rgb.h != cfg.image_size)
        throw std::runtime_error("infer: " + rgb_path + " is " + std::to_string(rgb.w) + "x" +
                                 std::to_string(rgb.h) + " but the config expects " +
                                 std::to_string(cfg.image_size));
    s.h = rgb.h;
    s.w = rgb.w;
    s.rgb = pnm_to_rgb_planar(rgb);
    if (m.dual_stream()) {
        PnmImage depth = read_pnm(depth_path);
        if (depth.w != s.w || depth.h != s.h) throw std::runtime_error("infer: depth size mismatch");
        s.depth = pnm_to_gray(depth);
    } else {
        if (!depth_path.empty()) log << "infer: config '" << cfg.adapter_form << "' ignores the depth input\n";
        s.depth.assign(size_t(s.h) * s.w, 0.0f);
    }
    s.box = box ? *box : Box{0, 0, s.w, s.h};
    if (!s.box.valid(s.w, s.h)) throw std::runtime_error("infer: invalid box prompt");

    SoftPrediction p = predict(m, s);
    write_pnm(out_path, gray_to_pnm(p.fused, s.h, s.w));
    log << "infer: wrote " << out_path << "\n";
    if (soft) {
        const std::string base = out_path.substr(0, out_path.find_last_of('.'));
        write_pnm(base + "_rgb_soft.pgm", gray_to_pnm(p.rgb, s.h, s.w));
        log << "infer: wrote " << base + "_rgb_soft.pgm" << "\n";
        if (!p.depth.empty()) {
            write_pnm(base + "_depth_soft.pgm", gray_to_pnm(p.depth, s.h, s.w));
            log << "infer: wrote " << base + "_depth_soft.pgm" << "\n";
        }
    }
}

// ---------------------------------------------------------------------------
// Gradient-check suite (64-bit oracle throughout)
// ---------------------------------------------------------------------------

namespace {

Value<double> randn(Rng& rng, Shape shape, bool rg, double s = 1.0) {
    auto v = Value<double>::zeros(std::move(shape), rg);
    for (auto& x : v.data()) x = rng.gaussian() * s;
    return v;
}

// Layer norms at the unit point make quadratic readouts nearly constant and
// the relative-error criterion ill-conditioned; fixtures perturb them.
void roughen_ln(Rng& rng, LayerNormP<double>& ln) {
    for (auto& v : ln.gain.data()) v = 1.0 + 0.3 * rng.gaussian();
    for (auto& v : ln.bias.data()) v = 0.3 * rng.gaussian();
}

GradCheckRow check_adapter() {
    Rng rng(41);
    EncoderConfig cfg;
    cfg.image_size = 16;
    cfg.patch_size = 4;
    cfg.embed_dim = 16;
    cfg.heads = 2;
    cfg.depth = 1;
    cfg.adapter_dim = 4;
    cfg.mlp_hidden = 32;
    cfg.wavelet = WaveletKind::db2;
    auto ap = make_adapter<double>(rng, cfg.embed_dim, cfg.adapter_dim);
    for (auto& v : ap.up.w.data()) v = rng.gaussian() * 0.2;
    auto x = randn(rng, {cfg.tokens(), cfg.embed_dim}, true, 0.5);
    auto f = [&]() {
        auto y = adapter_forward(x, ap, cfg, true);
        return sum_all(mul(y, y));
    };
    std::vector<Value<double>> ps = {x,       ap.down.w,     ap.down.b,    ap.up.w,
                                     ap.up.b, ap.dwt_proj.w, ap.dwt_proj.b};
    GradCheckOptions opt;
    opt.h = 1e-4;
    return {"adapter_forward", finite_diff_check<double>(f, ps, opt), 1e-4, false};
}

GradCheckRow check_encoder_block() {
    Rng rng(43);
    EncoderConfig cfg;
    cfg.image_size = 16;
    cfg.patch_size = 4;
    cfg.embed_dim = 16;
    cfg.heads = 2;
    cfg.depth = 1;
    cfg.adapter_dim = 4;
    cfg.mlp_hidden = 32;
    cfg.wavelet = WaveletKind::db2;
    auto enc = make_encoder<double>(rng, cfg, AdapterForm::dual, true);
    auto& b = enc.blocks[0];
    for (auto& v : b.adapter_rgb.up.w.data()) v = rng.gaussian() * 0.1;
    roughen_ln(rng, b.norm1);
    auto x = randn(rng, {cfg.tokens(), cfg.embed_dim}, true, 0.5);
    auto w = randn(rng, {cfg.tokens(), cfg.embed_dim}, false);
    auto f = [&]() {
        auto y = encoder_block_forward(x, b, Stream::rgb, cfg, AdapterForm::dual, true);
        return sum_all(mul(y, w));
    };
    std::vector<Value<double>> ps = {x,
                                     b.norm1.gain,
                                     b.norm1.bias,
                                     b.adapter_rgb.down.w,
                                     b.adapter_rgb.up.w,
                                     b.adapter_rgb.up.b,
                                     b.adapter_rgb.dwt_proj.w};
    GradCheckOptions opt;
    opt.max_coords_per_param = 12;
    opt.h = 1e-4;
    return {"encoder_block", finite_diff_check<double>(f, ps, opt), 1e-4, false};
}

GradCheckRow check_kl() {
    Rng rng(47);
    auto t = randn(rng, {6, 8}, true);
    auto s = randn(rng, {6, 8}, true);
    auto w = randn(rng, {8, 8}, true, 0.3);
    auto f = [&]() {
        // composite: student passes through a linear layer first
        auto sq = matmul(s, w);
        return kl_feature_divergence(t, sq);
    };
    return {"kl_feature_divergence", finite_diff_check<double>(f, {s, w}), 1e-4, false};
}

GradCheckRow check_mixer() {
    Rng rng(53);
    const int d = 4, gs = 4, n = gs * gs;
    auto mixer = make_mixer<double>(d, PromptMix::full);
    for (auto& v : mixer.dw_dense.data()) v += rng.gaussian() * 0.1;
    for (auto& v : mixer.dw_mix.data()) v += rng.gaussian() * 0.1;
    for (auto& v : mixer.pw_w.data()) v += rng.gaussian() * 0.1;
    mixer.dw_dense.set_requires_grad(true);
    mixer.dw_mix.set_requires_grad(true);
    mixer.pw_w.set_requires_grad(true);
    mixer.pw_b.set_requires_grad(true);
    PromptBundle<double> bundle;
    bundle.dense = randn(rng, {d, gs, gs}, true);
    auto expert_tok = randn(rng, {n, d}, true);
    auto xr = randn(rng, {n, d}, true);
    auto xd = randn(rng, {n, d}, true);
    auto f = [&]() {
        auto m = mix_dense_prompt(bundle, expert_tok, xr, xd, mixer, PromptMix::full, gs);
        return sum_all(mul(m, m));
    };
    std::vector<Value<double>> ps = {bundle.dense, expert_tok,         xr,         xd,
                                     mixer.dw_dense, mixer.dw_mix, mixer.pw_w, mixer.pw_b};
    GradCheckOptions opt;
    opt.h = 1e-4;
    return {"mix_dense_prompt", finite_diff_check<double>(f, ps, opt), 1e-4, false};
}

GradCheckRow check_two_way() {
    Rng rng(59);
    const int d = 8;
    auto dec = make_decoder<double>(rng, d, 2, 1);
    auto& l = dec.layers[0];
    roughen_ln(rng, l.ln1);
    roughen_ln(rng, l.ln2);
    roughen_ln(rng, l.ln3);
    roughen_ln(rng, l.ln4);
    auto tokens = randn(rng, {3, d}, true, 0.5);
    auto image = randn(rng, {4, d}, true, 0.5);
    auto wt = randn(rng, {3, d}, false);
    auto wi = randn(rng, {4, d}, false);
    auto f = [&]() {
        auto [t, i] = two_way_attention_layer(tokens, image, l);
        return add(sum_all(mul(t, wt)), sum_all(mul(i, wi)));
    };
    std::vector<Value<double>> ps = {tokens,       image,        l.self_attn.q.w, l.cross_t2i.o.w,
                                     l.cross_i2t.v.w, l.mlp.fc1.w, l.ln2.gain,      l.ln4.bias};
    GradCheckOptions opt;
    opt.max_coords_per_param = 12;
    opt.h = 1e-4;
    return {"two_way_attention_layer", finite_diff_check<double>(f, ps, opt), 1e-4, false};
}

GradCheckRow check_decoder() {
    Rng rng(61);
    const int d = 8, gs = 2;
    auto dec = make_decoder<double>(rng, d, 2);
    for (auto& l : dec.layers) {
        roughen_ln(rng, l.ln1);
        roughen_ln(rng, l.ln2);
        roughen_ln(rng, l.ln3);
        roughen_ln(rng, l.ln4);
    }
    // zero biases put relu-dead positions exactly on the kink; nudge off it
    for (auto* b : {&dec.up1_b, &dec.up2_b, &dec.hyper.fc1.b, &dec.hyper.fc2.b})
        for (auto& v : b->data()) v = 0.1 * rng.gaussian();
    auto pp = make_prompt_params<double>(rng, d);
    auto pe = fourier_grid_pe(pp, gs);
    auto image = randn(rng, {gs * gs, d}, true, 0.5);
    auto bundle = encode_box_prompt(Box{2, 2, 12, 12}, pp, 16, 16, gs);
    bundle.sparse.set_requires_grad(true);
    bundle.dense.set_requires_grad(true);
    auto wy = randn(rng, {1, 16, 16}, false);
    auto f = [&]() {
        auto y = decode_mask(image, bundle, pe, dec, gs, 16, 16);
        return sum_all(mul(y, wy));
    };
    std::vector<Value<double>> ps = {image,      bundle.sparse,  bundle.dense,    dec.mask_token,
                                     dec.up1_w,  dec.up2_w,      dec.up2_b,       dec.hyper.fc1.w,
                                     dec.hyper.fc2.w, dec.layers[0].cross_i2t.o.w, dec.layers[1].mlp.fc2.w,
                                     dec.layers[1].ln1.gain};
    GradCheckOptions opt;
    opt.max_coords_per_param = 8;
    opt.h = 1e-4;
    return {"decode_mask", finite_diff_check<double>(f, ps, opt), 1e-4, false};
}

GradCheckRow check_dice_ce() {
    Rng rng(67);
    auto gt = Value<double>::zeros({6, 6});
    for (auto& v : gt.data()) v = rng.uniform() < 0.4 ? 1.0 : 0.0;
    auto logits = randn(rng, {1, 6, 6}, true);
    auto f = [&]() { return dice_ce_loss(sigmoid(logits), gt); };
    return {"dice_ce_loss", finite_diff_check<double>(f, {logits}), 1e-4, false};
}

}  // namespace

std::vector<GradCheckRow> gradcheck_suite() {
    std::vector<GradCheckRow> rows = {check_adapter(), check_encoder_block(), check_kl(),     check_mixer(),
                                      check_two_way(), check_decoder(),       check_dice_ce()};
    for (auto& r : rows) r.pass = r.err < r.tol;
    return rows;
}

bool run_gradcheck(std::ostream& os) {
    auto rows = gradcheck_suite();
    bool all = true;
    os << std::left << std::setw(28) << "composite" << std::setw(14) << "max_rel_err" << "status\n";
    for (const auto& r : rows) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3e", r.err);
        os << std::left << std::setw(28) << r.name << std::setw(14) << buf << (r.pass ? "pass" : "FAIL") << "\n";
        all = all && r.pass;
    }
    return all;
}

}  // namespace camo
