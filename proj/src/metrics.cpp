#include "camoadapt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace camo {

namespace {

constexpr double kEps = 2.220446049250313e-16;

void check_sizes(const std::vector<float>& pred, const std::vector<float>& gt, int h, int w, const char* who) {
    if (pred.size() != gt.size() || pred.size() != size_t(h) * w)
        throw std::invalid_argument(std::string(who) + ": size mismatch (pred " + std::to_string(pred.size()) +
                                    ", gt " + std::to_string(gt.size()) + ", h*w " + std::to_string(h * w) + ")");
}

double mean_of(const std::vector<float>& v) {
    double s = 0;
    for (float x : v) s += x;
    return s / double(v.size());
}

// F_beta at one binarization threshold; 0 when precision + recall collapse.
// Swept thresholds binarize strictly (pred > t), so an all-zero prediction
// stays empty even at t = 0.
double f_beta_at(const std::vector<float>& pred, const std::vector<float>& gt, double th, double beta2) {
    long tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] > th;
        const bool g = gt[i] > 0.5f;
        tp += (p && g);
        fp += (p && !g);
        fn += (!p && g);
    }
    const double prec = (tp + fp) ? double(tp) / double(tp + fp) : 0.0;
    const double rec = (tp + fn) ? double(tp) / double(tp + fn) : 0.0;
    const double denom = beta2 * prec + rec;
    return denom > 0.0 ? (1.0 + beta2) * prec * rec / denom : 0.0;
}

// Weighted F-measure (dependency + importance weighting). Exact euclidean
// distance transform with row-major first-minimum tie breaking.
double weighted_f(const std::vector<float>& pred, const std::vector<float>& gt, int h, int w) {
    const int n = h * w;
    std::vector<int> fg;
    for (int i = 0; i < n; ++i)
        if (gt[i] > 0.5f) fg.push_back(i);
    if (fg.empty()) return 0.0;

    std::vector<double> err(n);
    for (int i = 0; i < n; ++i) err[i] = std::abs(double(pred[i]) - double(gt[i] > 0.5f ? 1.0 : 0.0));

    // nearest foreground pixel per background pixel
    std::vector<double> dist(n, 0.0);
    std::vector<int> nearest(n);
    for (int i = 0; i < n; ++i) nearest[i] = i;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int i = y * w + x;
            if (gt[i] > 0.5f) continue;
            double best = std::numeric_limits<double>::max();
            int best_idx = fg[0];
            for (int j : fg) {
                const double dy = double(j / w - y), dx = double(j % w - x);
                const double d2 = dy * dy + dx * dx;
                if (d2 < best) {
                    best = d2;
                    best_idx = j;
                }
            }
            dist[i] = std::sqrt(best);
            nearest[i] = best_idx;
        }

    // pixel dependency: propagate foreground error to the background, blur
    std::vector<double> et(n);
    for (int i = 0; i < n; ++i) et[i] = (gt[i] > 0.5f) ? err[i] : err[nearest[i]];

    double kern[7][7], ksum = 0;
    for (int u = 0; u < 7; ++u)
        for (int v = 0; v < 7; ++v) {
            kern[u][v] = std::exp(-((u - 3.0) * (u - 3.0) + (v - 3.0) * (v - 3.0)) / (2.0 * 25.0));
            ksum += kern[u][v];
        }
    for (auto& row : kern)
        for (double& k : row) k /= ksum;

    std::vector<double> ea(n, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0;
            for (int u = -3; u <= 3; ++u)
                for (int v = -3; v <= 3; ++v) {
                    const int yy = y + u, xx = x + v;
                    if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;  // zero padding
                    acc += kern[u + 3][v + 3] * et[yy * w + xx];
                }
            ea[y * w + x] = acc;
        }

    std::vector<double> min_e_ea(err);
    for (int i : fg)
        if (ea[i] < err[i]) min_e_ea[i] = ea[i];

    // pixel importance: background decays with distance to the object
    const double decay = std::log(0.5) / 5.0;
    double ew_fg = 0, ew_bg = 0;
    for (int i = 0; i < n; ++i) {
        const double b = (gt[i] > 0.5f) ? 1.0 : 2.0 - std::exp(decay * dist[i]);
        const double ewv = min_e_ea[i] * b;
        if (gt[i] > 0.5f)
            ew_fg += ewv;
        else
            ew_bg += ewv;
    }
    const double tpw = double(fg.size()) - ew_fg;
    const double fpw = ew_bg;
    const double recall = 1.0 - ew_fg / double(fg.size());
    const double precision = tpw / (kEps + tpw + fpw);
    return 2.0 * precision * recall / (kEps + precision + recall);
}

// Object-level similarity term for one region's prediction values.
double s_object_score(const std::vector<double>& vals) {
    const size_t n = vals.size();
    if (n == 0) return 0.0;
    double mu = 0;
    for (double v : vals) mu += v;
    mu /= double(n);
    double sd = 0;
    if (n > 1) {
        for (double v : vals) sd += (v - mu) * (v - mu);
        sd = std::sqrt(sd / double(n - 1));
    }
    return 2.0 * mu / (mu * mu + 1.0 + sd + kEps);
}

// SSIM-style similarity between a prediction block and a gt block.
double region_ssim(const std::vector<float>& pred, const std::vector<float>& gt, int w, int y0, int y1,
                   int x0, int x1) {
    const long n = long(y1 - y0) * (x1 - x0);
    if (n <= 0) return 0.0;
    double mx = 0, my = 0;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            mx += pred[y * w + x];
            my += (gt[y * w + x] > 0.5f) ? 1.0 : 0.0;
        }
    mx /= double(n);
    my /= double(n);
    double sx = 0, sy = 0, sxy = 0;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            const double dp = pred[y * w + x] - mx;
            const double dg = ((gt[y * w + x] > 0.5f) ? 1.0 : 0.0) - my;
            sx += dp * dp;
            sy += dg * dg;
            sxy += dp * dg;
        }
    sx /= double(n) - 1 + kEps;
    sy /= double(n) - 1 + kEps;
    sxy /= double(n) - 1 + kEps;
    const double a = 4.0 * mx * my * sxy;
    const double b = (mx * mx + my * my) * (sx + sy);
    if (a != 0.0) return a / (b + kEps);
    return (b == 0.0) ? 1.0 : 0.0;
}

// Enhanced-alignment score of a binary map against gt, normalized by W*H.
double e_measure_binary(const std::vector<char>& fm, const std::vector<float>& gt, int h, int w) {
    const int n = h * w;
    long gt_pos = 0;
    for (int i = 0; i < n; ++i) gt_pos += (gt[i] > 0.5f);
    double sum = 0;
    if (gt_pos == 0) {
        for (int i = 0; i < n; ++i) sum += 1.0 - double(fm[i]);
    } else if (gt_pos == n) {
        for (int i = 0; i < n; ++i) sum += double(fm[i]);
    } else {
        double mu_f = 0, mu_g = 0;
        for (int i = 0; i < n; ++i) {
            mu_f += fm[i];
            mu_g += (gt[i] > 0.5f);
        }
        mu_f /= n;
        mu_g /= n;
        for (int i = 0; i < n; ++i) {
            const double af = double(fm[i]) - mu_f;
            const double ag = double(gt[i] > 0.5f ? 1.0 : 0.0) - mu_g;
            const double align = 2.0 * ag * af / (ag * ag + af * af + kEps);
            sum += (align + 1.0) * (align + 1.0) / 4.0;
        }
    }
    return sum / double(n);
}

}  // namespace

double metric_mae(const std::vector<float>& pred, const std::vector<float>& gt) {
    if (pred.size() != gt.size()) throw std::invalid_argument("mae: size mismatch");
    double s = 0;
    for (size_t i = 0; i < pred.size(); ++i) s += std::abs(double(pred[i]) - double(gt[i] > 0.5f ? 1.0 : 0.0));
    return s / double(pred.size());
}

std::pair<double, double> metric_f_measures(const std::vector<float>& pred, const std::vector<float>& gt, int h,
                                            int w) {
    check_sizes(pred, gt, h, w, "f_measures");
    double fx = 0;
    for (int k = 0; k <= 255; ++k) fx = std::max(fx, f_beta_at(pred, gt, k / 255.0, 0.3));
    return {fx, weighted_f(pred, gt, h, w)};
}

double metric_s_measure(const std::vector<float>& pred, const std::vector<float>& gt, int h, int w, double alpha) {
    check_sizes(pred, gt, h, w, "s_measure");
    const int n = h * w;
    long gt_pos = 0;
    for (int i = 0; i < n; ++i) gt_pos += (gt[i] > 0.5f);
    if (gt_pos == 0) return 1.0 - mean_of(pred);  // degenerate all-background gt
    if (gt_pos == n) return mean_of(pred);        // degenerate all-foreground gt

    // object term
    std::vector<double> fg_vals, bg_vals;
    for (int i = 0; i < n; ++i) {
        if (gt[i] > 0.5f)
            fg_vals.push_back(pred[i]);
        else
            bg_vals.push_back(1.0 - pred[i]);
    }
    const double u = double(gt_pos) / double(n);
    const double s_obj = u * s_object_score(fg_vals) + (1.0 - u) * s_object_score(bg_vals);

    // region term: split at the gt centroid (1-based rounding, as in the
    // reference implementation), weight by area
    double cx = 0, cy = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (gt[y * w + x] > 0.5f) {
                cx += x + 1;
                cy += y + 1;
            }
    const int gx = (int)std::llround(cx / double(gt_pos));
    const int gy = (int)std::llround(cy / double(gt_pos));
    const double wh = double(n);
    const double w1 = double(gx) * gy / wh;
    const double w2 = double(w - gx) * gy / wh;
    const double w3 = double(gx) * (h - gy) / wh;
    const double w4 = 1.0 - w1 - w2 - w3;
    const double s_reg = w1 * region_ssim(pred, gt, w, 0, gy, 0, gx) +
                         w2 * region_ssim(pred, gt, w, 0, gy, gx, w) +
                         w3 * region_ssim(pred, gt, w, gy, h, 0, gx) +
                         w4 * region_ssim(pred, gt, w, gy, h, gx, w);

    double s = alpha * s_obj + (1.0 - alpha) * s_reg;
    return std::min(1.0, std::max(0.0, s));
}

std::pair<double, double> metric_e_measures(const std::vector<float>& pred, const std::vector<float>& gt, int h,
                                            int w) {
    check_sizes(pred, gt, h, w, "e_measures");
    const int n = h * w;
    std::vector<char> fm(n);
    double ex = 0;
    for (int k = 0; k <= 255; ++k) {
        const double th = k / 255.0;  // strict >, as for the F sweep
        for (int i = 0; i < n; ++i) fm[i] = pred[i] > th;
        ex = std::max(ex, e_measure_binary(fm, gt, h, w));
    }
    // adaptive threshold is inclusive so a saturated prediction still counts
    double th = 2.0 * mean_of(pred);
    if (th > 1.0) th = 1.0;
    for (int i = 0; i < n; ++i) fm[i] = pred[i] >= th;
    return {ex, e_measure_binary(fm, gt, h, w)};
}

MetricsReport evaluate_one(const std::vector<float>& pred, const std::vector<float>& gt, int h, int w) {
    MetricsReport r;
    r.mae = metric_mae(pred, gt);
    auto [fx, fw] = metric_f_measures(pred, gt, h, w);
    r.fx = fx;
    r.fw = fw;
    r.sm = metric_s_measure(pred, gt, h, w);
    auto [emax, eadp] = metric_e_measures(pred, gt, h, w);
    r.ex = emax;
    r.ae = eadp;
    return r;
}

MetricsReport evaluate_report(const std::vector<std::vector<float>>& preds,
                              const std::vector<std::vector<float>>& gts, int h, int w) {
    if (preds.empty() || preds.size() != gts.size())
        throw std::invalid_argument("evaluate_report: need equal-length non-empty prediction/gt lists");
    MetricsReport acc;
    for (size_t i = 0; i < preds.size(); ++i) {
        MetricsReport r = evaluate_one(preds[i], gts[i], h, w);
        acc.mae += r.mae;
        acc.fx += r.fx;
        acc.fw += r.fw;
        acc.sm += r.sm;
        acc.ex += r.ex;
        acc.ae += r.ae;
    }
    const double inv = 1.0 / double(preds.size());
    acc.mae *= inv;
    acc.fx *= inv;
    acc.fw *= inv;
    acc.sm *= inv;
    acc.ex *= inv;
    acc.ae *= inv;
    return acc;
}

}  // namespace camo
