#pragma once

// Test-only brute-force transcription of the six evaluation measures,
// written directly from the cited formulas over explicit 2-D matrices. Kept
// deliberately independent of src/metrics.cpp: no shared helpers, different
// data layout, straight-line evaluation. Shared conventions (documented in
// the library): row-major first-minimum distance ties, zero-padded Gaussian,
// E-measure normalized by W*H.

#include <cmath>
#include <vector>

namespace oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat to_mat(const std::vector<float>& v, int h, int w) {
    Mat m(h, std::vector<double>(w));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) m[y][x] = v[y * w + x];
    return m;
}

inline double matmean(const Mat& m) {
    double s = 0;
    int n = 0;
    for (const auto& row : m)
        for (double v : row) {
            s += v;
            ++n;
        }
    return s / n;
}

inline double o_mae(const Mat& pred, const Mat& gt) {
    double s = 0;
    int n = 0;
    for (size_t y = 0; y < pred.size(); ++y)
        for (size_t x = 0; x < pred[0].size(); ++x) {
            s += std::fabs(pred[y][x] - (gt[y][x] > 0.5 ? 1.0 : 0.0));
            ++n;
        }
    return s / n;
}

inline double o_fmax(const Mat& pred, const Mat& gt) {
    const double beta2 = 0.3;
    double best = 0;
    for (int k = 0; k <= 255; ++k) {
        const double th = k / 255.0;
        double tp = 0, fp = 0, fn = 0;
        for (size_t y = 0; y < pred.size(); ++y)
            for (size_t x = 0; x < pred[0].size(); ++x) {
                const bool p = pred[y][x] > th;
                const bool g = gt[y][x] > 0.5;
                if (p && g) tp += 1;
                if (p && !g) fp += 1;
                if (!p && g) fn += 1;
            }
        const double prec = tp + fp > 0 ? tp / (tp + fp) : 0.0;
        const double rec = tp + fn > 0 ? tp / (tp + fn) : 0.0;
        if (beta2 * prec + rec > 0) {
            const double f = (1 + beta2) * prec * rec / (beta2 * prec + rec);
            if (f > best) best = f;
        }
    }
    return best;
}

inline double o_fweighted(const Mat& pred, const Mat& gt) {
    const double EPS = 2.220446049250313e-16;
    const int h = (int)pred.size(), w = (int)pred[0].size();
    int npos = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) npos += gt[y][x] > 0.5;
    if (npos == 0) return 0.0;

    Mat E(h, std::vector<double>(w));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) E[y][x] = std::fabs(pred[y][x] - (gt[y][x] > 0.5 ? 1.0 : 0.0));

    // bwdist: nearest foreground pixel, exact euclidean, first minimum in
    // row-major order
    Mat D(h, std::vector<double>(w, 0.0));
    std::vector<std::vector<std::pair<int, int>>> idx(h, std::vector<std::pair<int, int>>(w));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (gt[y][x] > 0.5) {
                idx[y][x] = {y, x};
                continue;
            }
            double best = 1e300;
            std::pair<int, int> bi{0, 0};
            bool found = false;
            for (int yy = 0; yy < h; ++yy)
                for (int xx = 0; xx < w; ++xx) {
                    if (gt[yy][xx] <= 0.5) continue;
                    const double d2 = double(yy - y) * (yy - y) + double(xx - x) * (xx - x);
                    if (!found || d2 < best) {
                        best = d2;
                        bi = {yy, xx};
                        found = true;
                    }
                }
            D[y][x] = std::sqrt(best);
            idx[y][x] = bi;
        }

    Mat Et = E;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (gt[y][x] <= 0.5) Et[y][x] = E[idx[y][x].first][idx[y][x].second];

    // fspecial('gaussian', 7, 5), normalized; imfilter zero padding
    double K[7][7], ks = 0;
    for (int u = 0; u < 7; ++u)
        for (int v = 0; v < 7; ++v) {
            K[u][v] = std::exp(-((u - 3) * (u - 3) + (v - 3) * (v - 3)) / 50.0);
            ks += K[u][v];
        }
    Mat EA(h, std::vector<double>(w, 0.0));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double a = 0;
            for (int u = 0; u < 7; ++u)
                for (int v = 0; v < 7; ++v) {
                    const int yy = y + u - 3, xx = x + v - 3;
                    if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                    a += K[u][v] / ks * Et[yy][xx];
                }
            EA[y][x] = a;
        }

    Mat MIN_E_EA = E;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (gt[y][x] > 0.5 && EA[y][x] < E[y][x]) MIN_E_EA[y][x] = EA[y][x];

    Mat B(h, std::vector<double>(w, 1.0));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (gt[y][x] <= 0.5) B[y][x] = 2.0 - std::exp(std::log(1.0 - 0.5) / 5.0 * D[y][x]);

    double ew_fg = 0, ew_bg = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double ew = MIN_E_EA[y][x] * B[y][x];
            if (gt[y][x] > 0.5)
                ew_fg += ew;
            else
                ew_bg += ew;
        }
    const double TPw = npos - ew_fg;
    const double FPw = ew_bg;
    const double R = 1.0 - ew_fg / npos;
    const double P = TPw / (EPS + TPw + FPw);
    return 2.0 * R * P / (EPS + R + P);
}

namespace detail {

inline double object_term(const Mat& vals, const Mat& region_mask) {
    const double EPS = 2.220446049250313e-16;
    double mu = 0;
    int n = 0;
    for (size_t y = 0; y < vals.size(); ++y)
        for (size_t x = 0; x < vals[0].size(); ++x)
            if (region_mask[y][x] > 0.5) {
                mu += vals[y][x];
                ++n;
            }
    if (n == 0) return 0.0;
    mu /= n;
    double sd = 0;
    if (n > 1) {
        for (size_t y = 0; y < vals.size(); ++y)
            for (size_t x = 0; x < vals[0].size(); ++x)
                if (region_mask[y][x] > 0.5) sd += (vals[y][x] - mu) * (vals[y][x] - mu);
        sd = std::sqrt(sd / (n - 1));
    }
    return 2.0 * mu / (mu * mu + 1.0 + sd + EPS);
}

inline double ssim_block(const Mat& pred, const Mat& gt, int y0, int y1, int x0, int x1) {
    const double EPS = 2.220446049250313e-16;
    const long n = long(y1 - y0) * (x1 - x0);
    if (n <= 0) return 0.0;
    double mx = 0, my = 0;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            mx += pred[y][x];
            my += gt[y][x] > 0.5 ? 1.0 : 0.0;
        }
    mx /= n;
    my /= n;
    double vx = 0, vy = 0, vxy = 0;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            const double a = pred[y][x] - mx;
            const double b = (gt[y][x] > 0.5 ? 1.0 : 0.0) - my;
            vx += a * a;
            vy += b * b;
            vxy += a * b;
        }
    vx /= n - 1 + EPS;
    vy /= n - 1 + EPS;
    vxy /= n - 1 + EPS;
    const double alpha = 4.0 * mx * my * vxy;
    const double beta = (mx * mx + my * my) * (vx + vy);
    if (alpha != 0.0) return alpha / (beta + EPS);
    return beta == 0.0 ? 1.0 : 0.0;
}

}  // namespace detail

inline double o_smeasure(const Mat& pred, const Mat& gt) {
    const int h = (int)pred.size(), w = (int)pred[0].size();
    double y = 0;
    for (const auto& row : gt)
        for (double v : row) y += (v > 0.5);
    y /= double(h) * w;
    if (y == 0.0) return 1.0 - matmean(pred);
    if (y == 1.0) return matmean(pred);

    // S_object
    Mat fgv = pred, bgv = pred, fgm = gt, bgm = gt;
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            bgv[i][j] = 1.0 - pred[i][j];
            bgm[i][j] = gt[i][j] > 0.5 ? 0.0 : 1.0;
        }
    const double so = y * detail::object_term(fgv, fgm) + (1 - y) * detail::object_term(bgv, bgm);

    // centroid, 1-based rounding
    double cx = 0, cy = 0, tot = 0;
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            if (gt[i][j] > 0.5) {
                cx += j + 1;
                cy += i + 1;
                tot += 1;
            }
    const int X = (int)std::round(cx / tot);
    const int Y = (int)std::round(cy / tot);
    const double area = double(h) * w;
    const double w1 = double(X) * Y / area;
    const double w2 = double(w - X) * Y / area;
    const double w3 = double(X) * (h - Y) / area;
    const double w4 = 1 - w1 - w2 - w3;
    const double sr = w1 * detail::ssim_block(pred, gt, 0, Y, 0, X) + w2 * detail::ssim_block(pred, gt, 0, Y, X, w) +
                      w3 * detail::ssim_block(pred, gt, Y, h, 0, X) + w4 * detail::ssim_block(pred, gt, Y, h, X, w);

    double s = 0.5 * so + 0.5 * sr;
    if (s < 0) s = 0;
    if (s > 1) s = 1;
    return s;
}

inline double o_em_binary(const Mat& fm, const Mat& gt) {
    const double EPS = 2.220446049250313e-16;
    const int h = (int)fm.size(), w = (int)fm[0].size();
    double gsum = 0;
    for (const auto& row : gt)
        for (double v : row) gsum += (v > 0.5);
    Mat enh(h, std::vector<double>(w));
    if (gsum == 0) {
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) enh[i][j] = 1.0 - fm[i][j];
    } else if (gsum == double(h) * w) {
        enh = fm;
    } else {
        const double mf = matmean(fm);
        double mg = gsum / (double(h) * w);
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                const double af = fm[i][j] - mf;
                const double ag = (gt[i][j] > 0.5 ? 1.0 : 0.0) - mg;
                const double align = 2.0 * ag * af / (ag * ag + af * af + EPS);
                enh[i][j] = (align + 1.0) * (align + 1.0) / 4.0;
            }
    }
    double s = 0;
    for (const auto& row : enh)
        for (double v : row) s += v;
    return s / (double(h) * w);
}

inline double o_emax(const Mat& pred, const Mat& gt) {
    const int h = (int)pred.size(), w = (int)pred[0].size();
    double best = 0;
    for (int k = 0; k <= 255; ++k) {
        Mat fm(h, std::vector<double>(w));
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) fm[i][j] = pred[i][j] > k / 255.0 ? 1.0 : 0.0;
        best = std::max(best, o_em_binary(fm, gt));
    }
    return best;
}

inline double o_eadaptive(const Mat& pred, const Mat& gt) {
    const int h = (int)pred.size(), w = (int)pred[0].size();
    double th = 2.0 * matmean(pred);
    if (th > 1.0) th = 1.0;
    Mat fm(h, std::vector<double>(w));
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) fm[i][j] = pred[i][j] >= th ? 1.0 : 0.0;
    return o_em_binary(fm, gt);
}

}  // namespace oracle
