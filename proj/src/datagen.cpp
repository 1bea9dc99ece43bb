#include "camoadapt/datagen.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "camoadapt/netpbm.hpp"
#include "camoadapt/rng.hpp"

namespace camo {

namespace {

// Quintic-fade value noise on an integer lattice; arithmetic only.
double value_noise(uint64_t seed, double x, double y) {
    const double fx = std::floor(x), fy = std::floor(y);
    const int64_t x0 = (int64_t)fx, y0 = (int64_t)fy;
    const double tx = x - fx, ty = y - fy;
    const double sx = tx * tx * tx * (tx * (tx * 6.0 - 15.0) + 10.0);
    const double sy = ty * ty * ty * (ty * (ty * 6.0 - 15.0) + 10.0);
    const double a = hash01(seed, x0, y0);
    const double b = hash01(seed, x0 + 1, y0);
    const double c = hash01(seed, x0, y0 + 1);
    const double d = hash01(seed, x0 + 1, y0 + 1);
    const double top = a + sx * (b - a);
    const double bot = c + sx * (d - c);
    return top + sy * (bot - top);
}

// Two octaves of band-limited texture in [0,1].
double texture(uint64_t seed, double u, double v, double freq) {
    const double n1 = value_noise(seed, u * freq, v * freq);
    const double n2 = value_noise(seed ^ 0x9e3779b97f4a7c15ULL, u * freq * 2.0, v * freq * 2.0);
    return 0.65 * n1 + 0.35 * n2;
}

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

// Blob field: ellipse plus low-frequency noise, thresholded at 1.
struct BlobShape {
    double cx, cy, rx, ry;
    uint64_t noise_seed;
};

bool inside_blob(const BlobShape& s, double x, double y, int size) {
    const double dx = (x - s.cx) / s.rx;
    const double dy = (y - s.cy) / s.ry;
    const double wobble = 0.8 * (value_noise(s.noise_seed, 3.0 * x / size, 3.0 * y / size) - 0.5);
    return dx * dx + dy * dy + wobble < 1.0;
}

}  // namespace

Box derive_box_from_mask(const std::vector<float>& gt, int h, int w) {
    int x0 = w, y0 = h, x1 = 0, y1 = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (gt[y * w + x] > 0.5f) {
                x0 = std::min(x0, x);
                y0 = std::min(y0, y);
                x1 = std::max(x1, x + 1);
                y1 = std::max(y1, y + 1);
            }
    if (x1 <= x0) throw std::invalid_argument("derive_box_from_mask: empty mask");
    return Box{x0, y0, x1, y1};
}

Sample generate_scene(const SceneSpec& spec, int size) {
    if (size < 16) throw std::invalid_argument("generate_scene: size must be >= 16");
    Sample s;
    s.h = s.w = size;
    s.id = "scene" + std::to_string(spec.seed);
    s.rgb.resize(3 * size * size);
    s.depth.resize(size * size);
    s.gt.assign(size * size, 0.0f);

    Rng rng(spec.seed);
    Rng shape_rng = rng.fork(1);

    // Object placement; reseed the wobble if thresholding empties the mask.
    BlobShape blob{};
    int fg_count = 0;
    for (int attempt = 0; attempt < 8 && fg_count == 0; ++attempt) {
        blob.cx = size * shape_rng.uniform(0.35, 0.65);
        blob.cy = size * shape_rng.uniform(0.35, 0.65);
        blob.rx = size * shape_rng.uniform(0.16, 0.30);
        blob.ry = size * shape_rng.uniform(0.16, 0.30);
        blob.noise_seed = shape_rng.next_u64();
        if (attempt == 7) blob.noise_seed = 0;  // plain ellipse fallback
        fg_count = 0;
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                const double ex = (x - blob.cx) / blob.rx, ey = (y - blob.cy) / blob.ry;
                const bool in = attempt == 7 ? (ex * ex + ey * ey < 1.0) : inside_blob(blob, x, y, size);
                s.gt[y * size + x] = in ? 1.0f : 0.0f;
                if (in) ++fg_count;
            }
    }
    if (fg_count == 0) throw std::runtime_error("generate_scene: object degenerated to empty");

    // Textures: per-channel background, a distinct foreground family shifted
    // in brightness, blended toward the background by the camouflage strength.
    const uint64_t bg_seed = rng.fork(2).next_u64();
    const uint64_t fg_seed = rng.fork(3).next_u64();
    const double shift_dir = (rng.fork(4).next_u64() & 1) ? 1.0 : -1.0;
    const double c = spec.camo_strength;
    for (int ch = 0; ch < 3; ++ch)
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                const double u = double(x) / size, v = double(y) / size;
                const double bg = 0.25 + 0.5 * texture(bg_seed + ch, u, v, spec.texture_freq);
                double px = bg;
                if (s.gt[y * size + x] > 0.5f) {
                    const double fg_tex = 0.25 + 0.5 * texture(fg_seed + ch, u, v, spec.texture_freq);
                    const double fg = clamp01(fg_tex + shift_dir * 0.35);
                    px = (1.0 - c) * fg + c * bg;
                }
                s.rgb[(ch * size + y) * size + x] = (float)clamp01(px);
            }

    // Depth: smooth background ramp, object raised, plus bounded noise.
    const uint64_t dn_seed = rng.fork(5).next_u64();
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            double d = 0.2 + 0.25 * (double(y) / size);
            if (s.gt[y * size + x] > 0.5f) d += spec.height_offset;
            d += spec.depth_noise * (2.0 * hash01(dn_seed, x, y) - 1.0);
            s.depth[y * size + x] = (float)clamp01(d);
        }

    s.box = derive_box_from_mask(s.gt, size, size);
    return s;
}

void write_sample(const std::string& dir, const Sample& s) {
    write_pnm(dir + "/" + s.id + "_rgb.ppm", rgb_to_pnm(s.rgb, s.h, s.w));
    write_pnm(dir + "/" + s.id + "_depth.pgm", gray_to_pnm(s.depth, s.h, s.w));
    write_pnm(dir + "/" + s.id + "_gt.pgm", gray_to_pnm(s.gt, s.h, s.w));
}

Sample read_sample(const std::string& dir, const std::string& id) {
    Sample s;
    s.id = id;
    PnmImage rgb = read_pnm(dir + "/" + id + "_rgb.ppm");
    PnmImage depth = read_pnm(dir + "/" + id + "_depth.pgm");
    PnmImage gt = read_pnm(dir + "/" + id + "_gt.pgm");
    if (rgb.w != depth.w || rgb.h != depth.h || rgb.w != gt.w || rgb.h != gt.h)
        throw std::runtime_error("dataset: size mismatch across files for id " + id);
    s.h = rgb.h;
    s.w = rgb.w;
    s.rgb = pnm_to_rgb_planar(rgb);
    s.depth = pnm_to_gray(depth);
    s.gt = pnm_to_mask(gt);
    s.box = derive_box_from_mask(s.gt, s.h, s.w);
    return s;
}

std::vector<std::string> read_index(const std::string& dir) {
    std::ifstream in(dir + "/index.txt");
    if (!in) throw std::runtime_error("dataset: cannot open " + dir + "/index.txt");
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n' || line.back() == ' ')) line.pop_back();
        if (!line.empty()) ids.push_back(line);
    }
    if (ids.empty()) throw std::runtime_error("dataset: empty index in " + dir);
    return ids;
}

std::vector<Sample> load_dataset(const std::string& dir) {
    std::vector<Sample> out;
    for (const auto& id : read_index(dir)) out.push_back(read_sample(dir, id));
    return out;
}

}  // namespace camo
