#include "camoadapt/netpbm.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace camo {

namespace {

// Header tokens may be separated by whitespace and '#' comments.
int read_header_int(std::istream& in, const std::string& path) {
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
        } else if (!isspace(c)) {
            break;
        }
    }
    if (c == EOF) throw std::runtime_error("netpbm: truncated header in " + path);
    if (!isdigit(c)) throw std::runtime_error("netpbm: malformed header in " + path);
    int v = c - '0';
    while ((c = in.get()) != EOF && isdigit(c)) v = v * 10 + (c - '0');
    return v;
}

uint8_t quantize(float v) {
    float x = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
    return (uint8_t)std::lround(x * 255.0f);
}

}  // namespace

PnmImage read_pnm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("netpbm: cannot open " + path);
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (m0 != 'P' || (m1 != '5' && m1 != '6'))
        throw std::runtime_error("netpbm: " + path + " is not a binary P5/P6 file");
    PnmImage img;
    img.channels = (m1 == '6') ? 3 : 1;
    img.w = read_header_int(in, path);
    img.h = read_header_int(in, path);
    const int maxval = read_header_int(in, path);
    if (maxval != 255)
        throw std::runtime_error("netpbm: unsupported maxval " + std::to_string(maxval) + " in " + path);
    if (img.w <= 0 || img.h <= 0) throw std::runtime_error("netpbm: bad dimensions in " + path);
    // the single whitespace after maxval was consumed by read_header_int
    const size_t need = size_t(img.w) * img.h * img.channels;
    img.bytes.resize(need);
    in.read(reinterpret_cast<char*>(img.bytes.data()), (std::streamsize)need);
    if ((size_t)in.gcount() != need)
        throw std::runtime_error("netpbm: truncated raster in " + path + " (expected " + std::to_string(need) +
                                 " bytes, got " + std::to_string(in.gcount()) + ")");
    return img;
}

void write_pnm(const std::string& path, const PnmImage& img) {
    if (img.channels != 1 && img.channels != 3) throw std::runtime_error("netpbm: channels must be 1 or 3");
    if (img.bytes.size() != size_t(img.w) * img.h * img.channels)
        throw std::runtime_error("netpbm: raster size mismatch writing " + path);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("netpbm: cannot write " + path);
    char header[64];
    const int n = std::snprintf(header, sizeof header, "P%c\n%d %d\n255\n", img.channels == 3 ? '6' : '5',
                                img.w, img.h);
    out.write(header, n);
    out.write(reinterpret_cast<const char*>(img.bytes.data()), (std::streamsize)img.bytes.size());
    if (!out) throw std::runtime_error("netpbm: write failed for " + path);
}

PnmImage gray_to_pnm(const std::vector<float>& v, int h, int w) {
    PnmImage img;
    img.w = w;
    img.h = h;
    img.channels = 1;
    img.bytes.resize(v.size());
    for (size_t i = 0; i < v.size(); ++i) img.bytes[i] = quantize(v[i]);
    return img;
}

PnmImage rgb_to_pnm(const std::vector<float>& v, int h, int w) {
    PnmImage img;
    img.w = w;
    img.h = h;
    img.channels = 3;
    img.bytes.resize(size_t(h) * w * 3);
    const size_t plane = size_t(h) * w;
    for (size_t p = 0; p < plane; ++p)
        for (int c = 0; c < 3; ++c) img.bytes[p * 3 + c] = quantize(v[c * plane + p]);
    return img;
}

std::vector<float> pnm_to_gray(const PnmImage& img) {
    if (img.channels != 1) throw std::runtime_error("netpbm: expected a P5 grayscale image");
    std::vector<float> v(img.bytes.size());
    for (size_t i = 0; i < v.size(); ++i) v[i] = img.bytes[i] / 255.0f;
    return v;
}

std::vector<float> pnm_to_rgb_planar(const PnmImage& img) {
    if (img.channels != 3) throw std::runtime_error("netpbm: expected a P6 color image");
    const size_t plane = size_t(img.w) * img.h;
    std::vector<float> v(plane * 3);
    for (size_t p = 0; p < plane; ++p)
        for (int c = 0; c < 3; ++c) v[c * plane + p] = img.bytes[p * 3 + c] / 255.0f;
    return v;
}

std::vector<float> pnm_to_mask(const PnmImage& img) {
    if (img.channels != 1) throw std::runtime_error("netpbm: expected a P5 mask image");
    std::vector<float> v(img.bytes.size());
    for (size_t i = 0; i < v.size(); ++i) v[i] = img.bytes[i] >= 128 ? 1.0f : 0.0f;
    return v;
}

}  // namespace camo
