#pragma once

// Binary netpbm I/O: P5 (8-bit gray) and P6 (8-bit RGB), maxval 255.
// Round-trips are byte-exact; masks binarize at >= 128.

#include <cstdint>
#include <string>
#include <vector>

namespace camo {

struct PnmImage {
    int w = 0, h = 0;
    int channels = 1;  // 1 = P5, 3 = P6
    std::vector<uint8_t> bytes;  // row-major, interleaved for P6
};

PnmImage read_pnm(const std::string& path);
void write_pnm(const std::string& path, const PnmImage& img);

// Float helpers: [0,1] maps to 0..255 (round, clamp).
PnmImage gray_to_pnm(const std::vector<float>& v, int h, int w);
PnmImage rgb_to_pnm(const std::vector<float>& v, int h, int w);  // v is [3 x h x w] planar
std::vector<float> pnm_to_gray(const PnmImage& img);             // [h x w] in [0,1]
std::vector<float> pnm_to_rgb_planar(const PnmImage& img);       // [3 x h x w] in [0,1]
std::vector<float> pnm_to_mask(const PnmImage& img);             // {0,1} at threshold 128

}  // namespace camo
