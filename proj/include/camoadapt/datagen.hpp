#pragma once

// Synthetic camouflage scenes: band-limited value-noise textures, a blob
// object whose texture is blended toward the background by the camouflage
// strength, and a correlated depth map (larger = nearer). The raster path is
// integer-hash based, so a seed reproduces bit-identical scenes anywhere.

#include <cstdint>
#include <string>
#include <vector>

#include "camoadapt/prompt.hpp"

namespace camo {

struct SceneSpec {
    uint64_t seed = 1;
    double texture_freq = 6.0;    // base lattice cells across the image
    double camo_strength = 0.8;   // 1 = foreground texture matches background
    double depth_noise = 0.02;    // uniform +- level on the depth map
    double height_offset = 0.3;   // object raise in the depth map
};

struct Sample {
    int h = 0, w = 0;
    std::vector<float> rgb;    // [3 x h x w] planar, [0,1]
    std::vector<float> depth;  // [h x w], [0,1]
    std::vector<float> gt;     // [h x w], {0,1}, at least one foreground pixel
    Box box;                   // tight bounding box of gt
    std::string id;
};

Sample generate_scene(const SceneSpec& spec, int size);
Box derive_box_from_mask(const std::vector<float>& gt, int h, int w);

// Dataset directory layout: <id>_rgb.ppm, <id>_depth.pgm, <id>_gt.pgm and an
// index.txt with one id per line.
void write_sample(const std::string& dir, const Sample& s);
Sample read_sample(const std::string& dir, const std::string& id);
std::vector<std::string> read_index(const std::string& dir);
std::vector<Sample> load_dataset(const std::string& dir);

}  // namespace camo
