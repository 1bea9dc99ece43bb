#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "camoadapt/datagen.hpp"
#include "camoadapt/netpbm.hpp"
#include "camoadapt/rng.hpp"

using namespace camo;

namespace {

double mean_rgb_contrast(const Sample& s) {
    // |mean intensity inside - outside| averaged over channels
    double in = 0, out = 0;
    long nin = 0, nout = 0;
    const int n = s.h * s.w;
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < n; ++i) {
            if (s.gt[i] > 0.5f) {
                in += s.rgb[c * n + i];
                ++nin;
            } else {
                out += s.rgb[c * n + i];
                ++nout;
            }
        }
    return std::abs(in / nin - out / nout);
}

}  // namespace

TEST_CASE("generate_scene: determinism per seed, valid invariants") {
    SceneSpec spec;
    spec.seed = 77;
    Sample a = generate_scene(spec, 64);
    Sample b = generate_scene(spec, 64);
    CHECK(a.rgb == b.rgb);
    CHECK(a.depth == b.depth);
    CHECK(a.gt == b.gt);
    CHECK(a.box.x0 == b.box.x0);

    // nonempty mask, tight box
    long fg = 0;
    for (float v : a.gt) fg += v > 0.5f;
    CHECK(fg > 0);
    CHECK(a.box.valid(64, 64));

    CHECK_THROWS_AS(generate_scene(spec, 8), std::invalid_argument);
}

TEST_CASE("camouflage strength controls foreground/background contrast") {
    double hard = 0, easy = 0;
    for (int i = 0; i < 100; ++i) {
        SceneSpec spec;
        spec.seed = 1000 + i;
        spec.camo_strength = 0.0;
        easy += mean_rgb_contrast(generate_scene(spec, 32));
        spec.camo_strength = 1.0;
        hard += mean_rgb_contrast(generate_scene(spec, 32));
    }
    easy /= 100;
    hard /= 100;
    CHECK(easy > 0.2);   // c=0: object plainly visible
    CHECK(hard < 0.05);  // c=1: statistics match the background
}

TEST_CASE("depth is informative: object raised above the background ramp") {
    for (int i = 0; i < 20; ++i) {
        SceneSpec spec;
        spec.seed = 500 + i;
        Sample s = generate_scene(spec, 48);
        double din = 0, dout = 0;
        long nin = 0, nout = 0;
        for (int p = 0; p < s.h * s.w; ++p) {
            if (s.gt[p] > 0.5f) {
                din += s.depth[p];
                ++nin;
            } else {
                dout += s.depth[p];
                ++nout;
            }
        }
        const double sigma = spec.depth_noise / std::sqrt(3.0);
        CHECK(din / nin - dout / nout >= spec.height_offset - 3 * sigma - 0.15);  // ramp overlap margin
        CHECK(din / nin > dout / nout);
    }
}

TEST_CASE("derive_box_from_mask: tightness") {
    std::vector<float> m(8 * 8, 0.0f);
    m[3 * 8 + 5] = 1.0f;  // single pixel at (row 3, col 5)
    Box b = derive_box_from_mask(m, 8, 8);
    CHECK(b.x0 == 5);
    CHECK(b.y0 == 3);
    CHECK(b.x1 == 6);
    CHECK(b.y1 == 4);

    std::vector<float> full(8 * 8, 1.0f);
    Box fb = derive_box_from_mask(full, 8, 8);
    CHECK(fb.x0 == 0);
    CHECK(fb.y0 == 0);
    CHECK(fb.x1 == 8);
    CHECK(fb.y1 == 8);

    CHECK_THROWS_AS(derive_box_from_mask(std::vector<float>(64, 0.0f), 8, 8), std::invalid_argument);
}

TEST_CASE("derive_box_from_mask: fuzz - box contains all fg, shrinking loses one") {
    Rng rng(12);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<float> m(16 * 16, 0.0f);
        const int k = 1 + int(rng.next_u64() % 12);
        for (int i = 0; i < k; ++i) m[(rng.next_u64() % 16) * 16 + (rng.next_u64() % 16)] = 1.0f;
        Box b = derive_box_from_mask(m, 16, 16);
        bool on_left = false, on_right = false, on_top = false, on_bottom = false;
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x)
                if (m[y * 16 + x] > 0.5f) {
                    REQUIRE(x >= b.x0);
                    REQUIRE(x < b.x1);
                    REQUIRE(y >= b.y0);
                    REQUIRE(y < b.y1);
                    on_left = on_left || x == b.x0;
                    on_right = on_right || x == b.x1 - 1;
                    on_top = on_top || y == b.y0;
                    on_bottom = on_bottom || y == b.y1 - 1;
                }
        CHECK(on_left);
        CHECK(on_right);
        CHECK(on_top);
        CHECK(on_bottom);
    }
}

TEST_CASE("netpbm: byte-exact round trips") {
    namespace fs = std::filesystem;
    const std::string dir = (fs::temp_directory_path() / "camoadapt_pnm_test").string();
    fs::create_directories(dir);

    Rng rng(9);
    PnmImage img;
    img.w = 12;
    img.h = 7;
    img.channels = 3;
    img.bytes.resize(12 * 7 * 3);
    for (auto& b : img.bytes) b = uint8_t(rng.next_u64() & 0xff);
    write_pnm(dir + "/a.ppm", img);
    PnmImage back = read_pnm(dir + "/a.ppm");
    CHECK(back.w == 12);
    CHECK(back.h == 7);
    CHECK(back.channels == 3);
    CHECK(back.bytes == img.bytes);

    // P5 mask of {0,255} binarizes back to the original mask
    std::vector<float> mask(6 * 6, 0.0f);
    for (int i = 0; i < 36; ++i) mask[i] = (rng.next_u64() & 1) ? 1.0f : 0.0f;
    write_pnm(dir + "/m.pgm", gray_to_pnm(mask, 6, 6));
    auto mback = pnm_to_mask(read_pnm(dir + "/m.pgm"));
    CHECK(mback == mask);
}

TEST_CASE("netpbm: malformed inputs produce descriptive errors") {
    namespace fs = std::filesystem;
    const std::string dir = (fs::temp_directory_path() / "camoadapt_pnm_err").string();
    fs::create_directories(dir);

    {  // header arithmetic: 64x64 promises 12288 bytes; write one less
        std::ofstream f(dir + "/trunc.ppm", std::ios::binary);
        f << "P6\n64 64\n255\n";
        std::vector<char> raster(64 * 64 * 3 - 1, 7);
        f.write(raster.data(), (std::streamsize)raster.size());
    }
    CHECK_THROWS_WITH_AS(read_pnm(dir + "/trunc.ppm"), doctest::Contains("truncated"), std::runtime_error);

    {
        std::ofstream f(dir + "/maxval.pgm", std::ios::binary);
        f << "P5\n2 2\n65535\n";
        f.write("abcdABCD", 8);
    }
    CHECK_THROWS_WITH_AS(read_pnm(dir + "/maxval.pgm"), doctest::Contains("maxval"), std::runtime_error);

    {
        std::ofstream f(dir + "/magic.pgm", std::ios::binary);
        f << "P3\n2 2\n255\n0 0 0 0\n";
    }
    CHECK_THROWS_AS(read_pnm(dir + "/magic.pgm"), std::runtime_error);

    CHECK_THROWS_AS(read_pnm(dir + "/missing.pgm"), std::runtime_error);
}

TEST_CASE("sample round trip through the dataset layout") {
    namespace fs = std::filesystem;
    const std::string dir = (fs::temp_directory_path() / "camoadapt_ds_test").string();
    fs::create_directories(dir);

    SceneSpec spec;
    spec.seed = 4242;
    Sample s = generate_scene(spec, 32);
    s.id = "scene0000";
    write_sample(dir, s);
    std::ofstream(dir + "/index.txt") << "scene0000\n";

    auto loaded = load_dataset(dir);
    REQUIRE(loaded.size() == 1);
    CHECK(loaded[0].id == "scene0000");
    CHECK(loaded[0].gt == s.gt);  // masks survive the 8-bit round trip exactly
    CHECK(loaded[0].box.x0 == s.box.x0);
    CHECK(loaded[0].h == 32);
    // rgb/depth survive to within the 8-bit quantization step
    for (size_t i = 0; i < s.rgb.size(); ++i) CHECK(std::abs(loaded[0].rgb[i] - s.rgb[i]) <= 0.5f / 255.0f + 1e-6f);
}
