#pragma once

// Drivers behind the CLI subcommands: synthetic dataset generation, the
// training loop, dataset evaluation, single-image inference and the
// gradient-check suite.

#include <ostream>
#include <string>
#include <vector>

#include "camoadapt/checkpoint.hpp"
#include "camoadapt/config.hpp"
#include "camoadapt/datagen.hpp"
#include "camoadapt/metrics.hpp"
#include "camoadapt/model.hpp"

namespace camo {

// ---- shared helpers ----

Value<float> rgb_to_value(const Sample& s);
// Depth is single-channel; it enters the shared patch embed replicated to 3.
Value<float> depth_to_value(const Sample& s);

struct SoftPrediction {
    std::vector<float> rgb;    // [h x w] in (0,1)
    std::vector<float> depth;  // empty in single-stream configurations
    std::vector<float> fused;  // {0,1}
};

// No-grad forward on one sample with its tight (unperturbed) gt box.
SoftPrediction predict(const Model<float>& m, const Sample& s);

// ---- subcommand drivers ----

void run_synth(const Config& cfg, int count, const std::string& dir);

struct TrainResult {
    int steps = 0;
    float first_loss = 0.0f;
    float final_loss = 0.0f;
    std::string ckpt_step0;
    std::string ckpt_final;
    std::string loss_csv;
};

TrainResult run_train(const Config& cfg, std::ostream& log);

struct EvalResult {
    MetricsReport mean;
    std::vector<std::string> ids;
    std::vector<MetricsReport> per_image;
    std::string csv_path;
};

// stream: "rgb" | "depth" | "fused"; threads shard images, merged in id order.
EvalResult run_eval(const Config& cfg, const std::string& ckpt_path, const std::string& stream, int threads,
                    std::ostream& log);

void run_infer(const Config& cfg, const std::string& ckpt_path, const std::string& rgb_path,
               const std::string& depth_path, const std::string& out_path, bool soft, const Box* box,
               std::ostream& log);

struct GradCheckRow {
    std::string name;
    double err = 0;
    double tol = 1e-4;
    bool pass = false;
};

// Criterion suite, run in 64-bit: adapter, encoder block, KL composite,
// prompt mixer, two-way layer, mask decoder, DiceCE.
std::vector<GradCheckRow> gradcheck_suite();
bool run_gradcheck(std::ostream& os);

}  // namespace camo
