#pragma once

// Run configuration: plain-text `key = value` files with `#` comments.
// Unknown keys are errors. Every ablation axis is a switch here.

#include <cstdint>
#include <string>

#include "camoadapt/distill.hpp"
#include "camoadapt/encoder.hpp"
#include "camoadapt/prompt.hpp"

namespace camo {

struct Config {
    // encoder (desk-scale)
    int image_size = 64;
    int patch_size = 8;
    int embed_dim = 32;
    int heads = 4;
    int depth = 4;
    int adapter_dim = 8;
    int mlp_hidden = 64;
    std::string wavelet = "db2";  // db2 | haar

    // training
    double lambda = 0.9;
    int epochs = 60;
    double lr = 1e-4;
    double weight_decay = 0.01;
    uint64_t seed = 1;
    double box_jitter = 0.05;

    // ablation switches
    std::string adapter_form = "dual";  // dual | lora | rgb_only | none
    std::string dwt = "on";             // on | off
    std::string kd = "both";            // both | model_only | modal_only | reversed | off
    std::string prompt_mix = "full";    // full | cat_only | sum_only | single | off

    // synthetic data
    double camo_strength = 0.8;
    double texture_freq = 6.0;
    double depth_noise = 0.02;

    // paths
    std::string data_dir = "data";
    std::string out_dir = "out";

    EncoderConfig encoder_config() const;
    AdapterForm form() const;
    bool dwt_on() const { return dwt == "on"; }
    KdMode kd_mode() const;
    PromptMix mix_mode() const;
    bool dual_stream() const {
        AdapterForm f = form();
        return f == AdapterForm::dual || f == AdapterForm::lora;
    }
    void validate() const;
};

Config parse_config_text(const std::string& text);
Config load_config(const std::string& path);

}  // namespace camo
