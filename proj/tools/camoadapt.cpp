// camoadapt: dual-stream adapter fine-tuning on synthetic camouflage scenes.
// Subcommands: synth | train | eval | infer | gradcheck.
// Exit codes: 0 success, 1 usage error, 2 data/checkpoint error.

#include <cstring>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "camoadapt/config.hpp"
#include "camoadapt/pipeline.hpp"

using namespace camo;

namespace {

void print_usage(std::ostream& os) {
    os << "Usage: camoadapt <subcommand> [options]\n"
          "\n"
          "Subcommands:\n"
          "  synth      generate a synthetic dataset (--synth N required)\n"
          "  train      train on the dataset in data_dir, write checkpoints + loss.csv\n"
          "  eval       score a checkpoint on data_dir, write metrics.csv\n"
          "  infer      predict one scene: infer <rgb.ppm> <depth.pgm> <out.pgm>\n"
          "  gradcheck  run the finite-difference suite over the model composites\n"
          "\n"
          "Options:\n"
          "  --config PATH       config file (key = value lines; defaults used if omitted)\n"
          "  --seed N            override the config seed\n"
          "  --out DIR           override out_dir (synth: target dataset dir)\n"
          "  --data DIR          override data_dir\n"
          "  --stream S          eval stream: rgb | depth | fused (default fused)\n"
          "  --synth N           scene count (synth; train generates data_dir if given)\n"
          "  --ckpt PATH         checkpoint for eval/infer (default <out_dir>/checkpoint_final.smcd)\n"
          "  --threads N         eval worker threads (default 1)\n"
          "  --box X0,Y0,X1,Y1   infer box prompt (default: full frame)\n"
          "  --soft              infer: also write the pre-threshold maps\n"
          "  --lambda V          override the loss balance lambda\n"
          "  --epochs N          override the epoch count\n";
}

struct Args {
    std::string subcommand;
    std::string config_path;
    std::optional<uint64_t> seed;
    std::optional<std::string> out_dir, data_dir;
    std::string stream = "fused";
    std::string ckpt;
    int synth_n = 0;
    int threads = 1;
    bool soft = false;
    std::optional<Box> box;
    std::optional<double> lambda;
    std::optional<int> epochs;
    std::vector<std::string> positional;
};

bool parse_box(const std::string& s, Box& b) {
    return std::sscanf(s.c_str(), "%d,%d,%d,%d", &b.x0, &b.y0, &b.x1, &b.y1) == 4;
}

// returns false on a usage error
bool parse_args(int argc, char** argv, Args& a) {
    if (argc < 2) return false;
    a.subcommand = argv[1];
    for (int i = 2; i < argc; ++i) {
        const std::string arg = argv[i];
        auto next = [&](const char* what) -> const char* {
            if (i + 1 >= argc) {
                std::cerr << "camoadapt: " << what << " expects a value\n";
                return nullptr;
            }
            return argv[++i];
        };
        if (arg == "--config") {
            const char* v = next("--config");
            if (!v) return false;
            a.config_path = v;
        } else if (arg == "--seed") {
            const char* v = next("--seed");
            if (!v) return false;
            a.seed = std::stoull(v);
        } else if (arg == "--out") {
            const char* v = next("--out");
            if (!v) return false;
            a.out_dir = v;
        } else if (arg == "--data") {
            const char* v = next("--data");
            if (!v) return false;
            a.data_dir = v;
        } else if (arg == "--stream") {
            const char* v = next("--stream");
            if (!v) return false;
            a.stream = v;
        } else if (arg == "--synth") {
            const char* v = next("--synth");
            if (!v) return false;
            a.synth_n = std::stoi(v);
        } else if (arg == "--ckpt") {
            const char* v = next("--ckpt");
            if (!v) return false;
            a.ckpt = v;
        } else if (arg == "--threads") {
            const char* v = next("--threads");
            if (!v) return false;
            a.threads = std::stoi(v);
        } else if (arg == "--box") {
            const char* v = next("--box");
            if (!v) return false;
            Box b;
            if (!parse_box(v, b)) {
                std::cerr << "camoadapt: --box expects X0,Y0,X1,Y1\n";
                return false;
            }
            a.box = b;
        } else if (arg == "--soft") {
            a.soft = true;
        } else if (arg == "--lambda") {
            const char* v = next("--lambda");
            if (!v) return false;
            a.lambda = std::stod(v);
        } else if (arg == "--epochs") {
            const char* v = next("--epochs");
            if (!v) return false;
            a.epochs = std::stoi(v);
        } else if (arg == "--help" || arg == "-h") {
            print_usage(std::cout);
            std::exit(0);
        } else if (arg.rfind("--", 0) == 0) {
            std::cerr << "camoadapt: unknown option " << arg << "\n";
            return false;
        } else {
            a.positional.push_back(arg);
        }
    }
    return true;
}

Config make_config(const Args& a) {
    Config cfg = a.config_path.empty() ? Config{} : load_config(a.config_path);
    if (a.seed) cfg.seed = *a.seed;
    if (a.out_dir) cfg.out_dir = *a.out_dir;
    if (a.data_dir) cfg.data_dir = *a.data_dir;
    if (a.lambda) cfg.lambda = *a.lambda;
    if (a.epochs) cfg.epochs = *a.epochs;
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    Args a;
    if (!parse_args(argc, argv, a)) {
        print_usage(std::cerr);
        return 1;
    }

    try {
        if (a.subcommand == "synth") {
            if (a.synth_n <= 0) {
                std::cerr << "camoadapt: synth requires --synth N\n";
                return 1;
            }
            Config cfg = make_config(a);
            const std::string dir = a.out_dir ? *a.out_dir : cfg.data_dir;
            run_synth(cfg, a.synth_n, dir);
            std::cout << "synth: wrote " << a.synth_n << " scenes to " << dir << "\n";
            return 0;
        }
        if (a.subcommand == "train") {
            Config cfg = make_config(a);
            if (a.synth_n > 0) run_synth(cfg, a.synth_n, cfg.data_dir);
            TrainResult r = run_train(cfg, std::cout);
            std::cout << "train: wrote " << r.ckpt_final << " and " << r.loss_csv << "\n";
            return 0;
        }
        if (a.subcommand == "eval") {
            Config cfg = make_config(a);
            const std::string ckpt = a.ckpt.empty() ? cfg.out_dir + "/checkpoint_final.smcd" : a.ckpt;
            run_eval(cfg, ckpt, a.stream, a.threads, std::cout);
            std::cout << "eval: wrote " << cfg.out_dir + "/metrics.csv" << "\n";
            return 0;
        }
        if (a.subcommand == "infer") {
            if (a.positional.size() != 3) {
                std::cerr << "camoadapt: infer expects <rgb.ppm> <depth.pgm> <out.pgm>\n";
                return 1;
            }
            Config cfg = make_config(a);
            const std::string ckpt = a.ckpt.empty() ? cfg.out_dir + "/checkpoint_final.smcd" : a.ckpt;
            run_infer(cfg, ckpt, a.positional[0], a.positional[1], a.positional[2], a.soft,
                      a.box ? &*a.box : nullptr, std::cout);
            return 0;
        }
        if (a.subcommand == "gradcheck") {
            return run_gradcheck(std::cout) ? 0 : 2;
        }
        std::cerr << "camoadapt: unknown subcommand '" << a.subcommand << "'\n";
        print_usage(std::cerr);
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "camoadapt: " << e.what() << "\n";
        return 2;
    }
}
