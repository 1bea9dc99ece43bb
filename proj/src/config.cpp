#include "camoadapt/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace camo {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

void check_choice(const std::string& key, const std::string& v, std::initializer_list<const char*> allowed) {
    for (const char* a : allowed)
        if (v == a) return;
    std::string msg = "config: invalid value '" + v + "' for " + key + " (expected one of:";
    for (const char* a : allowed) msg += std::string(" ") + a;
    throw std::invalid_argument(msg + ")");
}

}  // namespace

EncoderConfig Config::encoder_config() const {
    EncoderConfig e;
    e.image_size = image_size;
    e.patch_size = patch_size;
    e.embed_dim = embed_dim;
    e.heads = heads;
    e.depth = depth;
    e.adapter_dim = adapter_dim;
    e.mlp_hidden = mlp_hidden;
    e.wavelet = (wavelet == "haar") ? WaveletKind::haar : WaveletKind::db2;
    return e;
}

AdapterForm Config::form() const {
    if (adapter_form == "dual") return AdapterForm::dual;
    if (adapter_form == "lora") return AdapterForm::lora;
    if (adapter_form == "rgb_only") return AdapterForm::rgb_only;
    return AdapterForm::none;
}

KdMode Config::kd_mode() const {
    if (kd == "both") return KdMode::both;
    if (kd == "model_only") return KdMode::model_only;
    if (kd == "modal_only") return KdMode::modal_only;
    if (kd == "reversed") return KdMode::reversed;
    return KdMode::off;
}

PromptMix Config::mix_mode() const {
    if (prompt_mix == "full") return PromptMix::full;
    if (prompt_mix == "cat_only") return PromptMix::cat_only;
    if (prompt_mix == "sum_only") return PromptMix::sum_only;
    if (prompt_mix == "single") return PromptMix::single;
    return PromptMix::off;
}

void Config::validate() const {
    encoder_config().validate();
    check_choice("wavelet", wavelet, {"db2", "haar"});
    check_choice("adapter_form", adapter_form, {"dual", "lora", "rgb_only", "none"});
    check_choice("dwt", dwt, {"on", "off"});
    check_choice("kd", kd, {"both", "model_only", "modal_only", "reversed", "off"});
    check_choice("prompt_mix", prompt_mix, {"full", "cat_only", "sum_only", "single", "off"});
    if (lambda < 0.0 || lambda > 1.0) throw std::invalid_argument("config: lambda must be in [0,1]");
    if (epochs < 0) throw std::invalid_argument("config: epochs must be >= 0");
    if (lr <= 0.0) throw std::invalid_argument("config: lr must be > 0");
}

Config parse_config_text(const std::string& text) {
    Config c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        try {
            if (key == "image_size") c.image_size = std::stoi(val);
            else if (key == "patch_size") c.patch_size = std::stoi(val);
            else if (key == "embed_dim") c.embed_dim = std::stoi(val);
            else if (key == "heads") c.heads = std::stoi(val);
            else if (key == "depth") c.depth = std::stoi(val);
            else if (key == "adapter_dim") c.adapter_dim = std::stoi(val);
            else if (key == "mlp_hidden") c.mlp_hidden = std::stoi(val);
            else if (key == "wavelet") c.wavelet = val;
            else if (key == "lambda") c.lambda = std::stod(val);
            else if (key == "epochs") c.epochs = std::stoi(val);
            else if (key == "lr") c.lr = std::stod(val);
            else if (key == "weight_decay") c.weight_decay = std::stod(val);
            else if (key == "seed") c.seed = std::stoull(val);
            else if (key == "box_jitter") c.box_jitter = std::stod(val);
            else if (key == "adapter_form") c.adapter_form = val;
            else if (key == "dwt") c.dwt = val;
            else if (key == "kd") c.kd = val;
            else if (key == "prompt_mix") c.prompt_mix = val;
            else if (key == "camo_strength") c.camo_strength = std::stod(val);
            else if (key == "texture_freq") c.texture_freq = std::stod(val);
            else if (key == "depth_noise") c.depth_noise = std::stod(val);
            else if (key == "data_dir") c.data_dir = val;
            else if (key == "out_dir") c.out_dir = val;
            else
                throw std::invalid_argument("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw;
        } catch (const std::exception&) {
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": bad value '" + val +
                                        "' for key '" + key + "'");
        }
    }
    c.validate();
    return c;
}

Config load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str());
}

}  // namespace camo
