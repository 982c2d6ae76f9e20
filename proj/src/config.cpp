#include "mevit/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace mevit {

void ModelConfig::validate() const {
    if (model_dim <= 0 || num_heads <= 0 || num_layers <= 0)
        throw std::invalid_argument("model dims must be positive");
    if (model_dim % num_heads != 0)
        throw std::invalid_argument("invalid-config: model_dim % num_heads != 0");
    if (image_size <= 0 || patch_size <= 0 || image_size % patch_size != 0)
        throw std::invalid_argument("invalid-config: image_size % patch_size != 0");
    double hidden = mlp_ratio * model_dim;
    if (hidden <= 0 || hidden != std::floor(hidden))
        throw std::invalid_argument("invalid-config: mlp_ratio * model_dim not integral");
}

void HardwareConfig::validate() const {
    if (psys < 1) throw std::invalid_argument("invalid-config: psys < 1");
    if (clock_hz <= 0 || dram_bandwidth <= 0)
        throw std::invalid_argument("invalid-config: clock/bandwidth must be positive");
    if (bram_bank_depth <= 0)
        throw std::invalid_argument("invalid-config: bram_bank_depth must be positive");
}

DerivedDims derive_dims(const ModelConfig& model, const HardwareConfig& hw) {
    model.validate();
    hw.validate();
    DerivedDims d;
    int grid = model.image_size / model.patch_size;
    d.num_patches = grid * grid;
    d.tokens = d.num_patches + 1;
    d.head_dim = model.model_dim / model.num_heads;
    d.hidden_dim = int(model.mlp_ratio * model.model_dim);
    d.patch_dim = model.patch_size * model.patch_size * 3;
    d.row_blocks_tokens = row_blocks(d.tokens, hw.psys);
    d.col_blocks_dim = col_blocks(model.model_dim, hw.psys);
    return d;
}

const std::vector<ModelConfig>& builtin_models() {
    static const std::vector<ModelConfig> models = {
        {"ViT-B", 256, 16, 768, 12, 12, 4.0, 86'000'000},
        {"DeiT-B", 224, 16, 768, 12, 12, 4.0, 86'000'000},
        {"DeiT-S", 224, 16, 384, 6, 12, 4.0, 22'000'000},
        {"DeiT-T", 224, 16, 192, 3, 12, 4.0, 6'000'000},
    };
    return models;
}

static std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
}

const ModelConfig& find_builtin_model(const std::string& label) {
    for (const auto& m : builtin_models())
        if (lower(m.name) == lower(label)) return m;
    throw std::invalid_argument("unknown model label: " + label);
}

static std::map<std::string, std::string> parse_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            size_t b = s.find_first_not_of(" \t\r");
            size_t e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (!key.empty()) kv[key] = val;
    }
    return kv;
}

ModelConfig load_model_config(const std::string& path) {
    auto kv = parse_kv_file(path);
    ModelConfig m;
    if (kv.count("name")) m.name = kv["name"];
    if (kv.count("image_size")) m.image_size = std::stoi(kv["image_size"]);
    if (kv.count("patch_size")) m.patch_size = std::stoi(kv["patch_size"]);
    if (kv.count("model_dim")) m.model_dim = std::stoi(kv["model_dim"]);
    if (kv.count("num_heads")) m.num_heads = std::stoi(kv["num_heads"]);
    if (kv.count("num_layers")) m.num_layers = std::stoi(kv["num_layers"]);
    if (kv.count("mlp_ratio")) m.mlp_ratio = std::stod(kv["mlp_ratio"]);
    if (kv.count("param_count")) m.param_count = std::stoll(kv["param_count"]);
    m.validate();
    return m;
}

HardwareConfig load_hw_config(const std::string& path) {
    auto kv = parse_kv_file(path);
    HardwareConfig h;
    if (kv.count("psys")) h.psys = std::stoi(kv["psys"]);
    if (kv.count("clock_hz")) h.clock_hz = std::stod(kv["clock_hz"]);
    if (kv.count("dram_bandwidth")) h.dram_bandwidth = std::stod(kv["dram_bandwidth"]);
    if (kv.count("dsp_count")) h.dsp_count = std::stoi(kv["dsp_count"]);
    if (kv.count("bram36_count")) h.bram36_count = std::stoi(kv["bram36_count"]);
    if (kv.count("bram_bank_depth")) h.bram_bank_depth = std::stoi(kv["bram_bank_depth"]);
    h.validate();
    return h;
}

void save_model_config(const ModelConfig& m, const std::string& path) {
    std::ofstream out(path);
    out << "name = " << m.name << "\n"
        << "image_size = " << m.image_size << "\n"
        << "patch_size = " << m.patch_size << "\n"
        << "model_dim = " << m.model_dim << "\n"
        << "num_heads = " << m.num_heads << "\n"
        << "num_layers = " << m.num_layers << "\n"
        << "mlp_ratio = " << m.mlp_ratio << "\n"
        << "param_count = " << m.param_count << "\n";
}

void save_hw_config(const HardwareConfig& h, const std::string& path) {
    std::ofstream out(path);
    out << "psys = " << h.psys << "\n"
        << "clock_hz = " << h.clock_hz << "\n"
        << "dram_bandwidth = " << h.dram_bandwidth << "\n"
        << "dsp_count = " << h.dsp_count << "\n"
        << "bram36_count = " << h.bram36_count << "\n"
        << "bram_bank_depth = " << h.bram_bank_depth << "\n";
}

}  // namespace mevit
