#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mevit {

// ViT model hyperparameters. All four builtin variants share patch size 16
// and an MLP expansion of 4; both are fixed here and surfaced in reports.
struct ModelConfig {
    std::string name;
    int image_size = 224;           // square input, pixels
    int patch_size = 16;            // pixels
    int model_dim = 768;            // D
    int num_heads = 12;             // h
    int num_layers = 12;            // L
    double mlp_ratio = 4.0;         // hidden dim = mlp_ratio * D
    std::int64_t param_count = 0;   // informational, 8-bit parameters

    void validate() const;          // throws std::invalid_argument
};

// Token/head/block geometry derived from a model + systolic array size.
struct DerivedDims {
    int num_patches = 0;            // N = (image/patch)^2
    int tokens = 0;                 // T = N + 1 (class token)
    int head_dim = 0;               // D_h = D / h
    int hidden_dim = 0;             // D_mlp = mlp_ratio * D
    int patch_dim = 0;              // flattened patch length, patch^2 * 3
    int row_blocks_tokens = 0;      // ceil(T / P_SYS)
    int col_blocks_dim = 0;         // ceil(D / P_SYS)
};

struct HardwareConfig {
    int psys = 32;                          // systolic array lanes
    double clock_hz = 300e6;
    double dram_bandwidth = 77e9;           // bytes/s
    int dsp_count = 5867;                   // device budget
    int bram36_count = 1766;                // device budget
    int bram_bank_depth = 4096;             // int8 entries per 36k bank
    int packing_factor = 2;                 // multiplies per DSP

    void validate() const;
    // One systolic array consumes psys^2 DSPs and retires psys * 2*psys
    // multiplies per cycle with packing.
    std::int64_t dsp_used() const { return std::int64_t(psys) * psys; }
    std::int64_t macs_per_cycle() const { return std::int64_t(psys) * 2 * psys; }
};

// Block helpers shared by every module.
inline int row_blocks(int n, int p) { return (n + p - 1) / p; }
inline int col_blocks(int n, int p) { return (n + p - 1) / p; }
inline int col_pairs(int n, int p) { return (n + 2 * p - 1) / (2 * p); }
inline int padded(int n, int p) { return row_blocks(n, p) * p; }

DerivedDims derive_dims(const ModelConfig& model, const HardwareConfig& hw);

const std::vector<ModelConfig>& builtin_models();
// Case-insensitive lookup by label ("deit-b", "ViT-B", ...). Throws on miss.
const ModelConfig& find_builtin_model(const std::string& label);

// key = value config files, one field per line, '#' comments.
ModelConfig load_model_config(const std::string& path);
HardwareConfig load_hw_config(const std::string& path);
void save_model_config(const ModelConfig& m, const std::string& path);
void save_hw_config(const HardwareConfig& h, const std::string& path);

}  // namespace mevit
