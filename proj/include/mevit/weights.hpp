#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mevit/config.hpp"
#include "mevit/tile.hpp"

namespace mevit {

// All tensors are symmetric int8 with power-of-two scales (value =
// int * 2^-shift), so every requantization in the engine is an exact
// round-to-nearest-even shift. The pinned shifts below keep random int8
// weights/activations inside int8 range at each boundary; they are part of
// the engine definition and are echoed in report headers.
struct QuantPlan {
    int act_shift = -8;       // residual-stream activations, scale 2^8
    int ln_shift = 5;         // layernorm outputs (unit variance), 2^-5
    int weight_shift = 6;     // all weight matrices, 2^-6
    int gamma_shift = 6;      // layernorm gain, 2^-6 (1.0 -> 64)
    int beta_shift = 6;
    int bias_shift = 3;       // mlp biases, 2^-3
    int qkv_shift = 0;        // q/k/v projections, 2^0
    int score_shift = 11;     // score accumulator -> base-2 exponent
    int mlp_hidden_shift = 0; // relu output feeding the second matmul

    // Requantization shift for a matmul accumulator: in_shift + w_shift -
    // out_shift bits are dropped with round-to-nearest-even.
    static int requant(int in_shift, int w_shift, int out_shift, int inner_dim = 0);
};

struct TensorInfo {
    std::string name;
    int rows = 0, cols = 0;
    int scale_shift = 0;      // value = int * 2^-scale_shift
    std::int64_t offset = 0;  // byte offset in the flat file
    std::int64_t bytes() const { return std::int64_t(rows) * cols; }
};

// Tensor table shared by the weight files, the DRAM log, and the audit.
std::vector<TensorInfo> manifest_for(const ModelConfig& model, const DerivedDims& dims,
                                     const QuantPlan& plan);

struct LayerWeights {
    TileMatrix wq, wk, wv;    // D x D (all heads fused, head h owns cols h*Dh..)
    TileMatrix wo;            // D x D
    TileMatrix w_hidden;      // D x D_mlp
    TileMatrix w_out;         // D_mlp x D
    std::vector<std::int8_t> b_hidden;  // D_mlp
    std::vector<std::int8_t> b_out;     // D
    std::vector<std::int8_t> ln1_gamma, ln1_beta;  // D
    std::vector<std::int8_t> ln2_gamma, ln2_beta;  // D
};

struct EncoderWeights {
    ModelConfig model;
    DerivedDims dims;
    QuantPlan plan;
    TileMatrix embed;                      // patch_dim x D
    TileMatrix pos_embed;                  // T x D (row 0 pairs with the class token)
    std::vector<std::int8_t> class_token;  // D
    std::vector<LayerWeights> layers;
    std::vector<std::int8_t> final_gamma, final_beta;

    std::vector<TensorInfo> manifest() const;
    std::int64_t param_bytes() const;
};

// Deterministic seeded generator (cross-platform mt19937 byte stream).
EncoderWeights generate_weights(const ModelConfig& model, const HardwareConfig& hw,
                                std::uint64_t seed);
TileMatrix generate_image_patches(const ModelConfig& model, const HardwareConfig& hw,
                                  std::uint64_t seed);

// Flat little-endian int8 blob + text manifest (name rows cols scale offset).
void save_weights(const EncoderWeights& w, const std::string& bin_path,
                  const std::string& manifest_path);
EncoderWeights load_weights(const ModelConfig& model, const HardwareConfig& hw,
                            const std::string& bin_path, const std::string& manifest_path);

}  // namespace mevit
