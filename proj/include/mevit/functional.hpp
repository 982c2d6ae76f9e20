#pragma once

#include "mevit/config.hpp"
#include "mevit/numerics.hpp"
#include "mevit/tile.hpp"
#include "mevit/weights.hpp"

namespace mevit {

// Quantized encoder math on int8 tensors with power-of-two scales. Every
// operation here is exact integer arithmetic, so any block traversal of the
// same sums is bit-identical; the schedule engine replays these kernels in
// hardware order and compares against this straight-line path.

// Requantize a 32-bit accumulator to int8 via round-to-nearest-even shift.
TileMatrix requant_matrix(const TileAccumulator& acc, int shift, int psys);

// out = clamp(a + b), both operands on the same scale.
TileMatrix saturating_add(const TileMatrix& a, const TileMatrix& b);

// Row-wise two-pass layernorm of an int8 matrix.
TileMatrix layernorm_matrix(const TileMatrix& x, const std::vector<std::int8_t>& gamma,
                            const std::vector<std::int8_t>& beta, const QuantPlan& plan);

// Score accumulators -> biased base-2 exponents -> pseudo-softmax weights
// (Q0.8 in 0..256) for one row.
std::vector<std::uint16_t> softmax_weights_row(const std::int32_t* scores, int n,
                                               const QuantPlan& plan);

// Columns [head*head_dim, (head+1)*head_dim) of a fused projection matrix.
TileMatrix slice_head_columns(const TileMatrix& w, int head, int head_dim);

TileMatrix transpose(const TileMatrix& m);

// One output element of softmax_weights * V with the engine's accumulator
// width and rounding; shared between the functional path and the replay.
std::int8_t attention_mix(const std::vector<std::uint16_t>& weights, const TileMatrix& v,
                          int col);

// One attention head: ln_in is the T x D layernorm output. Returns the
// T x head_dim head output at qkv scale.
TileMatrix msa_block(const TileMatrix& ln_in, const LayerWeights& lw, int head,
                     const DerivedDims& dims, const QuantPlan& plan);

// Full MLP: relu(ln_in * W_h + b_h) * W_o + b_o at activation scale
// (residual not yet added).
TileMatrix mlp_block(const TileMatrix& ln_in, const LayerWeights& lw,
                     const DerivedDims& dims, const QuantPlan& plan);

struct ForwardOptions {
    bool layernorm_identity = false;  // test hook: LN passes values through
};

// Patch embedding + class token + position embedding.
TileMatrix embed_input(const TileMatrix& patches, const EncoderWeights& w,
                       const HardwareConfig& hw);

// Full encoder: returns final layernorm output y (T x D at ln scale).
TileMatrix encoder_forward(const TileMatrix& patches, const EncoderWeights& w,
                           const HardwareConfig& hw, const ForwardOptions& opt = {});

}  // namespace mevit
