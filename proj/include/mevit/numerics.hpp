#pragma once

#include <cstdint>
#include <vector>

namespace mevit {

// --- Pseudo-softmax -------------------------------------------------------
//
// Base-2 softmax p_i = 2^{x_i} / sum_k 2^{x_k} evaluated with float
// exponent/mantissa manipulation instead of exponentiation. Scores arrive as
// integer exponents; +127 biasing makes them storable unsigned, and inputs
// are saturated into the representable range rather than rejected.

constexpr int kExpBias = 127;
constexpr int kRecipFracBits = 24;     // reciprocal of 1.mant, Q0.24 truncated
constexpr int kSoftmaxFracBits = 8;    // output resolution, 256 == 1.0

// Pass-1 state: the running sum as one floating-point number.
struct SoftmaxRowState {
    int exp_sum = 0;                   // unbiased exponent of the sum
    std::uint32_t mant_bits = 0;       // 23-bit mantissa field (1.m implicit)
    std::uint32_t recip_mant = 0;      // Q0.24 reciprocal of 1.m
};

SoftmaxRowState pseudo_softmax_sum(const std::vector<int>& biased_exponents);

// Two-pass evaluation over one row of biased exponents (0..255). Returns
// Q0.8 values in [0, 256]; 256 encodes exactly 1.0.
std::vector<std::uint16_t> pseudo_softmax_row(const std::vector<int>& biased_exponents);

// Clamp a raw integer score into biased-exponent range.
inline int bias_score(std::int32_t score) {
    std::int32_t b = score + kExpBias;
    if (b < 0) b = 0;
    if (b > 255) b = 255;
    return b;
}

// --- Two-pass LayerNorm ----------------------------------------------------
//
// Pass 1 accumulates sum and squared sum concurrently (parallel variance
// form); the mean and 1/sqrt(var + eps) constants are then computed once in
// Q8.24 and pass 2 applies (x - mu) * inv_std * gamma + beta per element.

constexpr int kLnFracBits = 24;                       // Q8.24 constants
constexpr std::int64_t kLnEpsilonQ = 256;             // 2^-16 in Q8.24

struct LayerNormRowState {
    std::int32_t sum = 0;
    std::int64_t sq_sum = 0;
    std::int64_t mean_q = 0;      // Q8.24, input units
    std::int64_t inv_std_q = 0;   // Q8.24, 1/sqrt(var + eps)
};

LayerNormRowState layernorm_pass1(const std::int8_t* row, int n);

// gamma/beta are int8 with power-of-two scales relative to the normalized
// value; out_shift requantizes the Q-format result to the int8 output scale.
void layernorm_pass2(const std::int8_t* row, int n, const LayerNormRowState& st,
                     const std::int8_t* gamma, int gamma_shift,
                     const std::int8_t* beta, int beta_shift,
                     int out_shift, std::int8_t* out);

// Real-valued constants recovered from the fixed-point state (report/debug).
double ln_mean(const LayerNormRowState& st);
double ln_inv_std(const LayerNormRowState& st);

std::uint32_t isqrt_u64(std::uint64_t v);  // floor(sqrt(v))

}  // namespace mevit
