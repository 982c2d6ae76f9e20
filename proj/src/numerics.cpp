#include "mevit/numerics.hpp"

#include <cmath>
#include <stdexcept>

#include "mevit/packed.hpp"

namespace mevit {

// Float-style accumulation of sum_k 2^{x_k}: keep (exponent, 23-bit mantissa)
// and align each incoming power of two before adding, renormalizing on carry.
// This mirrors a binary32 adder, so the state matches the float
// representation of the running sum.
SoftmaxRowState pseudo_softmax_sum(const std::vector<int>& biased_exponents) {
    if (biased_exponents.empty()) throw std::invalid_argument("empty softmax row");
    SoftmaxRowState st;
    bool first = true;
    std::uint64_t mant = 0;  // 1.m with kMantBits fractional bits
    constexpr int kMantBits = 23;
    for (int xb : biased_exponents) {
        int e = xb - kExpBias;
        if (first) {
            st.exp_sum = e;
            mant = std::uint64_t(1) << kMantBits;
            first = false;
            continue;
        }
        if (e > st.exp_sum) {
            int d = e - st.exp_sum;
            mant = d >= 40 ? 0 : mant >> d;
            mant += std::uint64_t(1) << kMantBits;
            st.exp_sum = e;
        } else {
            int d = st.exp_sum - e;
            if (d < 40) mant += (std::uint64_t(1) << kMantBits) >> d;
        }
        while (mant >= (std::uint64_t(1) << (kMantBits + 1))) {
            mant >>= 1;
            st.exp_sum += 1;
        }
    }
    st.mant_bits = std::uint32_t(mant - (std::uint64_t(1) << kMantBits));
    // Reciprocal of 1.m in Q0.24, truncated.
    std::uint64_t denom = (std::uint64_t(1) << kMantBits) + st.mant_bits;
    st.recip_mant = std::uint32_t((std::uint64_t(1) << (kRecipFracBits + kMantBits)) / denom);
    return st;
}

std::vector<std::uint16_t> pseudo_softmax_row(const std::vector<int>& biased_exponents) {
    SoftmaxRowState st = pseudo_softmax_sum(biased_exponents);
    std::vector<std::uint16_t> out(biased_exponents.size());
    for (size_t i = 0; i < out.size(); ++i) {
        int e = biased_exponents[i] - kExpBias;
        // p = recip * 2^{x_i - exp_sum}; keep the top kSoftmaxFracBits
        // fractional bits after the shift.
        int shift = (kRecipFracBits - kSoftmaxFracBits) + (st.exp_sum - e);
        std::uint32_t p = shift >= 32 ? 0 : st.recip_mant >> shift;
        out[i] = std::uint16_t(p > 256 ? 256 : p);
    }
    return out;
}

std::uint32_t isqrt_u64(std::uint64_t v) {
    if (v == 0) return 0;
    std::uint64_t r = std::uint64_t(std::sqrt(double(v)));
    while (r * r > v) --r;
    while ((r + 1) * (r + 1) <= v) ++r;
    return std::uint32_t(r);
}

LayerNormRowState layernorm_pass1(const std::int8_t* row, int n) {
    LayerNormRowState st;
    for (int j = 0; j < n; ++j) {
        st.sum += row[j];
        st.sq_sum += std::int64_t(row[j]) * row[j];
    }
    // mean = sum / n in Q8.24, rounded to nearest.
    std::int64_t num = std::int64_t(st.sum) << kLnFracBits;
    st.mean_q = num >= 0 ? (num + n / 2) / n : -((-num + n / 2) / n);
    // var = E[x^2] - mean^2 in Q8.24 of squared input units.
    std::int64_t ex2_q = ((st.sq_sum << kLnFracBits) + n / 2) / n;
    std::int64_t mean2_q = (st.mean_q * st.mean_q) >> kLnFracBits;
    std::int64_t var_q = ex2_q - mean2_q;
    if (var_q < 0) var_q = 0;
    // inv_std = 2^36 / sqrt(var + eps scaled to Q48); result in Q8.24.
    std::uint64_t v48 = std::uint64_t(var_q + kLnEpsilonQ) << kLnFracBits;
    std::uint64_t s24 = isqrt_u64(v48);  // sqrt in Q?.24
    st.inv_std_q = std::int64_t((std::uint64_t(1) << 48) / s24);
    return st;
}

void layernorm_pass2(const std::int8_t* row, int n, const LayerNormRowState& st,
                     const std::int8_t* gamma, int gamma_shift,
                     const std::int8_t* beta, int beta_shift,
                     int out_shift, std::int8_t* out) {
    for (int j = 0; j < n; ++j) {
        std::int64_t diff_q = (std::int64_t(row[j]) << kLnFracBits) - st.mean_q;
        std::int64_t norm_q = (diff_q * st.inv_std_q) >> kLnFracBits;  // Q8.24
        // gamma value = gamma[j] * 2^-gamma_shift, beta likewise.
        std::int64_t scaled = (norm_q * gamma[j]) >> gamma_shift;
        std::int64_t beta_q = std::int64_t(beta[j]) << (kLnFracBits - beta_shift);
        std::int64_t y_q = scaled + beta_q;
        out[j] = saturate_i8(rne_shift(y_q, kLnFracBits - out_shift));
    }
}

double ln_mean(const LayerNormRowState& st) {
    return double(st.mean_q) / double(std::int64_t(1) << kLnFracBits);
}

double ln_inv_std(const LayerNormRowState& st) {
    return double(st.inv_std_q) / double(std::int64_t(1) << kLnFracBits);
}

}  // namespace mevit
