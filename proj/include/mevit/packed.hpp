#pragma once

#include <cfenv>
#include <cmath>
#include <cstdint>

namespace mevit {

// Emulation of the two-multiplies-per-DSP trick: the 27-bit multiplier port
// carries (b << 18) | c' with c' the 18-bit two's-complement image of c, and
// the 45-bit product separates into a*b (high field) and a*c (low field)
// after sign corrections.

constexpr int kLowFieldBits = 18;
constexpr std::uint32_t kLowFieldMask = (1u << kLowFieldBits) - 1;
constexpr std::uint32_t kOperandMask = (1u << 27) - 1;

struct PackedOperand {
    std::uint32_t raw = 0;  // 27-bit field image

    std::int32_t high_field() const {
        // bits 26:18, sign-extended 9-bit value
        std::int32_t b = int(raw >> kLowFieldBits) & 0x1FF;
        return b >= 0x100 ? b - 0x200 : b;
    }
    std::int32_t low_field() const {
        std::int32_t c = int(raw & kLowFieldMask);
        return c >= (1 << (kLowFieldBits - 1)) ? c - (1 << kLowFieldBits) : c;
    }
    // Signed value the 27-bit port presents to the multiplier.
    std::int64_t port_value() const {
        return raw >= (1u << 26) ? std::int64_t(raw) - (std::int64_t(1) << 27)
                                 : std::int64_t(raw);
    }
};

struct PackedProduct {
    std::int64_t raw = 0;   // true 45-bit multiplier output
    std::int32_t hi = 0;    // a * b
    std::int32_t lo = 0;    // a * c
};

inline PackedOperand pack_operands(std::int8_t b, std::int8_t c) {
    std::uint32_t bf = std::uint32_t(std::int32_t(b)) & 0x1FF;
    std::uint32_t cf = std::uint32_t(std::int32_t(c)) & kLowFieldMask;
    return PackedOperand{((bf << kLowFieldBits) | cf) & kOperandMask};
}

inline PackedProduct packed_multiply(std::int8_t a, PackedOperand p) {
    PackedProduct out;
    out.raw = std::int64_t(a) * p.port_value();
    std::int32_t lo = std::int32_t(out.raw & kLowFieldMask);
    if (lo >= (1 << (kLowFieldBits - 1))) lo -= 1 << kLowFieldBits;
    std::int64_t t = out.raw >> kLowFieldBits;  // arithmetic shift
    // Undo the field-packing bias of a negative c, then apply the borrow
    // carried out of the low product.
    std::int64_t hi = t - (p.low_field() < 0 ? std::int64_t(a) : 0) + (lo < 0 ? 1 : 0);
    out.hi = std::int32_t(hi);
    out.lo = lo;
    return out;
}

// Symmetric per-tensor quantization, zero_point fixed at 0.
struct QuantParams {
    double scale = 1.0;
};

inline std::int8_t quantize(double x, QuantParams q) {
    double v = std::nearbyint(x / q.scale);  // round-to-nearest-even
    if (v > 127.0) return 127;
    if (v < -128.0) return -128;
    return std::int8_t(v);
}

inline double dequantize(std::int8_t v, QuantParams q) { return v * q.scale; }

// Round-to-nearest-even right shift, the requantization step used on every
// 32-bit accumulator in the engine.
inline std::int32_t rne_shift(std::int64_t v, int shift) {
    if (shift <= 0) return std::int32_t(v << -shift);
    std::int64_t half = std::int64_t(1) << (shift - 1);
    std::int64_t mask = (std::int64_t(1) << shift) - 1;
    std::int64_t q = v >> shift;
    std::int64_t rem = v & mask;
    if (rem > half || (rem == half && (q & 1))) q += 1;
    return std::int32_t(q);
}

inline std::int8_t saturate_i8(std::int32_t v) {
    if (v > 127) return 127;
    if (v < -128) return -128;
    return std::int8_t(v);
}

}  // namespace mevit
