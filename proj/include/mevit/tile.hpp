#pragma once

#include <cstdint>
#include <vector>

#include "mevit/config.hpp"

namespace mevit {

// Int8 matrix stored with P_SYS-aligned zero padding. The padding region is
// all-zero and never contributes to results.
struct TileMatrix {
    int rows = 0, cols = 0;          // logical shape
    int prows = 0, pcols = 0;        // padded shape
    int psys = 1;
    std::vector<std::int8_t> data;   // prows * pcols, row-major

    TileMatrix() = default;
    TileMatrix(int r, int c, int p);

    std::int8_t& at(int r, int c) { return data[size_t(r) * pcols + c]; }
    const std::int8_t& at(int r, int c) const { return data[size_t(r) * pcols + c]; }
    int row_blocks() const { return prows / psys; }
    int col_blocks() const { return pcols / psys; }
    bool padding_is_zero() const;
};

// 32-bit accumulator matrix for partial-sum accumulation across block
// iterations.
struct TileAccumulator {
    int rows = 0, cols = 0;
    std::vector<std::int32_t> data;

    TileAccumulator() = default;
    TileAccumulator(int r, int c) : rows(r), cols(c), data(size_t(r) * c, 0) {}
    std::int32_t& at(int r, int c) { return data[size_t(r) * cols + c]; }
    const std::int32_t& at(int r, int c) const { return data[size_t(r) * cols + c]; }
};

// Exact integer block matmul with systolic traversal: row-block-major over A,
// column-block pairs over B, inner blocks streamed. Adds into
// `accumulate_into` when supplied. With via_dsp_packing the scalar products
// route through the packed 27x18 multiplier emulation; the plain path is
// bit-identical (the equivalence is checked exhaustively in tests) and fast.
TileAccumulator block_matmul(const TileMatrix& a, const TileMatrix& b,
                             const TileAccumulator* accumulate_into = nullptr,
                             bool via_dsp_packing = false);

TileMatrix from_rows(const std::vector<std::vector<int>>& rows, int psys);

}  // namespace mevit
