#include "mevit/tile.hpp"

#include <algorithm>
#include <stdexcept>

#include "mevit/packed.hpp"

namespace mevit {

TileMatrix::TileMatrix(int r, int c, int p)
    : rows(r), cols(c), prows(padded(r, p)), pcols(padded(c, p)), psys(p),
      data(size_t(prows) * pcols, 0) {}

bool TileMatrix::padding_is_zero() const {
    for (int r = 0; r < prows; ++r)
        for (int c = 0; c < pcols; ++c)
            if ((r >= rows || c >= cols) && at(r, c) != 0) return false;
    return true;
}

TileAccumulator block_matmul(const TileMatrix& a, const TileMatrix& b,
                             const TileAccumulator* accumulate_into, bool via_dsp_packing) {
    if (a.cols != b.rows) throw std::invalid_argument("shape-mismatch: a.cols != b.rows");
    if (a.psys != b.psys) throw std::invalid_argument("shape-mismatch: psys differs");
    const int p = a.psys;
    TileAccumulator acc(a.rows, b.cols);
    if (accumulate_into) {
        if (accumulate_into->rows != acc.rows || accumulate_into->cols != acc.cols)
            throw std::invalid_argument("shape-mismatch: accumulator");
        acc = *accumulate_into;
    }
    const int rb = a.row_blocks();
    const int cp = col_pairs(b.cols, p);
    const int kb = a.col_blocks();
    // Row-block-major over A, column-block pairs over B, inner blocks
    // streamed; the order matches the schedule but cannot change the exact
    // integer sums.
    for (int i = 0; i < rb; ++i) {
        const int r_end = std::min((i + 1) * p, a.rows);
        for (int jp = 0; jp < cp; ++jp) {
            const int c_begin = 2 * jp * p;
            const int c_end = std::min(c_begin + 2 * p, b.cols);
            for (int kk = 0; kk < kb; ++kk) {
                const int k_end = std::min((kk + 1) * p, a.cols);
                if (!via_dsp_packing) {
                    for (int r = i * p; r < r_end; ++r) {
                        std::int32_t* out = &acc.at(r, 0);
                        for (int k = kk * p; k < k_end; ++k) {
                            const std::int32_t av = a.at(r, k);
                            if (av == 0) continue;
                            const std::int8_t* brow = &b.at(k, 0);
                            for (int c = c_begin; c < c_end; ++c)
                                out[c] += av * brow[c];
                        }
                    }
                } else {
                    // Bit-level route: both columns of a pair share one
                    // multiplier via operand packing.
                    for (int r = i * p; r < r_end; ++r) {
                        for (int cc = 0; cc < p; ++cc) {
                            int c0 = c_begin + cc, c1 = c0 + p;
                            bool w0 = c0 < b.cols, w1 = c1 < b.cols;
                            if (!w0 && !w1) continue;
                            std::int64_t s0 = 0, s1 = 0;
                            for (int k = kk * p; k < k_end; ++k) {
                                PackedOperand op = pack_operands(
                                    w0 ? b.at(k, c0) : std::int8_t(0),
                                    w1 ? b.at(k, c1) : std::int8_t(0));
                                PackedProduct pr = packed_multiply(a.at(r, k), op);
                                s0 += pr.hi;
                                s1 += pr.lo;
                            }
                            if (w0) acc.at(r, c0) += std::int32_t(s0);
                            if (w1) acc.at(r, c1) += std::int32_t(s1);
                        }
                    }
                }
            }
        }
    }
    return acc;
}

TileMatrix from_rows(const std::vector<std::vector<int>>& rows, int psys) {
    TileMatrix m(int(rows.size()), rows.empty() ? 0 : int(rows[0].size()), psys);
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c) m.at(r, c) = std::int8_t(rows[r][c]);
    return m;
}

}  // namespace mevit
