#include "mevit/functional.hpp"

#include <stdexcept>

#include "mevit/packed.hpp"

namespace mevit {

TileMatrix requant_matrix(const TileAccumulator& acc, int shift, int psys) {
    TileMatrix out(acc.rows, acc.cols, psys);
    for (int r = 0; r < acc.rows; ++r)
        for (int c = 0; c < acc.cols; ++c)
            out.at(r, c) = saturate_i8(rne_shift(acc.at(r, c), shift));
    return out;
}

TileMatrix saturating_add(const TileMatrix& a, const TileMatrix& b) {
    if (a.rows != b.rows || a.cols != b.cols)
        throw std::invalid_argument("shape-mismatch: saturating_add");
    TileMatrix out(a.rows, a.cols, a.psys);
    for (int r = 0; r < a.rows; ++r)
        for (int c = 0; c < a.cols; ++c)
            out.at(r, c) = saturate_i8(std::int32_t(a.at(r, c)) + b.at(r, c));
    return out;
}

TileMatrix layernorm_matrix(const TileMatrix& x, const std::vector<std::int8_t>& gamma,
                            const std::vector<std::int8_t>& beta, const QuantPlan& plan) {
    TileMatrix out(x.rows, x.cols, x.psys);
    for (int r = 0; r < x.rows; ++r) {
        LayerNormRowState st = layernorm_pass1(&x.at(r, 0), x.cols);
        layernorm_pass2(&x.at(r, 0), x.cols, st, gamma.data(), plan.gamma_shift,
                        beta.data(), plan.beta_shift, plan.ln_shift, &out.at(r, 0));
    }
    return out;
}

std::vector<std::uint16_t> softmax_weights_row(const std::int32_t* scores, int n,
                                               const QuantPlan& plan) {
    std::vector<int> xb(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j)
        xb[size_t(j)] = bias_score(rne_shift(scores[j], plan.score_shift));
    return pseudo_softmax_row(xb);
}

TileMatrix slice_head_columns(const TileMatrix& w, int head, int head_dim) {
    TileMatrix out(w.rows, head_dim, w.psys);
    for (int r = 0; r < w.rows; ++r)
        for (int c = 0; c < head_dim; ++c) out.at(r, c) = w.at(r, head * head_dim + c);
    return out;
}

TileMatrix transpose(const TileMatrix& m) {
    TileMatrix out(m.cols, m.rows, m.psys);
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c) out.at(c, r) = m.at(r, c);
    return out;
}

std::int8_t attention_mix(const std::vector<std::uint16_t>& weights, const TileMatrix& v,
                          int col) {
    std::int64_t acc = 0;
    for (size_t j = 0; j < weights.size(); ++j)
        acc += std::int64_t(weights[j]) * v.at(int(j), col);
    return saturate_i8(rne_shift(acc, kSoftmaxFracBits));
}

TileMatrix msa_block(const TileMatrix& ln_in, const LayerWeights& lw, int head,
                     const DerivedDims& dims, const QuantPlan& plan) {
    const int p = ln_in.psys;
    const int dh = dims.head_dim;
    const int qkv_rq = QuantPlan::requant(plan.ln_shift, plan.weight_shift, plan.qkv_shift);

    TileMatrix q =
        requant_matrix(block_matmul(ln_in, slice_head_columns(lw.wq, head, dh)), qkv_rq, p);
    TileMatrix k =
        requant_matrix(block_matmul(ln_in, slice_head_columns(lw.wk, head, dh)), qkv_rq, p);
    TileMatrix v =
        requant_matrix(block_matmul(ln_in, slice_head_columns(lw.wv, head, dh)), qkv_rq, p);

    // Scores Q * K^T; the 1/sqrt(Dk) factor is folded into score_shift.
    TileAccumulator scores = block_matmul(q, transpose(k));

    // Per-row pseudo-softmax, then weights * V. Softmax weights are Q0.8 in
    // [0, 256]; the accumulator is rescaled by 2^-8 so the output keeps the
    // qkv scale.
    TileMatrix out(dims.tokens, dh, p);
    for (int r = 0; r < dims.tokens; ++r) {
        std::vector<std::uint16_t> w = softmax_weights_row(&scores.at(r, 0), dims.tokens, plan);
        for (int c = 0; c < dh; ++c) out.at(r, c) = attention_mix(w, v, c);
    }
    return out;
}

TileMatrix mlp_block(const TileMatrix& ln_in, const LayerWeights& lw,
                     const DerivedDims& dims, const QuantPlan& plan) {
    const int p = ln_in.psys;
    const int hid_rq =
        QuantPlan::requant(plan.ln_shift, plan.weight_shift, plan.mlp_hidden_shift);
    const int out_rq =
        QuantPlan::requant(plan.mlp_hidden_shift, plan.weight_shift, plan.act_shift);

    TileAccumulator h = block_matmul(ln_in, lw.w_hidden);
    // Bias enters the accumulator pre-shifted to accumulator scale; ReLU is
    // applied on the accumulator before requantization.
    const int hid_bias_up = plan.ln_shift + plan.weight_shift - plan.bias_shift;
    TileMatrix m(ln_in.rows, dims.hidden_dim, p);
    for (int r = 0; r < h.rows; ++r)
        for (int c = 0; c < h.cols; ++c) {
            std::int64_t a = h.at(r, c) + (std::int64_t(lw.b_hidden[size_t(c)]) << hid_bias_up);
            if (a < 0) a = 0;
            m.at(r, c) = saturate_i8(rne_shift(a, hid_rq));
        }

    TileAccumulator o = block_matmul(m, lw.w_out);
    const int out_bias_up = plan.mlp_hidden_shift + plan.weight_shift - plan.bias_shift;
    TileMatrix out(ln_in.rows, ln_in.cols, p);
    for (int r = 0; r < o.rows; ++r)
        for (int c = 0; c < o.cols; ++c) {
            std::int64_t a = o.at(r, c) + (std::int64_t(lw.b_out[size_t(c)]) << out_bias_up);
            out.at(r, c) = saturate_i8(rne_shift(a, out_rq));
        }
    return out;
}

TileMatrix embed_input(const TileMatrix& patches, const EncoderWeights& w,
                       const HardwareConfig& hw) {
    const QuantPlan& plan = w.plan;
    const int p = hw.psys;
    const int emb_rq = QuantPlan::requant(0, plan.weight_shift, plan.act_shift);
    TileAccumulator acc = block_matmul(patches, w.embed);
    TileMatrix z0(w.dims.tokens, w.model.model_dim, p);
    for (int c = 0; c < w.model.model_dim; ++c)
        z0.at(0, c) = w.class_token[size_t(c)];
    for (int r = 0; r < patches.rows; ++r)
        for (int c = 0; c < acc.cols; ++c)
            z0.at(r + 1, c) = saturate_i8(rne_shift(acc.at(r, c), emb_rq));
    return saturating_add(z0, w.pos_embed);
}

TileMatrix encoder_forward(const TileMatrix& patches, const EncoderWeights& w,
                           const HardwareConfig& hw, const ForwardOptions& opt) {
    if (patches.rows != w.dims.num_patches || patches.cols != w.dims.patch_dim)
        throw std::invalid_argument("shape-mismatch: patch tensor");
    const QuantPlan& plan = w.plan;
    const int p = hw.psys;
    const int dh = w.dims.head_dim;
    const int wo_rq = QuantPlan::requant(plan.qkv_shift, plan.weight_shift, plan.act_shift);

    auto ln = [&](const TileMatrix& x, const std::vector<std::int8_t>& g,
                  const std::vector<std::int8_t>& b) {
        return opt.layernorm_identity ? x : layernorm_matrix(x, g, b, plan);
    };

    TileMatrix z = embed_input(patches, w, hw);
    for (const auto& lw : w.layers) {
        TileMatrix ln1 = ln(z, lw.ln1_gamma, lw.ln1_beta);
        TileMatrix heads(w.dims.tokens, w.model.model_dim, p);
        for (int h = 0; h < w.model.num_heads; ++h) {
            TileMatrix ho = msa_block(ln1, lw, h, w.dims, plan);
            for (int r = 0; r < ho.rows; ++r)
                for (int c = 0; c < ho.cols; ++c) heads.at(r, h * dh + c) = ho.at(r, c);
        }
        TileMatrix attn = requant_matrix(block_matmul(heads, lw.wo), wo_rq, p);
        TileMatrix zp = saturating_add(attn, z);

        TileMatrix ln2 = ln(zp, lw.ln2_gamma, lw.ln2_beta);
        TileMatrix mlp = mlp_block(ln2, lw, w.dims, plan);
        z = saturating_add(mlp, zp);
    }
    return ln(z, w.final_gamma, w.final_beta);
}

}  // namespace mevit
