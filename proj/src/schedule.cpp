#include "mevit/schedule.hpp"

#include <fstream>
#include <map>
#include <stdexcept>

#include "mevit/numerics.hpp"
#include "mevit/packed.hpp"

namespace mevit {

const char* mode_name(Mode m) {
    switch (m) {
        case Mode::Embed: return "embed";
        case Mode::Msa: return "msa";
        case Mode::Lp: return "lp";
        case Mode::Mlp: return "mlp";
        case Mode::FinalLn: return "final_ln";
    }
    return "?";
}

const char* event_kind_name(EventKind k) {
    switch (k) {
        case EventKind::Bmm: return "bmm";
        case EventKind::BufferMove: return "buffer_move";
        case EventKind::DramLoad: return "dram_load";
        case EventKind::LayerNormPass: return "layernorm_pass";
        case EventKind::SoftmaxPass: return "softmax_pass";
        case EventKind::Reciprocal: return "reciprocal";
        case EventKind::Stall: return "stall";
        case EventKind::ResidualAdd: return "residual_add";
        case EventKind::Activation: return "activation";
    }
    return "?";
}

static const char* buffer_name(BufferId b) {
    switch (b) {
        case BufferId::Weight: return "Weight";
        case BufferId::Feature: return "Feature";
        case BufferId::Layer: return "Layer";
        case BufferId::Q: return "Q";
        case BufferId::K: return "K";
        case BufferId::V: return "V";
        case BufferId::Result: return "Result";
        case BufferId::S1: return "S1";
        case BufferId::S2: return "S2";
        case BufferId::None: return "-";
    }
    return "?";
}

std::vector<BufferSpec> buffer_specs(const ModelConfig& model, const DerivedDims& dims,
                                     const HardwareConfig& hw) {
    const std::int64_t D = model.model_dim;
    const std::int64_t T = dims.tokens;
    const std::int64_t dh = dims.head_dim;
    const std::int64_t p = hw.psys;
    // The patch-embedding matrix sets the weight/staging floor when the
    // model dimension is below the flattened patch length, and the K/V
    // buffers must cover T rows when the token count exceeds D. For the
    // base models (D = 768, T <= D) every size reduces to the nominal
    // D x D / D x Dh / P x D forms.
    const std::int64_t wide = std::max<std::int64_t>(D, dims.patch_dim);
    const std::int64_t kv_rows = std::max<std::int64_t>(D, T);
    return {
        {BufferId::Weight, "Weight", wide * D, "block-ram"},
        {BufferId::Feature, "Feature", T * D, "block-ram"},
        {BufferId::Layer, "Layer", T * D, "block-ram"},
        {BufferId::Q, "Q", p * dh, "lut-ram"},
        {BufferId::K, "K", kv_rows * dh, "lut-ram"},
        {BufferId::V, "V", kv_rows * dh, "lut-ram"},
        {BufferId::Result, "Result", p * 2 * p, "lut-ram"},
        {BufferId::S1, "S1", p * wide, "lut-ram"},
        {BufferId::S2, "S2", p * wide, "lut-ram"},
    };
}

std::uint64_t ScheduleTrace::fnv_hash() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xFF;
            h *= 1099511628211ull;
        }
    };
    for (const auto& e : events) {
        mix(e.cycle_start);
        mix(e.cycle_end);
        mix(std::uint64_t(e.kind) | (std::uint64_t(e.mode) << 8) |
            (std::uint64_t(std::uint16_t(e.layer)) << 16) |
            (std::uint64_t(std::uint16_t(e.head)) << 32));
        mix(std::uint64_t(std::uint32_t(e.bytes)));
    }
    for (const auto& d : dram) {
        mix(d.issue_cycle);
        mix(d.complete_cycle);
        mix(std::uint64_t(std::uint32_t(d.tensor)) |
            (std::uint64_t(std::uint32_t(d.chunk)) << 32));
        mix(std::uint64_t(d.bytes) | (std::uint64_t(d.store) << 63));
    }
    return h;
}

// --- closed-form mode costs -------------------------------------------------

std::uint64_t schedule_lp_cycles(int rows, int inner, int cols, int p) {
    std::uint64_t pairs = std::uint64_t(row_blocks(rows, p)) * col_pairs(cols, p);
    return pairs * (std::uint64_t(padded(inner, p)) + kBlockPairOverhead) + std::uint64_t(cols);
}

std::uint64_t schedule_msa_cycles(const DerivedDims& d, const ModelConfig& m, int p) {
    const int rb = row_blocks(d.tokens, p);
    std::uint64_t per_head =
        3ull * rb * col_pairs(d.head_dim, p) * (padded(m.model_dim, p) + kBlockPairOverhead) +
        std::uint64_t(rb) * col_pairs(d.tokens, p) * (padded(d.head_dim, p) + kBlockPairOverhead) +
        std::uint64_t(rb) * col_pairs(d.head_dim, p) * (padded(d.tokens, p) + kBlockPairOverhead) +
        std::uint64_t(kRecipLatency) + d.tokens;
    return per_head * std::uint64_t(m.num_heads);
}

std::uint64_t schedule_mlp_cycles(const DerivedDims& d, const ModelConfig& m, int p) {
    const int rb = row_blocks(d.tokens, p);
    std::uint64_t bmm1 = std::uint64_t(rb) * col_pairs(d.hidden_dim, p) *
                         (padded(m.model_dim, p) + kBlockPairOverhead);
    std::uint64_t bmm2 = std::uint64_t(rb) * col_blocks(d.hidden_dim, p) *
                         col_pairs(m.model_dim, p) * (std::uint64_t(p) + kBlockPairOverhead);
    std::uint64_t stalls = std::uint64_t(rb) * col_pairs(d.hidden_dim, p) * p;
    return bmm1 + bmm2 + stalls + std::uint64_t(m.model_dim);
}

// --- replay machinery -------------------------------------------------------

namespace {

struct BufferTracker {
    std::vector<BufferSpec> specs;
    std::int64_t occ[9] = {0};
    std::int64_t peak[9] = {0};

    void alloc(BufferId id, std::int64_t n) {
        int i = int(id);
        occ[i] += n;
        if (occ[i] > specs[size_t(i)].capacity)
            throw std::runtime_error(std::string("buffer-overflow: ") + specs[size_t(i)].name);
        if (occ[i] > peak[i]) peak[i] = occ[i];
    }
    void release(BufferId id, std::int64_t n) {
        int i = int(id);
        occ[i] -= n;
        if (occ[i] < 0) throw std::logic_error("buffer under-release");
    }
};

struct Ctx {
    const ModelConfig& model;
    const HardwareConfig& hw;
    DerivedDims d;
    QuantPlan plan;
    std::vector<TensorInfo> manifest;
    std::map<std::string, int> tensor_ids;
    ScheduleTrace trace;
    BufferTracker buffers;

    std::uint64_t t = 0;        // systolic array timeline
    std::uint64_t dram_t = 0;   // dram delivery timeline
    double cycles_per_byte;
    std::uint64_t stall_cycles = 0;

    // value replay (optional)
    const EncoderWeights* w = nullptr;
    const TileMatrix* patches = nullptr;
    TileMatrix val_layer;      // Layer buffer contents (ln output)
    TileMatrix val_feature;    // Feature buffer contents (residual / outputs)
    TileMatrix val_staged;     // residual parked in Weight free space

    Ctx(const ModelConfig& m, const HardwareConfig& h)
        : model(m), hw(h), d(derive_dims(m, h)), plan{},
          manifest(manifest_for(m, d, plan)) {
        buffers.specs = buffer_specs(m, d, h);
        for (size_t i = 0; i < manifest.size(); ++i) tensor_ids[manifest[i].name] = int(i);
        cycles_per_byte = hw.clock_hz / hw.dram_bandwidth;
    }

    int tid(const std::string& name) const { return tensor_ids.at(name); }

    std::uint64_t issue_load(Mode mode, int tensor, int chunk, std::int64_t bytes,
                             std::uint64_t not_before) {
        DramTransaction tx;
        tx.issue_cycle = std::max(dram_t, not_before);
        dram_t = tx.issue_cycle + std::uint64_t(double(bytes) * cycles_per_byte + 0.999999);
        tx.complete_cycle = dram_t;
        tx.store = false;
        tx.mode = mode;
        tx.tensor = tensor;
        tx.chunk = chunk;
        tx.bytes = bytes;
        trace.dram.push_back(tx);
        ScheduleEvent e;
        e.cycle_start = tx.issue_cycle;
        e.cycle_end = tx.complete_cycle;
        e.kind = EventKind::DramLoad;
        e.mode = mode;
        e.bytes = std::int32_t(bytes);
        trace.events.push_back(e);
        return tx.complete_cycle;
    }

    void issue_store(Mode mode, int tensor, int chunk, std::int64_t bytes) {
        DramTransaction tx;
        tx.issue_cycle = std::max(dram_t, t);
        dram_t = tx.issue_cycle + std::uint64_t(double(bytes) * cycles_per_byte + 0.999999);
        tx.complete_cycle = dram_t;
        tx.store = true;
        tx.mode = mode;
        tx.tensor = tensor;
        tx.chunk = chunk;
        tx.bytes = bytes;
        trace.dram.push_back(tx);
    }

    // Array-blocking event; data_ready extends it with a recorded dram stall.
    void block(EventKind kind, std::uint64_t dur, Mode mode, int layer, int head,
               std::uint64_t data_ready = 0, int block_row = -1, int block_col = -1) {
        ScheduleEvent e;
        e.cycle_start = t;
        e.cycle_end = t + dur;
        e.kind = kind;
        e.mode = mode;
        e.layer = std::int16_t(layer);
        e.head = std::int16_t(head);
        e.block_row = std::int16_t(block_row);
        e.block_col = std::int16_t(block_col);
        e.array_bound = true;
        trace.events.push_back(e);
        t += dur;
        if (data_ready > t) {
            ScheduleEvent s;
            s.cycle_start = t;
            s.cycle_end = data_ready;
            s.kind = EventKind::Stall;
            s.mode = mode;
            s.layer = std::int16_t(layer);
            s.array_bound = true;
            trace.events.push_back(s);
            stall_cycles += data_ready - t;
            t = data_ready;
        }
    }

    void parallel(EventKind kind, std::uint64_t start, std::uint64_t dur, Mode mode,
                  int layer, int head, BufferId src = BufferId::None,
                  BufferId dst = BufferId::None, std::int64_t bytes = 0) {
        ScheduleEvent e;
        e.cycle_start = start;
        e.cycle_end = start + dur;
        e.kind = kind;
        e.mode = mode;
        e.layer = std::int16_t(layer);
        e.head = std::int16_t(head);
        e.src = src;
        e.dst = dst;
        e.bytes = std::int32_t(bytes);
        trace.events.push_back(e);
    }
};

// Strip of rows [r0, r0+n) as its own tile matrix.
TileMatrix row_strip(const TileMatrix& m, int r0, int n, int psys) {
    TileMatrix s(n, m.cols, psys);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < m.cols; ++c) s.at(r, c) = m.at(r0 + r, c);
    return s;
}

void store_strip(TileMatrix& dst, const TileMatrix& strip, int r0) {
    for (int r = 0; r < strip.rows; ++r)
        for (int c = 0; c < strip.cols; ++c) dst.at(r0 + r, c) = strip.at(r, c);
}

// --- mode runners -----------------------------------------------------------

// Patch embedding scheduled as one LP pass: E resident in the Weight buffer,
// patch strips streamed through S1, position embedding and class token merged
// on the output path, layernorm overlapped per strip.
void run_embed(Ctx& cx) {
    const int p = cx.hw.psys;
    const Mode mode = Mode::Embed;
    const int D = cx.model.model_dim;
    const int rbn = row_blocks(cx.d.num_patches, p);

    cx.buffers.alloc(BufferId::Weight, std::int64_t(cx.d.patch_dim) * D);
    // First patch strip, then the embedding matrix, in consumption order.
    std::vector<std::uint64_t> strip_ready(size_t(rbn), 0);
    strip_ready[0] = cx.issue_load(mode, kInputTensor, 0,
                                   std::int64_t(std::min(p, cx.d.num_patches)) * cx.d.patch_dim, 0);
    std::vector<std::uint64_t> chunk_ready(size_t(col_pairs(D, p)), 0);
    for (int jp = 0; jp < col_pairs(D, p); ++jp) {
        std::int64_t cols = std::min(2 * p, D - 2 * p * jp);
        chunk_ready[size_t(jp)] =
            cx.issue_load(mode, cx.tid("embed"), jp, std::int64_t(cx.d.patch_dim) * cols, 0);
    }

    for (int i = 0; i < rbn; ++i) {
        std::int64_t rows = std::min(p, cx.d.num_patches - i * p);
        if (i > 0)
            strip_ready[size_t(i)] =
                cx.issue_load(mode, kInputTensor, i, rows * cx.d.patch_dim, cx.t);
        cx.buffers.alloc(BufferId::S1, rows * cx.d.patch_dim);
        for (int jp = 0; jp < col_pairs(D, p); ++jp)
            cx.block(EventKind::Bmm, std::uint64_t(padded(cx.d.patch_dim, p)) + kBlockPairOverhead,
                     mode, -1, -1, std::max(strip_ready[size_t(i)], chunk_ready[size_t(jp)]), i, jp);
        cx.buffers.release(BufferId::S1, rows * cx.d.patch_dim);
        cx.buffers.alloc(BufferId::Feature, rows * std::int64_t(D));
        cx.parallel(EventKind::ResidualAdd, cx.t, p, mode, -1, -1, BufferId::Result,
                    BufferId::Feature, rows * std::int64_t(D));
        cx.parallel(EventKind::LayerNormPass, cx.t, std::uint64_t(D), mode, -1, -1,
                    BufferId::Feature, BufferId::Layer);
    }
    cx.issue_load(mode, cx.tid("pos_embed"), 0, std::int64_t(cx.d.tokens) * D, 0);
    cx.issue_load(mode, cx.tid("class_token"), 0, D, 0);
    cx.issue_load(mode, cx.tid("layer0.ln1_gamma"), 0, D, 0);
    cx.issue_load(mode, cx.tid("layer0.ln1_beta"), 0, D, 0);
    cx.buffers.alloc(BufferId::Feature, D);  // class-token row
    cx.buffers.alloc(BufferId::Layer, std::int64_t(cx.d.tokens) * D);
    cx.parallel(EventKind::Reciprocal, cx.t, kRecipLatency, mode, -1, -1);
    // trailing, non-overlapped layernorm pass
    cx.block(EventKind::LayerNormPass, std::uint64_t(D), mode, -1, -1);
    cx.stall_cycles += std::uint64_t(D);
    cx.buffers.release(BufferId::Weight, std::int64_t(cx.d.patch_dim) * D);

    if (cx.w) {
        cx.val_feature = embed_input(*cx.patches, *cx.w, cx.hw);
        cx.val_layer = layernorm_matrix(cx.val_feature, cx.w->layers[0].ln1_gamma,
                                        cx.w->layers[0].ln1_beta, cx.plan);
    }
}

// One attention head sweep; values computed strip-by-strip against the K/V
// buffers exactly as the hardware orders them.
void run_msa(Ctx& cx, int layer) {
    const int p = cx.hw.psys;
    const Mode mode = Mode::Msa;
    const int D = cx.model.model_dim;
    const int dh = cx.d.head_dim;
    const int T = cx.d.tokens;
    const int rb = row_blocks(T, p);
    const std::string pre = "layer" + std::to_string(layer) + ".";
    const auto* lw = cx.w ? &cx.w->layers[size_t(layer)] : nullptr;

    TileMatrix heads_out;
    if (cx.w) heads_out = TileMatrix(T, D, p);

    cx.buffers.alloc(BufferId::K, std::int64_t(T) * dh);
    cx.buffers.alloc(BufferId::V, std::int64_t(T) * dh);
    cx.buffers.alloc(BufferId::Q, std::int64_t(p) * dh);
    // next mode's layernorm parameters ride along with the head streams
    cx.issue_load(mode, cx.tid(pre + "ln2_gamma"), 0, D, cx.t);
    cx.issue_load(mode, cx.tid(pre + "ln2_beta"), 0, D, cx.t);

    for (int h = 0; h < cx.model.num_heads; ++h) {
        std::int64_t slice_bytes = std::int64_t(D) * dh;
        cx.buffers.alloc(BufferId::Weight, 3 * slice_bytes);
        std::uint64_t wv_ready = cx.issue_load(mode, cx.tid(pre + "wv"), h, slice_bytes, cx.t);
        std::uint64_t wk_ready = cx.issue_load(mode, cx.tid(pre + "wk"), h, slice_bytes, cx.t);
        std::uint64_t wq_ready = cx.issue_load(mode, cx.tid(pre + "wq"), h, slice_bytes, cx.t);

        TileMatrix v_vals, kt_vals;
        if (cx.w) {
            const int qkv_rq =
                QuantPlan::requant(cx.plan.ln_shift, cx.plan.weight_shift, cx.plan.qkv_shift);
            v_vals = requant_matrix(
                block_matmul(cx.val_layer, slice_head_columns(lw->wv, h, dh)), qkv_rq, p);
            TileMatrix k_vals = requant_matrix(
                block_matmul(cx.val_layer, slice_head_columns(lw->wk, h, dh)), qkv_rq, p);
            kt_vals = transpose(k_vals);
        }
        // V_i then K_i initialization sweeps; weight streams hide under them.
        for (int i = 0; i < rb; ++i)
            for (int jp = 0; jp < col_pairs(dh, p); ++jp)
                cx.block(EventKind::Bmm, std::uint64_t(padded(D, p)) + kBlockPairOverhead, mode,
                         layer, h, wv_ready, i, jp);
        for (int i = 0; i < rb; ++i)
            for (int jp = 0; jp < col_pairs(dh, p); ++jp)
                cx.block(EventKind::Bmm, std::uint64_t(padded(D, p)) + kBlockPairOverhead, mode,
                         layer, h, wk_ready, i, jp);

        for (int i = 0; i < rb; ++i) {
            int rows = std::min(p, T - i * p);
            // residual rows move to Weight free space while head 0 runs
            if (h == 0) {
                cx.buffers.alloc(BufferId::Weight, std::int64_t(rows) * D);
                cx.buffers.release(BufferId::Feature, std::int64_t(rows) * D);
                cx.parallel(EventKind::BufferMove, cx.t, std::uint64_t(rows), mode, layer, h,
                            BufferId::Feature, BufferId::Weight, std::int64_t(rows) * D);
            }
            // Q row block
            for (int jp = 0; jp < col_pairs(dh, p); ++jp)
                cx.block(EventKind::Bmm, std::uint64_t(padded(D, p)) + kBlockPairOverhead, mode,
                         layer, h, wq_ready, i, jp);
            // scores into S
            for (int jp = 0; jp < col_pairs(T, p); ++jp)
                cx.block(EventKind::Bmm, std::uint64_t(padded(dh, p)) + kBlockPairOverhead, mode,
                         layer, h, 0, i, jp);
            std::uint64_t sm_start = cx.t;
            if (i + 1 < rb) {
                // softmax for this strip hides under the next Q block
                cx.parallel(EventKind::Reciprocal, sm_start, kRecipLatency, mode, layer, h);
                cx.parallel(EventKind::SoftmaxPass, sm_start + kRecipLatency, std::uint64_t(T),
                            mode, layer, h);
            } else {
                // last strip: nothing left to hide the reciprocal + pass
                cx.block(EventKind::Reciprocal, kRecipLatency, mode, layer, h);
                cx.block(EventKind::SoftmaxPass, std::uint64_t(T), mode, layer, h);
                cx.stall_cycles += std::uint64_t(kRecipLatency) + T;
            }
            // weighted sum with V
            for (int jp = 0; jp < col_pairs(dh, p); ++jp)
                cx.block(EventKind::Bmm, std::uint64_t(padded(T, p)) + kBlockPairOverhead, mode,
                         layer, h, 0, i, jp);

            if (cx.w) {
                const int qkv_rq =
                    QuantPlan::requant(cx.plan.ln_shift, cx.plan.weight_shift, cx.plan.qkv_shift);
                TileMatrix ln_strip = row_strip(cx.val_layer, i * p, rows, p);
                TileMatrix q_strip = requant_matrix(
                    block_matmul(ln_strip, slice_head_columns(lw->wq, h, dh)), qkv_rq, p);
                TileAccumulator scores = block_matmul(q_strip, kt_vals);
                for (int r = 0; r < rows; ++r) {
                    std::vector<std::uint16_t> wrow =
                        softmax_weights_row(&scores.at(r, 0), T, cx.plan);
                    for (int c = 0; c < dh; ++c)
                        heads_out.at(i * p + r, h * dh + c) = attention_mix(wrow, v_vals, c);
                }
            }
        }
        cx.buffers.release(BufferId::Weight, 3 * slice_bytes);
    }
    // residual returns to the Layer buffer once the last head no longer
    // needs the layernorm values
    cx.buffers.release(BufferId::Layer, std::int64_t(T) * D);
    cx.buffers.release(BufferId::Weight, std::int64_t(T) * D);
    cx.buffers.alloc(BufferId::Layer, std::int64_t(T) * D);
    cx.parallel(EventKind::BufferMove, cx.t, std::uint64_t(rb), mode, layer, -1,
                BufferId::Weight, BufferId::Layer, std::int64_t(T) * D);
    cx.buffers.alloc(BufferId::Feature, std::int64_t(T) * D);
    cx.buffers.release(BufferId::K, std::int64_t(T) * dh);
    cx.buffers.release(BufferId::V, std::int64_t(T) * dh);
    cx.buffers.release(BufferId::Q, std::int64_t(p) * dh);

    if (cx.w) {
        cx.val_layer = cx.val_feature;  // residual now lives in Layer
        cx.val_feature = heads_out;
    }
}

// Output projection + residual + layernorm (LP mode proper). Inputs:
// Feature = head outputs, Layer = residual.
void run_lp(Ctx& cx, int layer) {
    const int p = cx.hw.psys;
    const Mode mode = Mode::Lp;
    const int D = cx.model.model_dim;
    const int T = cx.d.tokens;
    const int rb = row_blocks(T, p);
    const std::string pre = "layer" + std::to_string(layer) + ".";

    cx.buffers.alloc(BufferId::Weight, std::int64_t(D) * D);
    std::vector<std::uint64_t> chunk_ready(size_t(col_pairs(D, p)), 0);
    for (int jp = 0; jp < col_pairs(D, p); ++jp) {
        std::int64_t cols = std::min(2 * p, D - 2 * p * jp);
        chunk_ready[size_t(jp)] =
            cx.issue_load(mode, cx.tid(pre + "wo"), jp, std::int64_t(D) * cols, cx.t);
    }

    TileMatrix out_vals, ln_vals;
    if (cx.w) {
        out_vals = TileMatrix(T, D, p);
        ln_vals = TileMatrix(T, D, p);
    }
    for (int i = 0; i < rb; ++i) {
        int rows = std::min(p, T - i * p);
        for (int jp = 0; jp < col_pairs(D, p); ++jp)
            cx.block(EventKind::Bmm, std::uint64_t(padded(D, p)) + kBlockPairOverhead, mode,
                     layer, -1, chunk_ready[size_t(jp)], i, jp);
        cx.parallel(EventKind::ResidualAdd, cx.t, p, mode, layer, -1, BufferId::Layer,
                    i % 2 ? BufferId::S1 : BufferId::S2, std::int64_t(rows) * D);
        cx.parallel(EventKind::Reciprocal, cx.t, kRecipLatency, mode, layer, -1);
        cx.parallel(EventKind::LayerNormPass, cx.t, std::uint64_t(D), mode, layer, -1,
                    BufferId::S1, BufferId::Layer);

        if (cx.w) {
            const auto& lw = cx.w->layers[size_t(layer)];
            const int wo_rq =
                QuantPlan::requant(cx.plan.qkv_shift, cx.plan.weight_shift, cx.plan.act_shift);
            TileMatrix head_strip = row_strip(cx.val_feature, i * p, rows, p);
            TileMatrix proj = requant_matrix(block_matmul(head_strip, lw.wo), wo_rq, p);
            TileMatrix res_strip = row_strip(cx.val_layer, i * p, rows, p);
            TileMatrix zp = saturating_add(proj, res_strip);
            store_strip(out_vals, zp, i * p);
            TileMatrix lns(rows, D, p);
            for (int r = 0; r < rows; ++r) {
                LayerNormRowState st = layernorm_pass1(&zp.at(r, 0), D);
                layernorm_pass2(&zp.at(r, 0), D, st, lw.ln2_gamma.data(), cx.plan.gamma_shift,
                                lw.ln2_beta.data(), cx.plan.beta_shift, cx.plan.ln_shift,
                                &lns.at(r, 0));
            }
            store_strip(ln_vals, lns, i * p);
        }
    }
    cx.block(EventKind::LayerNormPass, std::uint64_t(D), mode, layer, -1);
    cx.stall_cycles += std::uint64_t(D);
    cx.buffers.release(BufferId::Weight, std::int64_t(D) * D);

    if (cx.w) {
        cx.val_feature = out_vals;  // z' (pre-norm) for the residual path
        cx.val_layer = ln_vals;     // LN(z') for the MLP
    }
}

// MLP mode: W_h column pairs stream outermost, layer row blocks inner,
// partial sums staged through S1/S2 and the Feature buffer; bias + relu
// stalls the array P cycles per block pair.
void run_mlp(Ctx& cx, int layer) {
    const int p = cx.hw.psys;
    const Mode mode = Mode::Mlp;
    const int D = cx.model.model_dim;
    const int Dm = cx.d.hidden_dim;
    const int T = cx.d.tokens;
    const int rb = row_blocks(T, p);
    const std::string pre = "layer" + std::to_string(layer) + ".";
    const auto* lw = cx.w ? &cx.w->layers[size_t(layer)] : nullptr;
    const bool last_layer = layer + 1 == cx.model.num_layers;
    const std::string next_pre =
        last_layer ? "final" : "layer" + std::to_string(layer + 1) + ".ln1";

    cx.issue_load(mode, cx.tid(pre + "b_hidden"), 0, Dm, cx.t);
    cx.issue_load(mode, cx.tid(pre + "b_out"), 0, D, cx.t);
    cx.issue_load(mode, cx.tid(next_pre + "_gamma"), 0, D, cx.t);
    cx.issue_load(mode, cx.tid(next_pre + "_beta"), 0, D, cx.t);

    // residual rows move to Weight free space as in MSA mode
    cx.buffers.alloc(BufferId::Weight, std::int64_t(T) * D);
    cx.buffers.release(BufferId::Feature, std::int64_t(T) * D);
    cx.parallel(EventKind::BufferMove, cx.t, std::uint64_t(rb), mode, layer, -1,
                BufferId::Feature, BufferId::Weight, std::int64_t(T) * D);
    cx.buffers.alloc(BufferId::Feature, std::int64_t(T) * D);  // staged strips

    std::vector<TileAccumulator> staged;
    TileMatrix out_vals, ln_vals;
    if (cx.w) {
        staged.resize(size_t(rb));
        const int out_bias_up = cx.plan.mlp_hidden_shift + cx.plan.weight_shift - cx.plan.bias_shift;
        for (int i = 0; i < rb; ++i) {
            int rows = std::min(p, T - i * p);
            staged[size_t(i)] = TileAccumulator(rows, D);
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < D; ++c)
                    staged[size_t(i)].at(r, c) =
                        std::int32_t(std::int64_t(lw->b_out[size_t(c)]) << out_bias_up);
        }
        out_vals = TileMatrix(T, D, p);
        ln_vals = TileMatrix(T, D, p);
        cx.val_staged = cx.val_feature;
    }

    const int cpm = col_pairs(Dm, p);
    for (int jp = 0; jp < cpm; ++jp) {
        std::int64_t wh_cols = std::min(2 * p, Dm - 2 * p * jp);
        std::uint64_t wh_ready =
            cx.issue_load(mode, cx.tid(pre + "w_hidden"), jp, std::int64_t(D) * wh_cols, cx.t);
        std::uint64_t wo_ready =
            cx.issue_load(mode, cx.tid(pre + "w_out"), jp, wh_cols * std::int64_t(D), cx.t);
        cx.buffers.alloc(BufferId::Weight, std::int64_t(D) * wh_cols + wh_cols * std::int64_t(D));
        for (int i = 0; i < rb; ++i) {
            int rows = std::min(p, T - i * p);
            // hidden-layer block pair
            cx.block(EventKind::Bmm, std::uint64_t(padded(D, p)) + kBlockPairOverhead, mode,
                     layer, -1, wh_ready, i, jp);
            // bias + relu: unavoidable array stall of P cycles
            cx.block(EventKind::Activation, std::uint64_t(p), mode, layer, -1, 0, i, jp);
            cx.stall_cycles += std::uint64_t(p);
            // partial sums of the output projection, both hidden blocks
            for (int half = 0; half < 2; ++half) {
                if (std::int64_t(half) * p >= wh_cols) continue;
                for (int kp = 0; kp < col_pairs(D, p); ++kp)
                    cx.block(EventKind::Bmm, std::uint64_t(p) + kBlockPairOverhead, mode, layer,
                             -1, wo_ready, i, kp);
            }
            BufferId sbuf = (i % 2) ? BufferId::S2 : BufferId::S1;
            cx.buffers.alloc(sbuf, std::int64_t(rows) * D);
            cx.parallel(EventKind::BufferMove, cx.t, std::uint64_t(rows), mode, layer, -1,
                        sbuf, BufferId::Feature, std::int64_t(rows) * D);
            cx.buffers.release(sbuf, std::int64_t(rows) * D);

            if (cx.w) {
                const int hid_rq = QuantPlan::requant(cx.plan.ln_shift, cx.plan.weight_shift,
                                                      cx.plan.mlp_hidden_shift);
                const int hid_bias_up =
                    cx.plan.ln_shift + cx.plan.weight_shift - cx.plan.bias_shift;
                TileMatrix ln_strip = row_strip(cx.val_layer, i * p, rows, p);
                // M_{i,jp}: rows x wh_cols hidden block pair
                TileMatrix wh_slice(D, int(wh_cols), p);
                for (int r = 0; r < D; ++r)
                    for (int c = 0; c < wh_cols; ++c)
                        wh_slice.at(r, c) = lw->w_hidden.at(r, 2 * p * jp + c);
                TileAccumulator hacc = block_matmul(ln_strip, wh_slice);
                TileMatrix m(rows, int(wh_cols), p);
                for (int r = 0; r < rows; ++r)
                    for (int c = 0; c < wh_cols; ++c) {
                        std::int64_t a =
                            hacc.at(r, c) +
                            (std::int64_t(lw->b_hidden[size_t(2 * p * jp + c)]) << hid_bias_up);
                        if (a < 0) a = 0;
                        m.at(r, c) = saturate_i8(rne_shift(a, hid_rq));
                    }
                // staged += M * W_out rows [2p*jp, 2p*jp + wh_cols)
                TileMatrix wo_slice(int(wh_cols), D, p);
                for (int r = 0; r < wh_cols; ++r)
                    for (int c = 0; c < D; ++c)
                        wo_slice.at(r, c) = lw->w_out.at(2 * p * jp + r, c);
                staged[size_t(i)] = block_matmul(m, wo_slice, &staged[size_t(i)]);
            }

            if (jp + 1 == cpm) {
                // strip complete: requantize, add residual from Weight space,
                // layernorm for the next block
                cx.parallel(EventKind::ResidualAdd, cx.t, p, mode, layer, -1, BufferId::Weight,
                            BufferId::Feature, std::int64_t(rows) * D);
                cx.parallel(EventKind::Reciprocal, cx.t, kRecipLatency, mode, layer, -1);
                cx.parallel(EventKind::LayerNormPass, cx.t, std::uint64_t(D), mode, layer, -1,
                            BufferId::Feature, BufferId::Layer);
                if (cx.w) {
                    const int out_rq = QuantPlan::requant(cx.plan.mlp_hidden_shift,
                                                          cx.plan.weight_shift, cx.plan.act_shift);
                    TileMatrix strip(rows, D, p);
                    for (int r = 0; r < rows; ++r)
                        for (int c = 0; c < D; ++c)
                            strip.at(r, c) = saturate_i8(rne_shift(staged[size_t(i)].at(r, c), out_rq));
                    TileMatrix res = row_strip(cx.val_staged, i * p, rows, p);
                    TileMatrix z = saturating_add(strip, res);
                    store_strip(out_vals, z, i * p);
                    TileMatrix lns(rows, D, p);
                    const auto& g = last_layer ? cx.w->final_gamma
                                               : cx.w->layers[size_t(layer) + 1].ln1_gamma;
                    const auto& b = last_layer ? cx.w->final_beta
                                               : cx.w->layers[size_t(layer) + 1].ln1_beta;
                    for (int r = 0; r < rows; ++r) {
                        LayerNormRowState st = layernorm_pass1(&z.at(r, 0), D);
                        layernorm_pass2(&z.at(r, 0), D, st, g.data(), cx.plan.gamma_shift,
                                        b.data(), cx.plan.beta_shift, cx.plan.ln_shift,
                                        &lns.at(r, 0));
                    }
                    store_strip(ln_vals, lns, i * p);
                }
            }
        }
        cx.buffers.release(BufferId::Weight, std::int64_t(D) * wh_cols + wh_cols * std::int64_t(D));
    }
    cx.block(EventKind::LayerNormPass, std::uint64_t(D), mode, layer, -1);
    cx.stall_cycles += std::uint64_t(D);
    // staged residual fully consumed strip-by-strip
    cx.buffers.release(BufferId::Weight, std::int64_t(T) * D);

    if (cx.w) {
        cx.val_feature = out_vals;
        cx.val_layer = ln_vals;
    }
}

// y = LN(z_L) is produced by the last MLP pass; this final pass re-reads the
// stored rows and writes the result out, the only DRAM stores of the run.
void run_final_ln(Ctx& cx) {
    const int p = cx.hw.psys;
    const int D = cx.model.model_dim;
    const int T = cx.d.tokens;
    for (int i = 0; i < row_blocks(T, p); ++i) {
        int rows = std::min(p, T - i * p);
        cx.block(EventKind::LayerNormPass, std::uint64_t(D), Mode::FinalLn, -1, -1);
        cx.block(EventKind::LayerNormPass, std::uint64_t(D), Mode::FinalLn, -1, -1);
        cx.stall_cycles += 2ull * std::uint64_t(D);
        cx.issue_store(Mode::FinalLn, kOutputTensor, i, std::int64_t(rows) * D);
    }
}

}  // namespace

ScheduleResult run_inference_schedule(const ModelConfig& model, const HardwareConfig& hw,
                                      const EncoderWeights* weights, const TileMatrix* patches) {
    model.validate();
    hw.validate();
    if (weights && !patches)
        throw std::invalid_argument("value replay requires an input patch tensor");
    Ctx cx(model, hw);
    cx.w = weights;
    cx.patches = patches;

    ScheduleResult res;
    auto& rep = res.report;
    rep.per_layer.assign(size_t(model.num_layers), 0);

    cx.buffers.alloc(BufferId::Result, std::int64_t(hw.psys) * 2 * hw.psys);
    std::uint64_t t0 = cx.t;
    run_embed(cx);
    rep.embed_cycles = cx.t - t0;

    for (int l = 0; l < model.num_layers; ++l) {
        std::uint64_t ls = cx.t;
        run_msa(cx, l);
        rep.msa_cycles += cx.t - ls;
        std::uint64_t lp0 = cx.t;
        run_lp(cx, l);
        rep.lp_cycles += cx.t - lp0;
        std::uint64_t mlp0 = cx.t;
        run_mlp(cx, l);
        rep.mlp_cycles += cx.t - mlp0;
        rep.per_layer[size_t(l)] = cx.t - ls;
    }
    std::uint64_t f0 = cx.t;
    run_final_ln(cx);
    rep.final_ln_cycles = cx.t - f0;

    rep.total_cycles = cx.t;
    rep.stall_cycles = cx.stall_cycles;
    rep.latency_s = double(rep.total_cycles) / hw.clock_hz;
    rep.fps = 1.0 / rep.latency_s;
    rep.mlp_fraction = double(rep.mlp_cycles) / double(rep.total_cycles);

    for (const auto& spec : cx.buffers.specs)
        cx.trace.buffers.push_back({spec.id, cx.buffers.peak[int(spec.id)], spec.capacity});
    res.trace = std::move(cx.trace);
    if (weights) {
        res.output = cx.val_layer;  // final layernorm result
        res.has_output = true;
    }
    return res;
}

AuditVerdict audit_single_load(const ScheduleTrace& trace,
                               const std::vector<TensorInfo>& manifest,
                               std::int64_t input_bytes) {
    AuditVerdict v;
    std::map<std::pair<std::int32_t, std::int32_t>, int> seen;
    std::vector<std::int64_t> tensor_bytes(manifest.size(), 0);
    std::int64_t input_loaded = 0;
    for (const auto& tx : trace.dram) {
        if (tx.store) {
            if (tx.tensor != kOutputTensor) {
                v.intermediate_store_count += 1;
                if (v.failures.size() < 8)
                    v.failures.push_back("intermediate store of tensor id " +
                                         std::to_string(tx.tensor));
            }
            continue;
        }
        v.loaded_bytes += tx.bytes;
        int n = ++seen[{tx.tensor, tx.chunk}];
        if (n > 1) {
            v.duplicate_load_count += 1;
            if (v.failures.size() < 8) {
                std::string name = tx.tensor >= 0 && tx.tensor < std::int32_t(manifest.size())
                                       ? manifest[size_t(tx.tensor)].name
                                       : (tx.tensor == kInputTensor ? "input" : "?");
                v.failures.push_back("duplicate load: " + name + " chunk " +
                                     std::to_string(tx.chunk));
            }
        }
        if (tx.tensor >= 0 && tx.tensor < std::int32_t(manifest.size()))
            tensor_bytes[size_t(tx.tensor)] += tx.bytes;
        else if (tx.tensor == kInputTensor)
            input_loaded += tx.bytes;
    }
    std::int64_t manifest_total = 0;
    for (size_t i = 0; i < manifest.size(); ++i) {
        manifest_total += manifest[i].bytes();
        if (tensor_bytes[i] != manifest[i].bytes() && v.failures.size() < 8)
            v.failures.push_back("tensor " + manifest[i].name + " loaded " +
                                 std::to_string(tensor_bytes[i]) + " of " +
                                 std::to_string(manifest[i].bytes()) + " bytes");
    }
    v.expected_bytes = manifest_total + input_bytes;
    bool bytes_ok = v.loaded_bytes == v.expected_bytes && input_loaded == input_bytes;
    v.pass = v.duplicate_load_count == 0 && v.intermediate_store_count == 0 && bytes_ok;
    if (!bytes_ok && v.failures.size() < 8)
        v.failures.push_back("loaded bytes " + std::to_string(v.loaded_bytes) +
                             " != expected " + std::to_string(v.expected_bytes));
    return v;
}

void write_trace(const ScheduleTrace& trace, const std::string& path) {
    std::ofstream out(path);
    out << "# cycle_start cycle_end kind mode layer head src dst bytes block_row block_col\n";
    for (const auto& e : trace.events)
        out << e.cycle_start << " " << e.cycle_end << " " << event_kind_name(e.kind) << " "
            << mode_name(e.mode) << " " << e.layer << " " << e.head << " "
            << buffer_name(e.src) << " " << buffer_name(e.dst) << " " << e.bytes << " "
            << e.block_row << " " << e.block_col << "\n";
}

void write_dram_log(const ScheduleTrace& trace, const std::string& path) {
    std::ofstream out(path);
    out << "# issue complete dir mode tensor chunk bytes\n";
    for (const auto& d : trace.dram)
        out << d.issue_cycle << " " << d.complete_cycle << " " << (d.store ? "store" : "load")
            << " " << mode_name(d.mode) << " " << d.tensor << " " << d.chunk << " " << d.bytes
            << "\n";
}

}  // namespace mevit
