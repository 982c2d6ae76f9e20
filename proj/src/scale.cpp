#include "mevit/scale.hpp"

#include <algorithm>
#include <stdexcept>

#include "mevit/schedule.hpp"

namespace mevit {

namespace {

struct MatmulShape {
    std::int64_t rows, inner, cols;
};

// Every matmul in one encoder layer.
std::vector<MatmulShape> layer_matmuls(const ModelConfig& m) {
    HardwareConfig hw;  // dims do not depend on psys
    DerivedDims d = derive_dims(m, hw);
    std::vector<MatmulShape> v;
    for (int h = 0; h < 3 * m.num_heads; ++h) v.push_back({d.tokens, m.model_dim, d.head_dim});
    for (int h = 0; h < m.num_heads; ++h) {
        v.push_back({d.tokens, d.head_dim, d.tokens});   // scores
        v.push_back({d.tokens, d.tokens, d.head_dim});   // softmax * V
    }
    v.push_back({d.tokens, m.model_dim, m.model_dim});   // W^O
    v.push_back({d.tokens, m.model_dim, d.hidden_dim});  // hidden
    v.push_back({d.tokens, d.hidden_dim, m.model_dim});  // output
    return v;
}

}  // namespace

std::int64_t layer_exact_macs(const ModelConfig& model) {
    std::int64_t total = 0;
    for (const auto& s : layer_matmuls(model)) total += s.rows * s.inner * s.cols;
    return total;
}

std::int64_t inference_exact_macs(const ModelConfig& model) {
    HardwareConfig hw;
    DerivedDims d = derive_dims(model, hw);
    return std::int64_t(d.num_patches) * d.patch_dim * model.model_dim +
           std::int64_t(model.num_layers) * layer_exact_macs(model);
}

std::int64_t layer_padded_macs(const ModelConfig& model, int psys) {
    std::int64_t total = 0;
    for (const auto& s : layer_matmuls(model))
        total += std::int64_t(padded(int(s.rows), psys)) * s.inner *
                 padded(int(s.cols), psys);
    return total;
}

std::uint64_t array_active_cycles(const ModelConfig& model, int psys) {
    HardwareConfig hw;
    DerivedDims d = derive_dims(model, hw);
    const int p = psys;
    auto bmm = [&](std::int64_t rows, std::int64_t inner, std::int64_t cols) {
        return std::uint64_t(row_blocks(int(rows), p)) * col_pairs(int(cols), p) *
               padded(int(inner), p);
    };
    std::uint64_t layer = 0;
    for (int h = 0; h < model.num_heads; ++h) {
        layer += 3 * bmm(d.tokens, model.model_dim, d.head_dim);
        layer += bmm(d.tokens, d.head_dim, d.tokens);
        layer += bmm(d.tokens, d.tokens, d.head_dim);
    }
    layer += bmm(d.tokens, model.model_dim, model.model_dim);
    layer += bmm(d.tokens, model.model_dim, d.hidden_dim);
    layer += std::uint64_t(row_blocks(d.tokens, p)) * col_blocks(d.hidden_dim, p) *
             col_pairs(model.model_dim, p) * std::uint64_t(p);
    return bmm(d.num_patches, d.patch_dim, model.model_dim) +
           std::uint64_t(model.num_layers) * layer;
}

double efficiency_at(const ModelConfig& model, int psys) {
    return double(layer_exact_macs(model)) / double(layer_padded_macs(model, psys));
}

std::vector<EfficiencyPoint> efficiency_sweep(const ModelConfig& model, int p_lo, int p_hi) {
    if (p_lo < 1 || p_hi < p_lo) throw std::invalid_argument("invalid sweep range");
    std::vector<EfficiencyPoint> out;
    for (int p = p_lo; p <= p_hi; ++p) out.push_back({p, efficiency_at(model, p)});
    return out;
}

std::vector<int> local_maxima(const std::vector<EfficiencyPoint>& sweep) {
    std::vector<int> peaks;
    for (size_t i = 1; i + 1 < sweep.size(); ++i)
        if (sweep[i].efficiency > sweep[i - 1].efficiency &&
            sweep[i].efficiency > sweep[i + 1].efficiency)
            peaks.push_back(sweep[i].psys);
    return peaks;
}

RooflinePoint roofline(const ModelConfig& model, const HardwareConfig& hw,
                       const TrafficReport& traffic, const CycleReport& cycles) {
    RooflinePoint r;
    double ops = double(inference_exact_macs(model));
    r.operational_intensity = ops / double(traffic.total());
    r.peak_ops = double(hw.dsp_used()) * hw.packing_factor * hw.clock_hz;
    r.attainable_ops = std::min(r.peak_ops, hw.dram_bandwidth * r.operational_intensity);
    r.achieved_ops = ops / cycles.latency_s;
    r.array_ops = ops * hw.clock_hz / double(array_active_cycles(model, hw.psys));
    return r;
}

MultiPeResult multi_pe(const ModelConfig& model, const HardwareConfig& hw, int pe_count,
                       TrafficPolicy policy, const CycleReport& cycles,
                       const TrafficReport& me_traffic, const TrafficReport& base_traffic) {
    if (pe_count < 1) throw std::invalid_argument("pe_count must be >= 1");
    const TrafficReport& t = policy == TrafficPolicy::MeVit ? me_traffic : base_traffic;
    MultiPeResult r;
    r.pe_count = pe_count;
    r.bandwidth_demand = double(pe_count) * t.average_bandwidth;
    r.bandwidth_limited = r.bandwidth_demand > hw.dram_bandwidth;
    double scale = r.bandwidth_limited ? hw.dram_bandwidth / r.bandwidth_demand : 1.0;
    r.fps = double(pe_count) * cycles.fps * scale;
    double ops = double(inference_exact_macs(model));
    r.ops = r.fps * ops;
    r.array_gops_unthrottled =
        double(pe_count) * ops * hw.clock_hz / double(array_active_cycles(model, hw.psys)) / 1e9;
    r.peak_gops = double(pe_count) * double(hw.dsp_used()) * hw.packing_factor * hw.clock_hz / 1e9;
    return r;
}

int max_unconstrained_pes(const MultiPeResult& one_pe, const HardwareConfig& hw, int k_limit) {
    double per_pe = one_pe.bandwidth_demand;  // demand at k == 1
    int k = 0;
    while (k < k_limit && double(k + 1) * per_pe <= hw.dram_bandwidth) ++k;
    return k;
}

BramEstimate bram_estimate(const ModelConfig& model, const HardwareConfig& hw) {
    DerivedDims d = derive_dims(model, hw);
    BramEstimate e;
    // Bank counts round to the packed access width of the systolic array.
    e.rounding = std::max(hw.psys, 32);
    auto banks = [&](std::int64_t entries) {
        int b = int((entries + hw.bram_bank_depth - 1) / hw.bram_bank_depth);
        return ((b + e.rounding - 1) / e.rounding) * e.rounding;
    };
    const std::int64_t D = model.model_dim;
    const std::int64_t wide = std::max<std::int64_t>(D, d.patch_dim);
    e.buffers.push_back({"Weight", wide * D, banks(wide * D)});
    e.buffers.push_back({"Feature", std::int64_t(d.tokens) * D, banks(std::int64_t(d.tokens) * D)});
    e.buffers.push_back({"Layer", std::int64_t(d.tokens) * D, banks(std::int64_t(d.tokens) * D)});
    for (const auto& b : e.buffers) e.total_banks += b.banks;
    // Reference design totals for the builtin variants (reported for
    // comparison, never asserted).
    if (model.name == "ViT-B" || model.name == "DeiT-B") e.reference_total = 288;
    if (model.name == "DeiT-S") e.reference_total = 176;
    if (model.name == "DeiT-T") e.reference_total = 144;
    return e;
}

}  // namespace mevit
