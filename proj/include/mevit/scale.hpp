#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mevit/config.hpp"
#include "mevit/traffic.hpp"

namespace mevit {

// Analytical design-space tools: computational-efficiency sweeps, roofline
// points, multi-PE scaling under a shared bandwidth cap, and BRAM banking
// estimates.

struct EfficiencyPoint {
    int psys = 0;
    double efficiency = 0;  // exact MACs / padded-block MACs, in (0, 1]
};

// Exact multiply counts for one encoder layer (QKV, QK^T, softmax*V, W^O,
// both MLP matmuls) and for a full inference including the embedding.
std::int64_t layer_exact_macs(const ModelConfig& model);
std::int64_t inference_exact_macs(const ModelConfig& model);

// Padded-block MACs for one layer: rows and output columns round up to
// P_SYS blocks, the streamed inner dimension does not.
std::int64_t layer_padded_macs(const ModelConfig& model, int psys);

// Systolic-array-active cycles for a full inference (block streaming only,
// no pipeline restarts or stalls); the utilization denominator for GOPS.
std::uint64_t array_active_cycles(const ModelConfig& model, int psys);

double efficiency_at(const ModelConfig& model, int psys);
std::vector<EfficiencyPoint> efficiency_sweep(const ModelConfig& model, int p_lo, int p_hi);
std::vector<int> local_maxima(const std::vector<EfficiencyPoint>& sweep);

struct RooflinePoint {
    double operational_intensity = 0;  // ops per byte moved
    double peak_ops = 0;               // dsp_used * 2 * clock
    double attainable_ops = 0;         // min(peak, bandwidth * intensity)
    double achieved_ops = 0;           // exact ops / inference latency
    double array_ops = 0;              // exact ops / array-active time
};

RooflinePoint roofline(const ModelConfig& model, const HardwareConfig& hw,
                       const TrafficReport& traffic, const CycleReport& cycles);

enum class TrafficPolicy { MeVit, Baseline };

struct MultiPeResult {
    int pe_count = 0;
    double fps = 0;
    double ops = 0;               // exact ops/s at the throttled rate
    double array_gops_unthrottled = 0;
    double peak_gops = 0;
    double bandwidth_demand = 0;  // bytes/s
    bool bandwidth_limited = false;
};

MultiPeResult multi_pe(const ModelConfig& model, const HardwareConfig& hw, int pe_count,
                       TrafficPolicy policy, const CycleReport& cycles,
                       const TrafficReport& me_traffic, const TrafficReport& base_traffic);

// Largest PE count whose aggregate demand fits the bandwidth cap.
int max_unconstrained_pes(const MultiPeResult& one_pe, const HardwareConfig& hw, int k_limit);

struct BramEstimate {
    struct Buffer {
        std::string name;
        std::int64_t entries = 0;
        int banks = 0;
    };
    std::vector<Buffer> buffers;  // block-ram resident: Weight, Feature, Layer
    int total_banks = 0;
    int rounding = 0;             // bank-count granularity used
    int reference_total = 0;      // reference design figure for builtin models, 0 if none
};

BramEstimate bram_estimate(const ModelConfig& model, const HardwareConfig& hw);

}  // namespace mevit
