#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "mevit/schedule.hpp"

namespace mevit {

// Per-mode DRAM traffic and bandwidth. Bandwidth normalization is
// equal-latency: both policies are divided by the same (single-load) mode
// latencies, so improvement ratios reduce to byte-count ratios.

struct ModeTraffic {
    std::int64_t bytes_loaded = 0;
    std::int64_t bytes_stored = 0;
    std::uint64_t cycles = 0;
    double seconds = 0;
    double bandwidth = 0;  // bytes/s, (loaded+stored)/seconds
    std::int64_t total() const { return bytes_loaded + bytes_stored; }
};

constexpr int kNumModes = 5;  // embed, msa, lp, mlp, final_ln

struct TrafficReport {
    std::array<ModeTraffic, kNumModes> modes;  // indexed by Mode
    std::int64_t total_loaded = 0;
    std::int64_t total_stored = 0;
    double latency_s = 0;
    double average_bandwidth = 0;
    double peak_bandwidth = 0;
    Mode peak_mode = Mode::Embed;
    std::int64_t total() const { return total_loaded + total_stored; }
};

// Unoptimized-comparison policy: which traffic the blocked baseline pays on
// top of streaming each weight matrix once per matmul.
struct BaselinePolicy {
    // Activation operand re-enters the array once per output column block
    // (only the current weight column strip is buffered on chip).
    bool reload_activations_per_col_block = true;
    // Every computed output block is written back.
    bool write_back_outputs = true;
    // Softmax and layernorm run on the host: one extra store + load of each
    // affected matrix.
    bool softmax_cpu_round_trip = true;
    bool layernorm_cpu_round_trip = true;
    // Residual additions ride along with the layernorm trip (same matrix,
    // one host visit).
    bool residual_cpu_round_trip = false;
};

// One blocked matmul walked block-by-block under the baseline rules, output
// column strips outermost so the reuse rule fires across each inner sweep.
// Byte counts use unpadded (clipped) blocks.
struct BlockWalkBytes {
    std::int64_t loads = 0;
    std::int64_t stores = 0;
    std::int64_t multiplies = 0;
    std::int64_t reuse_hits = 0;  // block loads skipped by the reuse rule
};
BlockWalkBytes baseline_matmul_bytes(int rows, int inner, int cols, int psys,
                                     const BaselinePolicy& policy = {});

// Byte counts taken from the audited DRAM log of a completed run.
TrafficReport single_load_traffic(const ModelConfig& model, const HardwareConfig& hw,
                                  const ScheduleResult& run);

// Simulates every encoder BMM under the baseline rules at block granularity,
// at the single-load run's mode latencies. Optionally emits a synthetic
// (duplicate-bearing) DRAM log for audit experiments.
TrafficReport baseline_traffic(const ModelConfig& model, const HardwareConfig& hw,
                               const CycleReport& cycles, const BaselinePolicy& policy = {},
                               ScheduleTrace* synthetic_log = nullptr);

struct ImprovementRatios {
    double total_ratio = 0;
    double peak_ratio = 0;
    Mode peak_mode = Mode::Embed;  // mode attaining the per-mode maximum
};

ImprovementRatios improvement_ratios(const TrafficReport& me, const TrafficReport& base);

// Comma-separated table, one row per mode.
void write_traffic_csv(const TrafficReport& me, const TrafficReport* baseline,
                       const std::string& path, const std::string& header_note);

}  // namespace mevit
