#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mevit/config.hpp"
#include "mevit/functional.hpp"
#include "mevit/weights.hpp"

namespace mevit {

// ---------------------------------------------------------------------------
// Cycle model
//
// The systolic array retires one P x 2P output block pair per padded
// inner-dimension sweep. Each pair additionally pays kBlockPairOverhead
// cycles of pipeline restart; the constant is pinned here and echoed in
// every report. Bias+ReLU in MLP mode stalls the array for P cycles per
// block pair; the per-head softmax tail (reciprocal + final pass) cannot
// overlap any multiply and costs kRecipLatency + T cycles; every mode ends
// with one non-overlapped layernorm pass of D cycles (P rows in parallel,
// one element per lane per cycle).
// ---------------------------------------------------------------------------

constexpr int kBlockPairOverhead = 6;
constexpr int kRecipLatency = 32;

enum class Mode : std::uint8_t { Embed, Msa, Lp, Mlp, FinalLn };
const char* mode_name(Mode m);

enum class EventKind : std::uint8_t {
    Bmm, BufferMove, DramLoad, LayerNormPass, SoftmaxPass,
    Reciprocal, Stall, ResidualAdd, Activation,
};
const char* event_kind_name(EventKind k);

enum class BufferId : std::uint8_t {
    Weight, Feature, Layer, Q, K, V, Result, S1, S2, None,
};

struct BufferSpec {
    BufferId id;
    const char* name;
    std::int64_t capacity;       // int8 entries
    const char* storage_class;   // "block-ram" | "lut-ram"
};
std::vector<BufferSpec> buffer_specs(const ModelConfig& model, const DerivedDims& dims,
                                     const HardwareConfig& hw);

struct ScheduleEvent {
    std::uint64_t cycle_start = 0;
    std::uint64_t cycle_end = 0;
    EventKind kind = EventKind::Bmm;
    Mode mode = Mode::Embed;
    std::int16_t layer = -1;     // -1 outside layers
    std::int16_t head = -1;
    BufferId src = BufferId::None;
    BufferId dst = BufferId::None;
    std::int32_t bytes = 0;      // moves / adds
    std::int16_t block_row = -1;
    std::int16_t block_col = -1;
    bool array_bound = false;    // claims the systolic array timeline
    bool blocks_array() const { return array_bound; }
};

struct DramTransaction {
    std::uint64_t issue_cycle = 0;
    std::uint64_t complete_cycle = 0;
    bool store = false;
    Mode mode = Mode::Embed;
    std::int32_t tensor = -1;    // index into the manifest; see kInputTensor
    std::int32_t chunk = 0;      // abstract sub-tensor chunk id
    std::int64_t bytes = 0;
};

// Synthetic tensor ids appended after the weight manifest.
constexpr std::int32_t kInputTensor = -2;
constexpr std::int32_t kOutputTensor = -3;

struct BufferHighWater {
    BufferId id;
    std::int64_t peak = 0;
    std::int64_t capacity = 0;
};

struct ScheduleTrace {
    std::vector<ScheduleEvent> events;
    std::vector<DramTransaction> dram;
    std::vector<BufferHighWater> buffers;
    std::uint64_t fnv_hash() const;   // determinism fingerprint
};

struct CycleReport {
    std::uint64_t embed_cycles = 0;
    std::uint64_t msa_cycles = 0;     // all heads, all layers
    std::uint64_t lp_cycles = 0;      // output projections, all layers
    std::uint64_t mlp_cycles = 0;
    std::uint64_t final_ln_cycles = 0;
    std::uint64_t stall_cycles = 0;   // activation + drain + dram stalls + ln tails
    std::vector<std::uint64_t> per_layer;
    std::uint64_t total_cycles = 0;
    double latency_s = 0;
    double fps = 0;
    double mlp_fraction = 0;
};

struct ScheduleResult {
    CycleReport report;
    ScheduleTrace trace;
    TileMatrix output;               // y, populated when weights supplied
    bool has_output = false;
};

// Closed-form mode costs, the cycle-accounting contract the replay follows.
std::uint64_t schedule_lp_cycles(int rows, int inner, int cols, int psys);
std::uint64_t schedule_msa_cycles(const DerivedDims& d, const ModelConfig& m, int psys);
std::uint64_t schedule_mlp_cycles(const DerivedDims& d, const ModelConfig& m, int psys);

// Full inference replay. Weights are optional: without them the replay
// produces the identical trace and cycle accounting without activation
// values.
ScheduleResult run_inference_schedule(const ModelConfig& model, const HardwareConfig& hw,
                                      const EncoderWeights* weights = nullptr,
                                      const TileMatrix* patches = nullptr);

// --- Single-load audit ------------------------------------------------------

struct AuditVerdict {
    bool pass = false;
    std::int64_t duplicate_load_count = 0;       // chunks loaded more than once
    std::int64_t intermediate_store_count = 0;   // stores of non-output tensors
    std::int64_t loaded_bytes = 0;
    std::int64_t expected_bytes = 0;             // manifest + input
    std::vector<std::string> failures;
};

AuditVerdict audit_single_load(const ScheduleTrace& trace,
                               const std::vector<TensorInfo>& manifest,
                               std::int64_t input_bytes);

// Line-delimited trace export, one event per line.
void write_trace(const ScheduleTrace& trace, const std::string& path);
void write_dram_log(const ScheduleTrace& trace, const std::string& path);

}  // namespace mevit
