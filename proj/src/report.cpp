#include "mevit/report.hpp"

#include <fstream>
#include <sstream>

namespace mevit {

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string RunManifest::canonical() const {
    std::ostringstream os;
    os << command << "|" << model_label << "|" << model_config_path << "|" << hw_config_path
       << "|" << seed << "|" << tool_version << "|" << model.name << "," << model.image_size
       << "," << model.patch_size << "," << model.model_dim << "," << model.num_heads << ","
       << model.num_layers << "," << model.mlp_ratio << "|" << hw.psys << "," << hw.clock_hz
       << "," << hw.dram_bandwidth << "," << hw.dsp_count << "," << hw.bram36_count << ","
       << hw.bram_bank_depth;
    return os.str();
}

std::uint64_t RunManifest::hash() const { return fnv1a(canonical()); }

void write_header(std::ostream& out, const RunManifest& man) {
    out << "# manifest " << std::hex << man.hash() << std::dec << "\n";
    out << "# " << man.tool_version << " " << man.command << " model=" << man.model.name
        << " psys=" << man.hw.psys << " clock_hz=" << man.hw.clock_hz
        << " bandwidth=" << man.hw.dram_bandwidth << " seed=" << man.seed << "\n";
}

void write_summary(const RunManifest& man, const CycleReport& cycles,
                   const TrafficReport& traffic, const AuditVerdict& audit,
                   const std::string& path) {
    std::ofstream out(path);
    write_header(out, man);
    out << "model = " << man.model.name << "\n"
        << "image_size = " << man.model.image_size << "\n"
        << "model_dim = " << man.model.model_dim << "\n"
        << "num_heads = " << man.model.num_heads << "\n"
        << "num_layers = " << man.model.num_layers << "\n"
        << "psys = " << man.hw.psys << "\n"
        << "clock_hz = " << man.hw.clock_hz << "\n\n"
        << "cycles.embed = " << cycles.embed_cycles << "\n"
        << "cycles.msa = " << cycles.msa_cycles << "\n"
        << "cycles.lp = " << cycles.lp_cycles << "\n"
        << "cycles.mlp = " << cycles.mlp_cycles << "\n"
        << "cycles.final_ln = " << cycles.final_ln_cycles << "\n"
        << "cycles.stall = " << cycles.stall_cycles << "\n"
        << "cycles.total = " << cycles.total_cycles << "\n"
        << "latency_ms = " << cycles.latency_s * 1e3 << "\n"
        << "fps = " << cycles.fps << "\n"
        << "mlp_fraction = " << cycles.mlp_fraction << "\n\n"
        << "bytes.loaded = " << traffic.total_loaded << "\n"
        << "bytes.stored = " << traffic.total_stored << "\n"
        << "bandwidth.average_gbs = " << traffic.average_bandwidth / 1e9 << "\n"
        << "bandwidth.peak_gbs = " << traffic.peak_bandwidth / 1e9 << "\n"
        << "bandwidth.peak_mode = " << mode_name(traffic.peak_mode) << "\n\n"
        << "audit.single_load = " << (audit.pass ? "pass" : "fail") << "\n"
        << "audit.duplicate_loads = " << audit.duplicate_load_count << "\n"
        << "audit.intermediate_stores = " << audit.intermediate_store_count << "\n\n"
        << "# quantization: symmetric per-tensor int8, power-of-two scales,\n"
        << "# round-to-nearest-even requantization, 32-bit accumulators.\n"
        << "# cycle model: one P x 2P output block pair per padded inner sweep\n"
        << "# plus " << kBlockPairOverhead << " restart cycles; relu stall = P per block pair;\n"
        << "# reciprocal latency " << kRecipLatency << "; per-head softmax tail and one\n"
        << "# trailing layernorm pass per mode are not overlapped.\n";
}

void write_mode_breakdown_csv(const RunManifest& man, const CycleReport& cycles,
                              const std::string& path) {
    std::ofstream out(path);
    write_header(out, man);
    out << "mode,cycles,fraction\n";
    double total = double(cycles.total_cycles);
    out << "embed," << cycles.embed_cycles << "," << cycles.embed_cycles / total << "\n";
    out << "msa," << cycles.msa_cycles << "," << cycles.msa_cycles / total << "\n";
    out << "lp," << cycles.lp_cycles << "," << cycles.lp_cycles / total << "\n";
    out << "mlp," << cycles.mlp_cycles << "," << cycles.mlp_cycles / total << "\n";
    out << "final_ln," << cycles.final_ln_cycles << "," << cycles.final_ln_cycles / total << "\n";
}

void write_bandwidth_breakdown_csv(const RunManifest& man, const TrafficReport& traffic,
                                   const std::string& path) {
    std::ofstream out(path);
    write_header(out, man);
    out << "mode,bytes_loaded,bytes_stored,seconds,bandwidth_gbs\n";
    for (int i = 0; i < kNumModes; ++i) {
        const auto& m = traffic.modes[size_t(i)];
        out << mode_name(Mode(i)) << "," << m.bytes_loaded << "," << m.bytes_stored << ","
            << m.seconds << "," << m.bandwidth / 1e9 << "\n";
    }
}

}  // namespace mevit
