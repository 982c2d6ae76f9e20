#pragma once

#include <cstdint>
#include <string>

#include "mevit/scale.hpp"
#include "mevit/schedule.hpp"
#include "mevit/traffic.hpp"

namespace mevit {

// Every output file starts with "# manifest <hash>" so results trace back to
// exact inputs.
struct RunManifest {
    std::string command;
    std::string model_label;
    std::string model_config_path;
    std::string hw_config_path;
    std::uint64_t seed = 0;
    std::string out_dir;
    std::string tool_version = "mevit 1.0";
    ModelConfig model;
    HardwareConfig hw;

    std::string canonical() const;
    std::uint64_t hash() const;
};

std::uint64_t fnv1a(const std::string& s);

void write_summary(const RunManifest& man, const CycleReport& cycles,
                   const TrafficReport& traffic, const AuditVerdict& audit,
                   const std::string& path);
void write_mode_breakdown_csv(const RunManifest& man, const CycleReport& cycles,
                              const std::string& path);
void write_bandwidth_breakdown_csv(const RunManifest& man, const TrafficReport& traffic,
                                   const std::string& path);
void write_header(std::ostream& out, const RunManifest& man);

}  // namespace mevit
