#ifndef KVTIER_MEMORY_MODEL_HPP
#define KVTIER_MEMORY_MODEL_HPP

#include <cstdint>
#include <span>

namespace kvtier {

// Two-tier memory system: on-package HBM plus off-package DRAM reached
// over a full-duplex serial link (uni-directional bandwidth
// link_bandwidth) backed by DRAM channels (dram_bandwidth).
struct MemoryConfig {
    double hbm_bandwidth = 0;   // bytes/s
    double link_bandwidth = 0;  // bytes/s, per direction
    double dram_bandwidth = 0;  // bytes/s
    std::uint64_t hbm_capacity = 0;   // bytes
    std::uint64_t dram_capacity = 0;  // bytes
};

// GH200-like defaults: HBM 4.9 TB/s / 24 GB, link 900 GB/s,
// DRAM 500 GB/s / 480 GB.
MemoryConfig default_memory_config();

// Throws validation_error naming the offending field.
void validate_memory_config(const MemoryConfig& cfg);

// Byte volumes moved during one decode step (n, l). All exact integers so
// traffic accounting stays auditable; time is derived in double.
struct StepTraffic {
    std::uint64_t hbm_read = 0;     // H^r: weights + KV served from HBM
    std::uint64_t hbm_write = 0;    // H^w: new KV entry written to HBM
    std::uint64_t dram_read = 0;    // E^r: KV served from off-package DRAM
    std::uint64_t dram_write = 0;   // E^w: new KV entry written to DRAM
    std::uint64_t migrate_out = 0;  // M^o: HBM -> DRAM
    std::uint64_t migrate_in = 0;   // M^i: DRAM -> HBM

    bool operator==(const StepTraffic&) const = default;
};

// (H^r + H^w + M^i + M^o) / B_h
double hbm_step_latency(const StepTraffic& t, const MemoryConfig& cfg);

// E^r / min(B_k, B_d)
//   + max{ (E^w + M^o)/B_k, M^i/B_k, (E^w + M^i + M^o)/B_d }
// The three max terms are the outbound link lane, the inbound link lane,
// and the shared internal DRAM channel.
double dram_step_latency(const StepTraffic& t, const MemoryConfig& cfg);

// max of the two tier latencies.
double step_latency(const StepTraffic& t, const MemoryConfig& cfg);

// Sum of step_latency over all steps; empty sequence -> 0.
double total_latency(std::span<const StepTraffic> steps, const MemoryConfig& cfg);

struct CapacityCheck {
    bool feasible = false;
    double usage = 0;  // P_H: resident / capacity
};

// Feasible iff hbm_resident_bytes <= hbm_capacity.
CapacityCheck check_capacity(std::uint64_t hbm_resident_bytes, const MemoryConfig& cfg);

} // namespace kvtier

#endif
