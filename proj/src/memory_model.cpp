#include "kvtier/memory_model.hpp"

#include <algorithm>

#include "kvtier/errors.hpp"

namespace kvtier {

MemoryConfig default_memory_config() {
    MemoryConfig cfg;
    cfg.hbm_bandwidth = 4.9e12;
    cfg.link_bandwidth = 900e9;
    cfg.dram_bandwidth = 500e9;
    cfg.hbm_capacity = 24'000'000'000ULL;
    cfg.dram_capacity = 480'000'000'000ULL;
    return cfg;
}

void validate_memory_config(const MemoryConfig& cfg) {
    if (!(cfg.hbm_bandwidth > 0)) throw validation_error("memory.hbm_bandwidth: must be > 0");
    if (!(cfg.link_bandwidth > 0)) throw validation_error("memory.link_bandwidth: must be > 0");
    if (!(cfg.dram_bandwidth > 0)) throw validation_error("memory.dram_bandwidth: must be > 0");
    if (cfg.hbm_capacity == 0) throw validation_error("memory.hbm_capacity: must be > 0");
    if (cfg.dram_capacity == 0) throw validation_error("memory.dram_capacity: must be > 0");
}

double hbm_step_latency(const StepTraffic& t, const MemoryConfig& cfg) {
    const double bytes = static_cast<double>(t.hbm_read) + static_cast<double>(t.hbm_write) +
                         static_cast<double>(t.migrate_in) + static_cast<double>(t.migrate_out);
    return bytes / cfg.hbm_bandwidth;
}

double dram_step_latency(const StepTraffic& t, const MemoryConfig& cfg) {
    const double read_term =
        static_cast<double>(t.dram_read) / std::min(cfg.link_bandwidth, cfg.dram_bandwidth);
    const double link_out =
        (static_cast<double>(t.dram_write) + static_cast<double>(t.migrate_out)) / cfg.link_bandwidth;
    const double link_in = static_cast<double>(t.migrate_in) / cfg.link_bandwidth;
    const double channel = (static_cast<double>(t.dram_write) + static_cast<double>(t.migrate_in) +
                            static_cast<double>(t.migrate_out)) /
                           cfg.dram_bandwidth;
    return read_term + std::max({link_out, link_in, channel});
}

double step_latency(const StepTraffic& t, const MemoryConfig& cfg) {
    return std::max(hbm_step_latency(t, cfg), dram_step_latency(t, cfg));
}

double total_latency(std::span<const StepTraffic> steps, const MemoryConfig& cfg) {
    double sum = 0;
    for (const StepTraffic& t : steps) sum += step_latency(t, cfg);
    return sum;
}

CapacityCheck check_capacity(std::uint64_t hbm_resident_bytes, const MemoryConfig& cfg) {
    CapacityCheck result;
    result.feasible = hbm_resident_bytes <= cfg.hbm_capacity;
    result.usage = static_cast<double>(hbm_resident_bytes) / static_cast<double>(cfg.hbm_capacity);
    return result;
}

} // namespace kvtier
