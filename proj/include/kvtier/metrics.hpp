#ifndef KVTIER_METRICS_HPP
#define KVTIER_METRICS_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "kvtier/memory_model.hpp"
#include "kvtier/trace.hpp"

namespace kvtier {

struct StepRecord {
    std::uint32_t n = 0;
    std::uint32_t l = 0;
    StepTraffic traffic;
    double hbm_latency = 0;
    double dram_latency = 0;
    double latency = 0;
};

// Aggregated outcome of one policy run over one trace.
struct SimulationReport {
    std::string point = "base";  // sweep-point label
    std::string policy;
    std::uint32_t decode_tokens = 0;
    double total_latency = 0;  // seconds
    double tokens_per_sec = 0;
    double hbm_hit_rate = 0;  // fraction of KV read bytes served from HBM
    std::uint64_t hbm_read_bytes = 0;
    std::uint64_t dram_read_bytes = 0;
    std::uint64_t hbm_write_bytes = 0;
    std::uint64_t dram_write_bytes = 0;
    std::uint64_t migrate_in_bytes = 0;
    std::uint64_t migrate_out_bytes = 0;
    std::uint64_t weights_read_bytes = 0;
    std::uint64_t kv_hit_entries = 0;
    std::uint64_t kv_miss_entries = 0;
    double peak_hbm_usage = 0;    // max P_H observed
    std::uint64_t scenario_hash = 0;   // trace + memory config
    std::uint64_t run_fingerprint = 0; // scenario + policy + seed
    std::vector<StepRecord> per_step;  // populated on request only
};

// Stable hash of the trace contents plus the memory configuration; two
// reports are comparable iff these match.
std::uint64_t scenario_hash(const DecodeTrace& trace, const MemoryConfig& cfg);
std::uint64_t run_fingerprint(std::uint64_t scenario, const std::string& policy, std::uint64_t seed);

// Builds the report from per-step records. decode_tokens comes from the
// header; hit rate is byte-weighted over KV reads with weights excluded.
SimulationReport summarize(std::vector<StepRecord> per_step, const TraceHeader& header,
                           const std::string& policy, std::uint64_t scenario,
                           std::uint64_t fingerprint, bool keep_per_step);

// tokens/s ratio vs a baseline run of the same trace + memory config.
// Throws validation_error on a scenario fingerprint mismatch.
double normalize(const SimulationReport& report, const SimulationReport& baseline);

// Flat key=value block, one field per line.
std::string report_kv_block(const SimulationReport& report);

// CSV row form; parse_report_csv_row inverts it (per-step detail excluded).
std::string report_csv_header();
std::string report_csv_row(const SimulationReport& report);
SimulationReport parse_report_csv_row(const std::string& line);

std::string per_step_csv_header();
void write_per_step_csv(const SimulationReport& report, std::ostream& out);

} // namespace kvtier

#endif
