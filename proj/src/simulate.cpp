#include "kvtier/simulate.hpp"

#include <algorithm>
#include <optional>
#include <string>

#include "kvtier/errors.hpp"

namespace kvtier {

SimulationReport run_policy(const DecodeTrace& trace, const MemoryConfig& cfg,
                            const PolicySpec& spec, const SimulateOptions& options) {
    validate_trace(trace);
    validate_memory_config(cfg);
    const TraceHeader& h = trace.header;
    if (h.kv_footprint_bytes() > cfg.dram_capacity)
        throw infeasible_error("trace KV footprint (" + std::to_string(h.kv_footprint_bytes()) +
                               " B) exceeds DRAM capacity (" + std::to_string(cfg.dram_capacity) +
                               " B)");
    if ((spec.type == PolicyType::Lookahead || spec.type == PolicyType::PageGranularity)) {
        if (spec.window < 1) throw validation_error("window: must be >= 1");
        if (!(spec.ratio >= 0 && spec.ratio <= 1))
            throw validation_error("ratio: must be in [0, 1]");
    }

    const std::string label =
        options.label_override.empty() ? policy_label(spec) : options.label_override;
    const bool unlimited = spec.type == PolicyType::UnlimitedHbm;

    PlacementState state(h, cfg, unlimited);
    std::optional<SlidingLookahead> window;
    if (spec.type == PolicyType::Lookahead || spec.type == PolicyType::PageGranularity)
        window.emplace(trace, spec.window);

    std::vector<StepRecord> records;
    records.reserve(trace.steps.size());
    double peak_usage = 0;
    std::uint64_t global_step = 0;

    for (const StepAccess& access : trace.steps) {
        const std::uint32_t n = access.n;
        const std::uint32_t l = access.l;
        if (window) window->position(n);

        ScheduleDecision decision;
        switch (spec.type) {
            case PolicyType::UnlimitedHbm:
                decision = decide_unlimited(state, n, l);
                break;
            case PolicyType::Static:
                decision = decide_static(state, n, l);
                break;
            case PolicyType::ReactiveLru:
                decision = decide_reactive(state, access, n, l);
                break;
            case PolicyType::Lookahead:
                decision = decide_lookahead(state, window->layer(l), n, l, spec.ratio);
                break;
            case PolicyType::PageGranularity:
                decision = decide_page(state, window->layer(l), n, l, spec.page_size, spec.ratio);
                break;
        }

        DecisionTraffic applied;
        try {
            applied = state.apply_decision(decision, n, l);
        } catch (const infeasible_error& e) {
            throw infeasible_error("policy " + label + ": " + e.what());
        }
        const ReadTraffic reads = state.read_traffic(access, h.weight_bytes_per_layer);

        StepRecord record;
        record.n = n;
        record.l = l;
        record.traffic.hbm_read = reads.hbm_read_bytes;
        record.traffic.dram_read = reads.dram_read_bytes;
        record.traffic.hbm_write = applied.hbm_write_bytes;
        record.traffic.dram_write = applied.dram_write_bytes;
        record.traffic.migrate_in = applied.migrate_in_bytes;
        record.traffic.migrate_out = applied.migrate_out_bytes;
        record.hbm_latency = hbm_step_latency(record.traffic, cfg);
        record.dram_latency = dram_step_latency(record.traffic, cfg);
        record.latency = std::max(record.hbm_latency, record.dram_latency);
        records.push_back(record);

        const CapacityCheck occupancy = check_capacity(state.hbm_resident_bytes(), cfg);
        peak_usage = std::max(peak_usage, occupancy.usage);
        if (!unlimited && !occupancy.feasible)
            throw logic_error("policy " + label + ": capacity constraint violated after step (n=" +
                              std::to_string(n) + ", l=" + std::to_string(l) + ")");

        if (++global_step % 1000 == 0) state.audit();
    }
    state.audit();

    const std::uint64_t scenario =
        options.known_scenario != 0 ? options.known_scenario : scenario_hash(trace, cfg);
    SimulationReport report = summarize(std::move(records), h, label, scenario,
                                        run_fingerprint(scenario, label, options.seed),
                                        options.collect_per_step);
    report.peak_hbm_usage = peak_usage;
    return report;
}

} // namespace kvtier
