#ifndef KVTIER_SIMULATE_HPP
#define KVTIER_SIMULATE_HPP

#include <cstdint>
#include <string>

#include "kvtier/memory_model.hpp"
#include "kvtier/metrics.hpp"
#include "kvtier/policies.hpp"
#include "kvtier/trace.hpp"

namespace kvtier {

struct SimulateOptions {
    bool collect_per_step = false;
    std::uint64_t seed = 0;           // recorded in the run fingerprint only
    std::uint64_t known_scenario = 0; // precomputed scenario_hash; 0 = compute
    std::string label_override;      // replaces policy_label() in the report
};

// Runs one policy over the full trace: per step, the policy decides, the
// decision is applied (migrations land before the step's reads), and the
// step's traffic is priced with the bandwidth model. The HBM capacity
// constraint is asserted after every step for every policy except the
// unlimited bound; the occupancy counter is re-audited every 1000 steps.
SimulationReport run_policy(const DecodeTrace& trace, const MemoryConfig& cfg,
                            const PolicySpec& spec, const SimulateOptions& options = {});

} // namespace kvtier

#endif
