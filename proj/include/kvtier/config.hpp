#ifndef KVTIER_CONFIG_HPP
#define KVTIER_CONFIG_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kvtier/memory_model.hpp"
#include "kvtier/policies.hpp"
#include "kvtier/sa.hpp"
#include "kvtier/trace.hpp"

namespace kvtier {

// Policy selection as written in the experiment config. SaGuided expands to
// an annealing search plus a lookahead run at the optimum.
struct PolicyEntry {
    enum class Kind : std::uint8_t { UnlimitedHbm, Static, ReactiveLru, Page, Lookahead, SaGuided };
    Kind kind = Kind::Static;
    std::uint32_t window = 8;
    double ratio = 1.0;
    std::uint32_t page_size = 16;
};

struct SweepSpec {
    enum class Axis : std::uint8_t { None, Sparsity, Churn };
    Axis axis = Axis::None;
    std::vector<double> values;
};

struct ExperimentConfig {
    MemoryConfig memory = default_memory_config();
    std::optional<SynthTraceSpec> synth;  // exactly one of synth / trace_file
    std::string trace_file;
    std::vector<PolicyEntry> policies;
    SAConfig sa;
    SweepSpec sweep;
    std::string output_dir = "out";
    std::uint64_t seed = 0;
};

// Parses and validates; error messages carry JSON field paths
// (e.g. "policies[2].ratio: must be in [0, 1]"). See docs/config.md.
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);

} // namespace kvtier

#endif
