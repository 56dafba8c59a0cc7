#ifndef KVTIER_EXPERIMENT_HPP
#define KVTIER_EXPERIMENT_HPP

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "kvtier/config.hpp"
#include "kvtier/metrics.hpp"
#include "kvtier/sa.hpp"

namespace kvtier {

struct ExperimentOptions {
    int jobs = 0;  // 0 = hardware concurrency; 1 = serial reference path
    bool per_step = false;
    bool quiet = false;
    std::optional<std::uint64_t> seed_override;
};

struct ExperimentResult {
    std::vector<SimulationReport> reports;        // (point, policy) order
    std::vector<std::string> files_written;
};

// Runs every (sweep point x policy) simulation, SA searches included, and
// writes reports.csv, comparison.csv, SA search logs, and optional per-step
// CSVs under config.output_dir. Deterministic for a fixed config and seed:
// outputs are byte-identical regardless of the jobs setting.
ExperimentResult run_experiment(const ExperimentConfig& config, const ExperimentOptions& options,
                                std::ostream& log);

} // namespace kvtier

#endif
