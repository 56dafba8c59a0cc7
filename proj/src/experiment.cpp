#include "kvtier/experiment.hpp"

#include <cctype>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "kvtier/errors.hpp"
#include "kvtier/rand_util.hpp"
#include "kvtier/simulate.hpp"

namespace kvtier {

namespace {

namespace fs = std::filesystem;

std::string format_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::string sanitize(const std::string& name) {
    std::string out = name;
    for (char& c : out)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '-' && c != '_')
            c = '_';
    return out;
}

struct SweepPoint {
    std::string label;
    DecodeTrace trace;
};

std::vector<SweepPoint> build_points(const ExperimentConfig& config) {
    std::vector<SweepPoint> points;
    if (config.sweep.axis == SweepSpec::Axis::None) {
        SweepPoint point;
        point.label = "base";
        point.trace = config.synth ? synthesize_trace(*config.synth)
                                   : read_trace_file(config.trace_file);
        points.push_back(std::move(point));
        return points;
    }
    const char* axis_name = config.sweep.axis == SweepSpec::Axis::Sparsity ? "sparsity" : "churn";
    for (double value : config.sweep.values) {
        SynthTraceSpec spec = *config.synth;
        if (config.sweep.axis == SweepSpec::Axis::Sparsity) spec.sparsity = value;
        else spec.churn = value;
        SweepPoint point;
        point.label = std::string(axis_name) + "=" + format_g(value);
        point.trace = synthesize_trace(spec);
        points.push_back(std::move(point));
    }
    return points;
}

PolicySpec to_policy_spec(const PolicyEntry& entry) {
    PolicySpec spec;
    spec.window = entry.window;
    spec.ratio = entry.ratio;
    spec.page_size = entry.page_size;
    switch (entry.kind) {
        case PolicyEntry::Kind::UnlimitedHbm: spec.type = PolicyType::UnlimitedHbm; break;
        case PolicyEntry::Kind::Static: spec.type = PolicyType::Static; break;
        case PolicyEntry::Kind::ReactiveLru: spec.type = PolicyType::ReactiveLru; break;
        case PolicyEntry::Kind::Page: spec.type = PolicyType::PageGranularity; break;
        case PolicyEntry::Kind::Lookahead: spec.type = PolicyType::Lookahead; break;
        case PolicyEntry::Kind::SaGuided: spec.type = PolicyType::Lookahead; break;
    }
    return spec;
}

void write_file(const std::string& path, const std::string& content,
                std::vector<std::string>& written) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw validation_error("cannot open output file: " + path);
    out << content;
    out.flush();
    if (!out) throw validation_error("failed writing output file: " + path);
    written.push_back(path);
}

} // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, const ExperimentOptions& options,
                                std::ostream& log) {
    validate_memory_config(config.memory);
    if (config.policies.empty()) throw validation_error("policies: must be a non-empty array");
    const std::uint64_t seed = options.seed_override.value_or(config.seed);

    const std::vector<SweepPoint> points = build_points(config);
    const std::size_t task_count = points.size() * config.policies.size();

    std::vector<SimulationReport> reports(task_count);
    std::vector<SAResult> sa_results(task_count);
    std::vector<bool> has_sa(task_count, false);

    const auto run_task = [&](std::size_t t) {
        const std::size_t point_idx = t / config.policies.size();
        const std::size_t policy_idx = t % config.policies.size();
        const SweepPoint& point = points[point_idx];
        const PolicyEntry& entry = config.policies[policy_idx];

        SimulateOptions sim;
        sim.collect_per_step = options.per_step;
        sim.seed = seed;
        PolicySpec spec = to_policy_spec(entry);

        if (entry.kind == PolicyEntry::Kind::SaGuided) {
            SAConfig sa = config.sa;
            sa.seed = mix_seed(config.sa.seed ^ seed, point_idx);
            const SAResult found = run_sa(point.trace, config.memory, sa);
            spec.window = static_cast<std::uint32_t>(found.best_w);
            spec.ratio = found.best_r;
            char label[64];
            std::snprintf(label, sizeof label, "sa_guided(W=%d;R=%g)", found.best_w, found.best_r);
            sim.label_override = label;
            sa_results[t] = found;
            has_sa[t] = true;
        }
        SimulationReport report = run_policy(point.trace, config.memory, spec, sim);
        report.point = point.label;
        reports[t] = std::move(report);
    };

    int jobs = options.jobs;
    if (jobs <= 0) {
#ifdef _OPENMP
        jobs = omp_get_max_threads();
#else
        jobs = 1;
#endif
    }

    if (jobs == 1 || task_count == 1) {
        for (std::size_t t = 0; t < task_count; ++t) run_task(t);
    } else {
#ifdef _OPENMP
        std::exception_ptr error;
#pragma omp parallel for schedule(dynamic) num_threads(jobs)
        for (std::size_t t = 0; t < task_count; ++t) {
            try {
                run_task(t);
            } catch (...) {
#pragma omp critical
                if (!error) error = std::current_exception();
            }
        }
        if (error) std::rethrow_exception(error);
#else
        for (std::size_t t = 0; t < task_count; ++t) run_task(t);
#endif
    }

    ExperimentResult result;
    result.reports = reports;

    fs::create_directories(config.output_dir);
    const std::string dir = config.output_dir;

    {
        std::ostringstream csv;
        csv << report_csv_header() << '\n';
        for (const SimulationReport& r : reports) csv << report_csv_row(r) << '\n';
        write_file(dir + "/reports.csv", csv.str(), result.files_written);
    }

    {
        // Normalized tokens/s against the static and unlimited baselines of
        // the same sweep point, when those baselines were run.
        std::ostringstream csv;
        csv << "point,policy,tokens_per_sec,vs_static,vs_unlimited_hbm\n";
        for (std::size_t p = 0; p < points.size(); ++p) {
            const SimulationReport* vs_static = nullptr;
            const SimulationReport* vs_unlimited = nullptr;
            for (std::size_t i = 0; i < config.policies.size(); ++i) {
                const std::size_t t = p * config.policies.size() + i;
                if (config.policies[i].kind == PolicyEntry::Kind::Static) vs_static = &reports[t];
                if (config.policies[i].kind == PolicyEntry::Kind::UnlimitedHbm)
                    vs_unlimited = &reports[t];
            }
            for (std::size_t i = 0; i < config.policies.size(); ++i) {
                const SimulationReport& r = reports[p * config.policies.size() + i];
                char tps[40];
                std::snprintf(tps, sizeof tps, "%.17g", r.tokens_per_sec);
                csv << r.point << ',' << r.policy << ',' << tps << ',';
                if (vs_static) {
                    std::snprintf(tps, sizeof tps, "%.17g", normalize(r, *vs_static));
                    csv << tps;
                }
                csv << ',';
                if (vs_unlimited) {
                    std::snprintf(tps, sizeof tps, "%.17g", normalize(r, *vs_unlimited));
                    csv << tps;
                }
                csv << '\n';
            }
        }
        write_file(dir + "/comparison.csv", csv.str(), result.files_written);
    }

    for (std::size_t t = 0; t < task_count; ++t) {
        if (has_sa[t]) {
            std::ostringstream csv;
            write_sa_log_csv(sa_results[t], csv);
            write_file(dir + "/sa_log_" + sanitize(reports[t].point) + ".csv", csv.str(),
                       result.files_written);
        }
        if (options.per_step) {
            std::ostringstream csv;
            write_per_step_csv(reports[t], csv);
            write_file(dir + "/per_step_" + sanitize(reports[t].point) + "_" +
                           sanitize(reports[t].policy) + ".csv",
                       csv.str(), result.files_written);
        }
    }

    if (!options.quiet) {
        for (const SimulationReport& r : reports) log << report_kv_block(r) << '\n';
        for (const std::string& f : result.files_written) log << "wrote " << f << '\n';
    }
    return result;
}

} // namespace kvtier
