// kvtier: trace-driven simulator for KV-cache placement across a two-tier
// HBM + off-package DRAM system. Subcommands: run, gen-trace, convert-scores.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "kvtier/config.hpp"
#include "kvtier/errors.hpp"
#include "kvtier/experiment.hpp"
#include "kvtier/trace.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct GenTraceArgs {
    std::uint64_t layers = 1;
    std::uint64_t prompt = 0;
    std::uint64_t decode = 1;
    std::uint64_t entry_bytes = 4096;
    std::uint64_t weight_bytes = 0;
    double sparsity = 0.0;
    double churn = 0.0;
    bool per_layer_independent = false;
    std::uint64_t seed = 0;
    std::string preset;
    std::string out;
};

struct ConvertArgs {
    std::string scores;
    double sparsity = 0.0;
    std::uint64_t layers = 1;
    std::uint64_t prompt = 0;
    std::uint64_t decode = 1;
    std::uint64_t entry_bytes = 4096;
    std::uint64_t weight_bytes = 0;
    std::string out;
};

int cmd_run(const std::string& config_path, int jobs, bool per_step, bool quiet,
            const std::optional<std::uint64_t>& seed) {
    const kvtier::ExperimentConfig config = kvtier::load_experiment_config(config_path);
    kvtier::ExperimentOptions options;
    options.jobs = jobs;
    options.per_step = per_step;
    options.quiet = quiet;
    options.seed_override = seed;
    kvtier::run_experiment(config, options, std::cout);
    return kExitOk;
}

int cmd_gen_trace(const GenTraceArgs& args, bool quiet) {
    kvtier::SynthTraceSpec spec;
    spec.header.num_layers = static_cast<std::uint32_t>(args.layers);
    spec.header.prompt_len = static_cast<std::uint32_t>(args.prompt);
    spec.header.decode_len = static_cast<std::uint32_t>(args.decode);
    spec.header.entry_bytes = args.entry_bytes;
    spec.header.weight_bytes_per_layer = args.weight_bytes;
    spec.sparsity = args.sparsity;
    spec.churn = args.churn;
    spec.per_layer_independent = args.per_layer_independent;
    spec.seed = args.seed;
    if (args.preset == "low") spec.churn = 0.05;
    else if (args.preset == "high") spec.churn = 0.8;
    else if (!args.preset.empty())
        throw kvtier::validation_error("--preset: must be 'low' or 'high'");

    const kvtier::DecodeTrace trace = kvtier::synthesize_trace(spec);
    kvtier::write_trace_file(trace, args.out);
    if (!quiet) {
        std::cout << "wrote " << args.out << '\n'
                  << "kv_footprint_bytes=" << trace.header.kv_footprint_bytes() << '\n'
                  << "weights_bytes=" << trace.header.weights_bytes() << '\n'
                  << "steps=" << trace.steps.size() << '\n'
                  << "mean_access_set_size=" << kvtier::mean_access_set_size(trace) << '\n';
    }
    return kExitOk;
}

int cmd_convert_scores(const ConvertArgs& args, bool quiet) {
    kvtier::TraceHeader header;
    header.num_layers = static_cast<std::uint32_t>(args.layers);
    header.prompt_len = static_cast<std::uint32_t>(args.prompt);
    header.decode_len = static_cast<std::uint32_t>(args.decode);
    header.entry_bytes = args.entry_bytes;
    header.weight_bytes_per_layer = args.weight_bytes;

    const kvtier::DecodeTrace trace =
        kvtier::scores_to_trace_file(args.scores, args.sparsity, header);
    kvtier::write_trace_file(trace, args.out);
    if (!quiet) {
        std::cout << "wrote " << args.out << '\n'
                  << "steps=" << trace.steps.size() << '\n'
                  << "mean_access_set_size=" << kvtier::mean_access_set_size(trace) << '\n';
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"KV-cache placement simulator for two-tier HBM + DRAM systems"};
    app.require_subcommand(1);

    // run
    std::string config_path;
    int jobs = 0;
    bool per_step = false;
    bool quiet = false;
    std::uint64_t seed_value = 0;
    CLI::App* run = app.add_subcommand("run", "run the experiment described by a config file");
    run->add_option("config", config_path, "experiment config (JSON)")->required();
    run->add_option("--jobs", jobs, "parallel sweep tasks (0 = hardware)");
    CLI::Option* seed_opt = run->add_option("--seed", seed_value, "override the config seed");
    run->add_flag("--per-step", per_step, "emit per-step CSV for every run");
    run->add_flag("--quiet", quiet, "suppress report output on stdout");

    // gen-trace
    GenTraceArgs gen;
    bool gen_quiet = false;
    CLI::App* gen_trace = app.add_subcommand("gen-trace", "synthesize an access trace file");
    gen_trace->add_option("--layers", gen.layers, "transformer layers (L)")->check(CLI::PositiveNumber);
    gen_trace->add_option("--prompt", gen.prompt, "prompt length (P)");
    gen_trace->add_option("--decode", gen.decode, "decode length (N)")->check(CLI::PositiveNumber);
    gen_trace->add_option("--entry-bytes", gen.entry_bytes, "KV bytes per token per layer");
    gen_trace->add_option("--weight-bytes", gen.weight_bytes, "weight bytes read per layer step");
    gen_trace->add_option("--sparsity", gen.sparsity, "fraction of past tokens excluded [0,1)");
    gen_trace->add_option("--churn", gen.churn, "importance-set turnover per step [0,1]");
    gen_trace->add_flag("--per-layer-independent", gen.per_layer_independent,
                        "independent importance sets per layer");
    gen_trace->add_option("--seed", gen.seed, "generator seed");
    gen_trace->add_option("--preset", gen.preset, "churn preset: low (0.05) or high (0.8)");
    gen_trace->add_option("-o,--out", gen.out, "output trace file")->required();
    gen_trace->add_flag("--quiet", gen_quiet, "suppress the summary");

    // convert-scores
    ConvertArgs conv;
    bool conv_quiet = false;
    CLI::App* convert = app.add_subcommand("convert-scores",
                                           "build a trace from recorded attention scores");
    convert->add_option("--scores", conv.scores, "attention-score file")->required();
    convert->add_option("--sparsity", conv.sparsity, "fraction of past tokens excluded [0,1]");
    convert->add_option("--layers", conv.layers, "transformer layers (L)")->check(CLI::PositiveNumber);
    convert->add_option("--prompt", conv.prompt, "prompt length (P)");
    convert->add_option("--decode", conv.decode, "decode length (N)")->check(CLI::PositiveNumber);
    convert->add_option("--entry-bytes", conv.entry_bytes, "KV bytes per token per layer");
    convert->add_option("--weight-bytes", conv.weight_bytes, "weight bytes read per layer step");
    convert->add_option("-o,--out", conv.out, "output trace file")->required();
    convert->add_flag("--quiet", conv_quiet, "suppress the summary");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (run->parsed()) {
            std::optional<std::uint64_t> seed;
            if (seed_opt->count() > 0) seed = seed_value;
            return cmd_run(config_path, jobs, per_step, quiet, seed);
        }
        if (gen_trace->parsed()) return cmd_gen_trace(gen, gen_quiet);
        if (convert->parsed()) return cmd_convert_scores(conv, conv_quiet);
    } catch (const kvtier::validation_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const kvtier::parse_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}
