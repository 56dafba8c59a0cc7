// Benchmark: serial vs OpenMP (W, R) grid evaluation over one trace. The
// two paths must produce identical results; this tool times them and checks.

#include <cstdint>
#include <cstdio>
#include <chrono>
#include <iostream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>

#include "kvtier/memory_model.hpp"
#include "kvtier/sa.hpp"
#include "kvtier/trace.hpp"

namespace {

double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"serial vs OpenMP grid-evaluation benchmark"};
    std::uint64_t layers = 2, prompt = 512, decode = 128;
    std::uint64_t entry_bytes = 4096, weight_bytes = 1 << 20;
    double sparsity = 0.6, churn = 0.1;
    int w_max = 16;
    int threads = 0;
    std::uint64_t seed = 1;
    app.add_option("--layers", layers);
    app.add_option("--prompt", prompt);
    app.add_option("--decode", decode);
    app.add_option("--entry-bytes", entry_bytes);
    app.add_option("--weight-bytes", weight_bytes);
    app.add_option("--sparsity", sparsity);
    app.add_option("--churn", churn);
    app.add_option("--w-max", w_max);
    app.add_option("--threads", threads, "0 = hardware");
    app.add_option("--seed", seed);
    CLI11_PARSE(app, argc, argv);

    kvtier::SynthTraceSpec spec;
    spec.header.num_layers = static_cast<std::uint32_t>(layers);
    spec.header.prompt_len = static_cast<std::uint32_t>(prompt);
    spec.header.decode_len = static_cast<std::uint32_t>(decode);
    spec.header.entry_bytes = entry_bytes;
    spec.header.weight_bytes_per_layer = weight_bytes;
    spec.sparsity = sparsity;
    spec.churn = churn;
    spec.seed = seed;
    const kvtier::DecodeTrace trace = kvtier::synthesize_trace(spec);

    kvtier::MemoryConfig cfg = kvtier::default_memory_config();
    // Size HBM so roughly 40% of the final KV footprint fits next to the weights.
    cfg.hbm_capacity =
        trace.header.weights_bytes() + trace.header.kv_footprint_bytes() * 2 / 5;

#ifdef _OPENMP
    if (threads <= 0) threads = omp_get_max_threads();
#else
    threads = 1;
#endif

    const std::size_t grid_points = static_cast<std::size_t>(w_max) * 11;
    std::printf("trace: L=%llu P=%llu N=%llu, grid: W=1..%d x R=0..1 (%zu points)\n",
                static_cast<unsigned long long>(layers), static_cast<unsigned long long>(prompt),
                static_cast<unsigned long long>(decode), w_max, grid_points);

    double t0 = now_seconds();
    const kvtier::GridResult serial = kvtier::grid_search_serial(trace, cfg, 1, w_max, 0.1);
    const double serial_time = now_seconds() - t0;

    t0 = now_seconds();
    const kvtier::GridResult parallel =
        kvtier::grid_search_parallel(trace, cfg, 1, w_max, 0.1, threads);
    const double parallel_time = now_seconds() - t0;

    bool identical = serial.points.size() == parallel.points.size() &&
                     serial.best_index == parallel.best_index;
    for (std::size_t i = 0; identical && i < serial.points.size(); ++i)
        identical = serial.points[i].latency == parallel.points[i].latency;

    const kvtier::GridPoint& best = serial.points[serial.best_index];
    std::printf("serial:   %8.3f s\n", serial_time);
    std::printf("parallel: %8.3f s  (%d threads, speedup %.2fx)\n", parallel_time, threads,
                serial_time / parallel_time);
    std::printf("results identical: %s\n", identical ? "yes" : "NO");
    std::printf("best point: W=%d R=%.1f latency=%.9g s\n", best.window, best.ratio, best.latency);
    return identical ? 0 : 1;
}
