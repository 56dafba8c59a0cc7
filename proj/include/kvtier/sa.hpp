#ifndef KVTIER_SA_HPP
#define KVTIER_SA_HPP

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "kvtier/memory_model.hpp"
#include "kvtier/trace.hpp"

namespace kvtier {

// Annealing search over the lookahead policy's (W, R). R moves on a grid of
// r_step increments so revisited points hit the memo table exactly.
struct SAConfig {
    double p0 = 0.8;                 // target initial acceptance ratio
    double cooling_alpha = 0.9;      // temperature multiplier per level
    double improve_threshold = 1e-3; // relative best-cost improvement cutoff
    double temp_min = 0;             // 0 = auto: 1e-4 * initial temperature
    int iters_per_temp = 20;
    int max_iters = 2000;            // proposal budget for the main loop
    int w_min = 1;
    int w_max = 0;                   // 0 = auto: min(64, decode_len)
    double r_step = 0.1;
    int start_w = 8;
    double start_r = 0.5;
    std::uint64_t seed = 1;
};

void validate_sa_config(const SAConfig& cfg);

// One proposal evaluation. Calibration probes carry level 0; the main loop
// levels start at 1. uniform_draw is the Metropolis draw, -1 when the move
// was accepted or probed without a draw.
struct SARecord {
    int iter = 0;
    int level = 0;
    double temperature = 0;
    int window = 0;
    double ratio = 0;
    double latency = 0;
    bool accepted = false;
    double uniform_draw = -1;
};

struct SAResult {
    int best_w = 1;
    double best_r = 0;
    double best_latency = 0;
    double initial_temperature = 0;
    int levels = 0;
    int evaluations = 0;  // distinct (W, R) points simulated
    std::string termination;  // improve_threshold | temp_min | max_iters
    std::vector<SARecord> log;
};

// Full lookahead simulation; the annealer's objective.
double evaluate_lookahead(const DecodeTrace& trace, const MemoryConfig& cfg, int window,
                          double ratio);

// Move kinds drawn with probabilities 0.4 / 0.4 / 0.2: a window move
// (delta in {-2,-1,+1,+2}), a ratio move (one r_step either way), or a
// diagonal move applying one of each, independently drawn. Results clamp to
// [w_min, w_max] x [0, r_idx_max].
std::pair<int, int> propose_move(std::mt19937_64& rng, int w, int r_idx, int w_min, int w_max,
                                 int r_idx_max);

// Metropolis rule: downhill always accepted; uphill with probability
// exp(-delta / temperature). The uniform draw (if any) lands in *draw.
bool metropolis_accept(double delta, double temperature, std::mt19937_64& rng, double* draw);

// C0 = mean(uphill deltas) / -ln(p0); with no uphill samples, falls back to
// 1% of the starting latency.
double initial_temperature_from_samples(const std::vector<double>& uphill_deltas, double p0,
                                        double start_latency);

SAResult run_sa(const DecodeTrace& trace, const MemoryConfig& cfg, const SAConfig& sa);

// Columns: iter,level,temperature,W,R,T_seconds,accepted,uniform_draw
void write_sa_log_csv(const SAResult& result, std::ostream& out);

// Exhaustive (W, R) evaluation, W in [w_min, w_max], R in r_step increments.
// The parallel variant distributes points over OpenMP threads and produces
// results identical to the serial reference.
struct GridPoint {
    int window = 0;
    double ratio = 0;
    double latency = 0;
};

struct GridResult {
    std::vector<GridPoint> points;  // (W asc, R asc) order
    std::size_t best_index = 0;
};

GridResult grid_search_serial(const DecodeTrace& trace, const MemoryConfig& cfg, int w_min,
                              int w_max, double r_step);
GridResult grid_search_parallel(const DecodeTrace& trace, const MemoryConfig& cfg, int w_min,
                                int w_max, double r_step, int threads);

} // namespace kvtier

#endif
