#include "kvtier/sa.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <unordered_map>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "kvtier/errors.hpp"
#include "kvtier/metrics.hpp"
#include "kvtier/rand_util.hpp"
#include "kvtier/simulate.hpp"

namespace kvtier {

void validate_sa_config(const SAConfig& cfg) {
    if (!(cfg.p0 > 0 && cfg.p0 < 1)) throw validation_error("sa.p0: must be in (0, 1)");
    if (!(cfg.cooling_alpha > 0 && cfg.cooling_alpha < 1))
        throw validation_error("sa.cooling_alpha: must be in (0, 1)");
    if (!(cfg.improve_threshold > 0))
        throw validation_error("sa.improve_threshold: must be > 0");
    if (cfg.iters_per_temp < 1) throw validation_error("sa.iters_per_temp: must be >= 1");
    if (cfg.max_iters < 1) throw validation_error("sa.max_iters: must be >= 1");
    if (cfg.w_min < 1) throw validation_error("sa.w_min: must be >= 1");
    if (cfg.w_max != 0 && cfg.w_max < cfg.w_min)
        throw validation_error("sa.w_max: must be 0 (auto) or >= w_min");
    if (!(cfg.r_step > 0 && cfg.r_step <= 1))
        throw validation_error("sa.r_step: must be in (0, 1]");
    if (!(cfg.start_r >= 0 && cfg.start_r <= 1))
        throw validation_error("sa.start_r: must be in [0, 1]");
    if (cfg.start_w < 1) throw validation_error("sa.start_w: must be >= 1");
    if (cfg.temp_min < 0) throw validation_error("sa.temp_min: must be >= 0");
}

double evaluate_lookahead(const DecodeTrace& trace, const MemoryConfig& cfg, int window,
                          double ratio) {
    PolicySpec spec;
    spec.type = PolicyType::Lookahead;
    spec.window = static_cast<std::uint32_t>(window);
    spec.ratio = ratio;
    return run_policy(trace, cfg, spec).total_latency;
}

std::pair<int, int> propose_move(std::mt19937_64& rng, int w, int r_idx, int w_min, int w_max,
                                 int r_idx_max) {
    const double kind = unit_double(rng);
    int new_w = w;
    int new_r = r_idx;
    const auto window_move = [&] {
        static constexpr int kDeltas[4] = {-2, -1, 1, 2};
        new_w = w + kDeltas[bounded_u64(rng, 4)];
    };
    const auto ratio_move = [&] { new_r = r_idx + (bounded_u64(rng, 2) == 0 ? -1 : 1); };
    if (kind < 0.4) {
        window_move();
    } else if (kind < 0.8) {
        ratio_move();
    } else {
        window_move();
        ratio_move();
    }
    new_w = std::clamp(new_w, w_min, w_max);
    new_r = std::clamp(new_r, 0, r_idx_max);
    return {new_w, new_r};
}

bool metropolis_accept(double delta, double temperature, std::mt19937_64& rng, double* draw) {
    if (draw) *draw = -1;
    if (delta <= 0) return true;
    const double p = std::exp(-delta / temperature);
    const double u = unit_double(rng);
    if (draw) *draw = u;
    return u < p;
}

double initial_temperature_from_samples(const std::vector<double>& uphill_deltas, double p0,
                                        double start_latency) {
    if (uphill_deltas.empty()) return 0.01 * start_latency;
    double sum = 0;
    for (double d : uphill_deltas) sum += d;
    const double mean = sum / static_cast<double>(uphill_deltas.size());
    return mean / (-std::log(p0));
}

namespace {

// Memo over grid coordinates; evaluate_lookahead is deterministic, so a hit
// is bit-identical to recomputation.
class LatencyMemo {
public:
    LatencyMemo(const DecodeTrace& trace, const MemoryConfig& cfg, double r_step)
        : trace_(trace), cfg_(cfg), r_step_(r_step) {}

    double operator()(int w, int r_idx) {
        const std::uint64_t key =
            (static_cast<std::uint64_t>(static_cast<std::uint32_t>(w)) << 32) |
            static_cast<std::uint32_t>(r_idx);
        const auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        const double latency = evaluate_lookahead(trace_, cfg_, w, ratio(r_idx));
        cache_.emplace(key, latency);
        ++evaluations_;
        return latency;
    }

    double ratio(int r_idx) const { return static_cast<double>(r_idx) * r_step_; }
    int evaluations() const { return evaluations_; }

private:
    const DecodeTrace& trace_;
    const MemoryConfig& cfg_;
    double r_step_;
    std::unordered_map<std::uint64_t, double> cache_;
    int evaluations_ = 0;
};

constexpr int kCalibrationSamples = 30;

} // namespace

SAResult run_sa(const DecodeTrace& trace, const MemoryConfig& cfg, const SAConfig& sa) {
    validate_sa_config(sa);
    validate_trace(trace);

    const int n = static_cast<int>(trace.header.decode_len);
    const int w_max = sa.w_max > 0 ? sa.w_max : std::max(sa.w_min, std::min(64, n));
    const int r_idx_max = static_cast<int>(std::floor(1.0 / sa.r_step + 1e-9));

    LatencyMemo memo(trace, cfg, sa.r_step);
    std::mt19937_64 rng(sa.seed);
    SAResult result;

    int cur_w = std::clamp(sa.start_w, sa.w_min, w_max);
    int cur_r = std::clamp(static_cast<int>(std::lround(sa.start_r / sa.r_step)), 0, r_idx_max);
    double cur_cost = memo(cur_w, cur_r);

    result.best_w = cur_w;
    result.best_r = memo.ratio(cur_r);
    result.best_latency = cur_cost;
    const auto track_best = [&](int w, int r_idx, double cost) {
        if (cost < result.best_latency) {
            result.best_latency = cost;
            result.best_w = w;
            result.best_r = memo.ratio(r_idx);
        }
    };

    int iter = 0;
    result.log.push_back({iter, 0, 0, cur_w, memo.ratio(cur_r), cur_cost, true, -1});

    // Calibration: probe the start point's neighbourhood and size the
    // initial temperature so p0 of the observed uphill moves would pass.
    // Probes only inform the temperature; the best-cost tracking follows
    // the annealing walk itself.
    std::vector<double> uphill;
    for (int i = 0; i < kCalibrationSamples; ++i) {
        const auto [w, r_idx] = propose_move(rng, cur_w, cur_r, sa.w_min, w_max, r_idx_max);
        const double cost = memo(w, r_idx);
        const double delta = cost - cur_cost;
        if (delta > 0) uphill.push_back(delta);
        result.log.push_back({++iter, 0, 0, w, memo.ratio(r_idx), cost, false, -1});
    }
    double temperature = initial_temperature_from_samples(uphill, sa.p0, cur_cost);
    if (temperature <= 0) temperature = 1e-30;  // flat landscape with zero cost
    result.initial_temperature = temperature;
    const double temp_min = sa.temp_min > 0 ? sa.temp_min : temperature * 1e-4;

    int proposals = 0;
    bool done = false;
    while (!done) {
        ++result.levels;
        const double best_at_entry = result.best_latency;
        for (int i = 0; i < sa.iters_per_temp; ++i) {
            if (proposals >= sa.max_iters) {
                result.termination = "max_iters";
                done = true;
                break;
            }
            ++proposals;
            const auto [w, r_idx] = propose_move(rng, cur_w, cur_r, sa.w_min, w_max, r_idx_max);
            const double cost = memo(w, r_idx);
            track_best(w, r_idx, cost);
            double draw = -1;
            const bool accepted = metropolis_accept(cost - cur_cost, temperature, rng, &draw);
            result.log.push_back(
                {++iter, result.levels, temperature, w, memo.ratio(r_idx), cost, accepted, draw});
            if (accepted) {
                cur_w = w;
                cur_r = r_idx;
                cur_cost = cost;
            }
        }
        if (done) break;
        const double improvement =
            best_at_entry > 0 ? (best_at_entry - result.best_latency) / best_at_entry : 0.0;
        if (improvement < sa.improve_threshold) {
            result.termination = "improve_threshold";
            break;
        }
        temperature *= sa.cooling_alpha;
        if (temperature < temp_min) {
            result.termination = "temp_min";
            break;
        }
    }

    result.evaluations = memo.evaluations();
    return result;
}

void write_sa_log_csv(const SAResult& result, std::ostream& out) {
    out << "iter,level,temperature,W,R,T_seconds,accepted,uniform_draw\n";
    char buf[192];
    for (const SARecord& r : result.log) {
        std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%d,%.17g,%.17g,%d,%.17g\n", r.iter, r.level,
                      r.temperature, r.window, r.ratio, r.latency, r.accepted ? 1 : 0,
                      r.uniform_draw);
        out << buf;
    }
}

namespace {

GridResult grid_points(const DecodeTrace& trace, const MemoryConfig& cfg, int w_min, int w_max,
                       double r_step, int threads) {
    if (w_min < 1 || w_max < w_min) throw validation_error("grid: invalid window bounds");
    if (!(r_step > 0 && r_step <= 1)) throw validation_error("grid: r_step must be in (0, 1]");
    const int r_idx_max = static_cast<int>(std::floor(1.0 / r_step + 1e-9));
    const int per_window = r_idx_max + 1;
    const std::size_t total = static_cast<std::size_t>(w_max - w_min + 1) * per_window;

    GridResult result;
    result.points.resize(total);
    const std::uint64_t scenario = scenario_hash(trace, cfg);

    const auto eval_point = [&](std::size_t i) {
        const int w = w_min + static_cast<int>(i) / per_window;
        const int r_idx = static_cast<int>(i) % per_window;
        PolicySpec spec;
        spec.type = PolicyType::Lookahead;
        spec.window = static_cast<std::uint32_t>(w);
        spec.ratio = static_cast<double>(r_idx) * r_step;
        SimulateOptions options;
        options.known_scenario = scenario;
        result.points[i] = {w, spec.ratio, run_policy(trace, cfg, spec, options).total_latency};
    };

    if (threads <= 1) {
        for (std::size_t i = 0; i < total; ++i) eval_point(i);
    } else {
#ifdef _OPENMP
        std::exception_ptr error;
#pragma omp parallel for schedule(dynamic) num_threads(threads)
        for (std::size_t i = 0; i < total; ++i) {
            try {
                eval_point(i);
            } catch (...) {
#pragma omp critical
                if (!error) error = std::current_exception();
            }
        }
        if (error) std::rethrow_exception(error);
#else
        for (std::size_t i = 0; i < total; ++i) eval_point(i);
#endif
    }

    result.best_index = 0;
    for (std::size_t i = 1; i < total; ++i)
        if (result.points[i].latency < result.points[result.best_index].latency)
            result.best_index = i;
    return result;
}

} // namespace

GridResult grid_search_serial(const DecodeTrace& trace, const MemoryConfig& cfg, int w_min,
                              int w_max, double r_step) {
    return grid_points(trace, cfg, w_min, w_max, r_step, 1);
}

GridResult grid_search_parallel(const DecodeTrace& trace, const MemoryConfig& cfg, int w_min,
                                int w_max, double r_step, int threads) {
    if (threads <= 0) {
#ifdef _OPENMP
        threads = omp_get_max_threads();
#else
        threads = 1;
#endif
    }
    return grid_points(trace, cfg, w_min, w_max, r_step, threads);
}

} // namespace kvtier
