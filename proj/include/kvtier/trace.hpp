#ifndef KVTIER_TRACE_HPP
#define KVTIER_TRACE_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace kvtier {

// Fixes the index ranges of a decode trace: generated tokens n in 1..N,
// layers l in 0..L-1, prompt tokens 0..P-1 already present. entry_bytes is
// the KV footprint of one token at one layer; weight_bytes_per_layer is
// read from HBM at every step.
struct TraceHeader {
    std::uint32_t num_layers = 1;             // L >= 1
    std::uint32_t prompt_len = 0;             // P >= 0
    std::uint32_t decode_len = 1;             // N >= 1
    std::uint64_t entry_bytes = 1;            // > 0
    std::uint64_t weight_bytes_per_layer = 0; // >= 0

    std::uint32_t total_tokens() const { return prompt_len + decode_len; }
    std::uint64_t total_entries() const {
        return static_cast<std::uint64_t>(total_tokens()) * num_layers;
    }
    std::uint64_t kv_footprint_bytes() const { return total_entries() * entry_bytes; }
    std::uint64_t weights_bytes() const {
        return static_cast<std::uint64_t>(num_layers) * weight_bytes_per_layer;
    }

    bool operator==(const TraceHeader&) const = default;
};

// Throws validation_error naming the violated bound.
void validate_header(const TraceHeader& h);

// The KV entries layer l reads while generating token n. Token indices are
// ascending, duplicate-free, and all < P + n.
struct StepAccess {
    std::uint32_t n = 1;  // 1..N
    std::uint32_t l = 0;  // 0..L-1
    std::vector<std::uint32_t> accessed;

    bool operator==(const StepAccess&) const = default;
};

// N*L StepAccess records in (n, l)-lexicographic order.
struct DecodeTrace {
    TraceHeader header;
    std::vector<StepAccess> steps;

    const StepAccess& step(std::uint32_t n, std::uint32_t l) const {
        return steps[static_cast<std::size_t>(n - 1) * header.num_layers + l];
    }

    bool operator==(const DecodeTrace&) const = default;
};

// Throws validation_error / logic context on any invariant violation.
void validate_trace(const DecodeTrace& t);

// Synthetic access-pattern model. sparsity is the fraction of past tokens
// excluded per step; churn is the fraction of the important set replaced
// between consecutive steps (low churn = stable token importance).
struct SynthTraceSpec {
    TraceHeader header;
    double sparsity = 0;              // [0, 1)
    double churn = 0;                 // [0, 1]
    bool per_layer_independent = false;
    std::uint64_t seed = 0;
};

void validate_spec(const SynthTraceSpec& spec);

// Deterministic for a fixed spec. Step n keeps
// k(n) = max(1, ceil((1 - sparsity) * (P + n - 1))) tokens; the set evolves
// from the previous step by uniform replace-then-resize.
DecodeTrace synthesize_trace(const SynthTraceSpec& spec);

// Converts a recorded attention-score stream to a trace: keeps the
// top-ceil((1-sparsity)*(P+n-1)) tokens per step (at least 1), ties broken
// toward the more recent token. One line per (n, l) in order:
//   <n> <l> <s1>,<s2>,...,<s_{P+n-1}>
DecodeTrace scores_to_trace(std::istream& scores, double sparsity, const TraceHeader& header);
DecodeTrace scores_to_trace_file(const std::string& path, double sparsity, const TraceHeader& header);

// Line-oriented text format:
//   KVTRACE v1 L=<L> P=<P> N=<N> E=<entry_bytes> W=<weight_bytes_per_layer>
//   <n> <l> <i1>,<i2>,...        (N*L lines, ascending indices, no spaces)
void write_trace(const DecodeTrace& trace, std::ostream& out);
void write_trace_file(const DecodeTrace& trace, const std::string& path);
DecodeTrace read_trace(std::istream& in);
DecodeTrace read_trace_file(const std::string& path);

// Mean accessed-set size across all steps; used by the CLI summary.
double mean_access_set_size(const DecodeTrace& trace);

} // namespace kvtier

#endif
