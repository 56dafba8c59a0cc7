#include "kvtier/metrics.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <ostream>
#include <sstream>

#include "kvtier/errors.hpp"

namespace kvtier {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void fnv_bytes(std::uint64_t& h, const void* data, std::size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= kFnvPrime;
    }
}

template <typename T>
void fnv_value(std::uint64_t& h, const T& value) {
    fnv_bytes(h, &value, sizeof value);
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

std::uint64_t scenario_hash(const DecodeTrace& trace, const MemoryConfig& cfg) {
    std::uint64_t h = kFnvOffset;
    fnv_value(h, trace.header.num_layers);
    fnv_value(h, trace.header.prompt_len);
    fnv_value(h, trace.header.decode_len);
    fnv_value(h, trace.header.entry_bytes);
    fnv_value(h, trace.header.weight_bytes_per_layer);
    for (const StepAccess& s : trace.steps) {
        fnv_value(h, s.n);
        fnv_value(h, s.l);
        if (!s.accessed.empty())
            fnv_bytes(h, s.accessed.data(), s.accessed.size() * sizeof(std::uint32_t));
    }
    fnv_value(h, cfg.hbm_bandwidth);
    fnv_value(h, cfg.link_bandwidth);
    fnv_value(h, cfg.dram_bandwidth);
    fnv_value(h, cfg.hbm_capacity);
    fnv_value(h, cfg.dram_capacity);
    return h;
}

std::uint64_t run_fingerprint(std::uint64_t scenario, const std::string& policy, std::uint64_t seed) {
    std::uint64_t h = kFnvOffset;
    fnv_value(h, scenario);
    fnv_bytes(h, policy.data(), policy.size());
    fnv_value(h, seed);
    return h;
}

SimulationReport summarize(std::vector<StepRecord> per_step, const TraceHeader& header,
                           const std::string& policy, std::uint64_t scenario,
                           std::uint64_t fingerprint, bool keep_per_step) {
    SimulationReport r;
    r.policy = policy;
    r.decode_tokens = header.decode_len;
    r.scenario_hash = scenario;
    r.run_fingerprint = fingerprint;

    for (const StepRecord& s : per_step) {
        r.total_latency += s.latency;
        r.hbm_read_bytes += s.traffic.hbm_read;
        r.dram_read_bytes += s.traffic.dram_read;
        r.hbm_write_bytes += s.traffic.hbm_write;
        r.dram_write_bytes += s.traffic.dram_write;
        r.migrate_in_bytes += s.traffic.migrate_in;
        r.migrate_out_bytes += s.traffic.migrate_out;
    }
    r.weights_read_bytes = static_cast<std::uint64_t>(per_step.size()) * header.weight_bytes_per_layer;

    const std::uint64_t kv_hit_bytes = r.hbm_read_bytes - r.weights_read_bytes;
    const std::uint64_t kv_read_bytes = kv_hit_bytes + r.dram_read_bytes;
    r.hbm_hit_rate = kv_read_bytes == 0
                         ? 1.0
                         : static_cast<double>(kv_hit_bytes) / static_cast<double>(kv_read_bytes);
    r.kv_hit_entries = kv_hit_bytes / header.entry_bytes;
    r.kv_miss_entries = r.dram_read_bytes / header.entry_bytes;
    r.tokens_per_sec = r.total_latency > 0
                           ? static_cast<double>(r.decode_tokens) / r.total_latency
                           : 0.0;
    if (keep_per_step) r.per_step = std::move(per_step);
    return r;
}

double normalize(const SimulationReport& report, const SimulationReport& baseline) {
    if (report.scenario_hash != baseline.scenario_hash)
        throw validation_error("cannot normalize '" + report.policy + "' against '" +
                               baseline.policy + "': reports come from different scenarios");
    return report.tokens_per_sec / baseline.tokens_per_sec;
}

std::string report_kv_block(const SimulationReport& r) {
    std::ostringstream out;
    out << "point=" << r.point << '\n'
        << "policy=" << r.policy << '\n'
        << "decode_tokens=" << r.decode_tokens << '\n'
        << "total_latency_s=" << format_double(r.total_latency) << '\n'
        << "tokens_per_sec=" << format_double(r.tokens_per_sec) << '\n'
        << "hbm_hit_rate=" << format_double(r.hbm_hit_rate) << '\n'
        << "hbm_read_bytes=" << r.hbm_read_bytes << '\n'
        << "dram_read_bytes=" << r.dram_read_bytes << '\n'
        << "hbm_write_bytes=" << r.hbm_write_bytes << '\n'
        << "dram_write_bytes=" << r.dram_write_bytes << '\n'
        << "migrate_in_bytes=" << r.migrate_in_bytes << '\n'
        << "migrate_out_bytes=" << r.migrate_out_bytes << '\n'
        << "weights_read_bytes=" << r.weights_read_bytes << '\n'
        << "kv_hit_entries=" << r.kv_hit_entries << '\n'
        << "kv_miss_entries=" << r.kv_miss_entries << '\n'
        << "peak_hbm_usage=" << format_double(r.peak_hbm_usage) << '\n'
        << "scenario_hash=" << r.scenario_hash << '\n'
        << "run_fingerprint=" << r.run_fingerprint << '\n';
    return out.str();
}

std::string report_csv_header() {
    return "point,policy,decode_tokens,total_latency_s,tokens_per_sec,hbm_hit_rate,"
           "hbm_read_bytes,dram_read_bytes,hbm_write_bytes,dram_write_bytes,"
           "migrate_in_bytes,migrate_out_bytes,weights_read_bytes,kv_hit_entries,"
           "kv_miss_entries,peak_hbm_usage,scenario_hash,run_fingerprint";
}

std::string report_csv_row(const SimulationReport& r) {
    std::ostringstream out;
    out << r.point << ',' << r.policy << ',' << r.decode_tokens << ','
        << format_double(r.total_latency) << ',' << format_double(r.tokens_per_sec) << ','
        << format_double(r.hbm_hit_rate) << ',' << r.hbm_read_bytes << ',' << r.dram_read_bytes
        << ',' << r.hbm_write_bytes << ',' << r.dram_write_bytes << ',' << r.migrate_in_bytes
        << ',' << r.migrate_out_bytes << ',' << r.weights_read_bytes << ',' << r.kv_hit_entries
        << ',' << r.kv_miss_entries << ',' << format_double(r.peak_hbm_usage) << ','
        << r.scenario_hash << ',' << r.run_fingerprint;
    return out.str();
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (pos <= line.size()) {
        std::size_t comma = line.find(',', pos);
        if (comma == std::string::npos) comma = line.size();
        fields.push_back(line.substr(pos, comma - pos));
        if (comma == line.size()) break;
        pos = comma + 1;
    }
    return fields;
}

std::uint64_t parse_u64_field(const std::string& field, const char* name) {
    char* end = nullptr;
    const std::uint64_t v = std::strtoull(field.c_str(), &end, 10);
    if (field.empty() || end != field.c_str() + field.size())
        throw parse_error(std::string("report row: malformed ") + name + " '" + field + "'");
    return v;
}

double parse_double_field(const std::string& field, const char* name) {
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (field.empty() || end != field.c_str() + field.size())
        throw parse_error(std::string("report row: malformed ") + name + " '" + field + "'");
    return v;
}

} // namespace

SimulationReport parse_report_csv_row(const std::string& line) {
    const std::vector<std::string> f = split_csv(line);
    if (f.size() != 18)
        throw parse_error("report row: expected 18 fields, got " + std::to_string(f.size()));
    SimulationReport r;
    r.point = f[0];
    r.policy = f[1];
    r.decode_tokens = static_cast<std::uint32_t>(parse_u64_field(f[2], "decode_tokens"));
    r.total_latency = parse_double_field(f[3], "total_latency_s");
    r.tokens_per_sec = parse_double_field(f[4], "tokens_per_sec");
    r.hbm_hit_rate = parse_double_field(f[5], "hbm_hit_rate");
    r.hbm_read_bytes = parse_u64_field(f[6], "hbm_read_bytes");
    r.dram_read_bytes = parse_u64_field(f[7], "dram_read_bytes");
    r.hbm_write_bytes = parse_u64_field(f[8], "hbm_write_bytes");
    r.dram_write_bytes = parse_u64_field(f[9], "dram_write_bytes");
    r.migrate_in_bytes = parse_u64_field(f[10], "migrate_in_bytes");
    r.migrate_out_bytes = parse_u64_field(f[11], "migrate_out_bytes");
    r.weights_read_bytes = parse_u64_field(f[12], "weights_read_bytes");
    r.kv_hit_entries = parse_u64_field(f[13], "kv_hit_entries");
    r.kv_miss_entries = parse_u64_field(f[14], "kv_miss_entries");
    r.peak_hbm_usage = parse_double_field(f[15], "peak_hbm_usage");
    r.scenario_hash = parse_u64_field(f[16], "scenario_hash");
    r.run_fingerprint = parse_u64_field(f[17], "run_fingerprint");
    return r;
}

std::string per_step_csv_header() {
    return "n,l,hbm_read,hbm_write,dram_read,dram_write,migrate_in,migrate_out,"
           "t_hbm_s,t_dram_s,t_step_s";
}

void write_per_step_csv(const SimulationReport& report, std::ostream& out) {
    out << per_step_csv_header() << '\n';
    for (const StepRecord& s : report.per_step) {
        out << s.n << ',' << s.l << ',' << s.traffic.hbm_read << ',' << s.traffic.hbm_write << ','
            << s.traffic.dram_read << ',' << s.traffic.dram_write << ',' << s.traffic.migrate_in
            << ',' << s.traffic.migrate_out << ',' << format_double(s.hbm_latency) << ','
            << format_double(s.dram_latency) << ',' << format_double(s.latency) << '\n';
    }
}

} // namespace kvtier
