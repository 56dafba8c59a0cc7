#include "kvtier/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "kvtier/errors.hpp"

namespace kvtier {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& why) {
    throw validation_error(path + ": " + why);
}

void expect_object(const json& j, const std::string& path) {
    if (!j.is_object()) fail(path, "must be an object");
}

std::uint64_t get_u64(const json& j, const char* key, const std::string& path,
                      std::uint64_t fallback, bool required = false) {
    if (!j.contains(key)) {
        if (required) fail(path, "missing required field");
        return fallback;
    }
    const json& v = j.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
        fail(path, "must be a non-negative integer");
    return v.get<std::uint64_t>();
}

double get_double(const json& j, const char* key, const std::string& path, double fallback,
                  bool required = false) {
    if (!j.contains(key)) {
        if (required) fail(path, "missing required field");
        return fallback;
    }
    const json& v = j.at(key);
    if (!v.is_number()) fail(path, "must be a number");
    return v.get<double>();
}

bool get_bool(const json& j, const char* key, const std::string& path, bool fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_boolean()) fail(path, "must be a boolean");
    return v.get<bool>();
}

std::string get_string(const json& j, const char* key, const std::string& path,
                       const std::string& fallback, bool required = false) {
    if (!j.contains(key)) {
        if (required) fail(path, "missing required field");
        return fallback;
    }
    const json& v = j.at(key);
    if (!v.is_string()) fail(path, "must be a string");
    return v.get<std::string>();
}

MemoryConfig parse_memory(const json& j) {
    MemoryConfig cfg = default_memory_config();
    if (!j.contains("memory")) return cfg;
    const json& m = j.at("memory");
    expect_object(m, "memory");
    cfg.hbm_bandwidth = get_double(m, "hbm_bandwidth", "memory.hbm_bandwidth", cfg.hbm_bandwidth);
    cfg.link_bandwidth =
        get_double(m, "link_bandwidth", "memory.link_bandwidth", cfg.link_bandwidth);
    cfg.dram_bandwidth =
        get_double(m, "dram_bandwidth", "memory.dram_bandwidth", cfg.dram_bandwidth);
    cfg.hbm_capacity = get_u64(m, "hbm_capacity", "memory.hbm_capacity", cfg.hbm_capacity);
    cfg.dram_capacity = get_u64(m, "dram_capacity", "memory.dram_capacity", cfg.dram_capacity);
    validate_memory_config(cfg);
    return cfg;
}

SynthTraceSpec parse_synth(const json& s, const std::string& path) {
    expect_object(s, path);
    SynthTraceSpec spec;
    spec.header.num_layers =
        static_cast<std::uint32_t>(get_u64(s, "num_layers", path + ".num_layers", 1));
    spec.header.prompt_len =
        static_cast<std::uint32_t>(get_u64(s, "prompt_len", path + ".prompt_len", 0));
    spec.header.decode_len =
        static_cast<std::uint32_t>(get_u64(s, "decode_len", path + ".decode_len", 0, true));
    spec.header.entry_bytes = get_u64(s, "entry_bytes", path + ".entry_bytes", 0, true);
    spec.header.weight_bytes_per_layer =
        get_u64(s, "weight_bytes_per_layer", path + ".weight_bytes_per_layer", 0);
    spec.sparsity = get_double(s, "sparsity", path + ".sparsity", 0.0);
    spec.churn = get_double(s, "churn", path + ".churn", 0.0);
    spec.per_layer_independent = get_bool(s, "per_layer_independent", path, false);
    spec.seed = get_u64(s, "seed", path + ".seed", 0);
    try {
        validate_spec(spec);
    } catch (const validation_error& e) {
        fail(path, e.what());
    }
    return spec;
}

PolicyEntry parse_policy(const json& p, const std::string& path) {
    expect_object(p, path);
    PolicyEntry entry;
    const std::string kind = get_string(p, "kind", path + ".kind", "", true);
    if (kind == "unlimited_hbm") entry.kind = PolicyEntry::Kind::UnlimitedHbm;
    else if (kind == "static") entry.kind = PolicyEntry::Kind::Static;
    else if (kind == "reactive_lru") entry.kind = PolicyEntry::Kind::ReactiveLru;
    else if (kind == "page") entry.kind = PolicyEntry::Kind::Page;
    else if (kind == "lookahead") entry.kind = PolicyEntry::Kind::Lookahead;
    else if (kind == "sa_guided") entry.kind = PolicyEntry::Kind::SaGuided;
    else
        fail(path + ".kind", "unknown policy '" + kind +
                                 "' (expected unlimited_hbm|static|reactive_lru|page|lookahead|"
                                 "sa_guided)");

    entry.window = static_cast<std::uint32_t>(get_u64(p, "window", path + ".window", 8));
    entry.ratio = get_double(p, "ratio", path + ".ratio", 1.0);
    entry.page_size = static_cast<std::uint32_t>(get_u64(p, "page_size", path + ".page_size", 16));
    if (entry.window < 1) fail(path + ".window", "must be >= 1");
    if (!(entry.ratio >= 0 && entry.ratio <= 1)) fail(path + ".ratio", "must be in [0, 1]");
    if (entry.page_size < 1) fail(path + ".page_size", "must be >= 1");
    return entry;
}

SAConfig parse_sa(const json& j) {
    SAConfig sa;
    if (!j.contains("sa")) return sa;
    const json& s = j.at("sa");
    expect_object(s, "sa");
    sa.p0 = get_double(s, "p0", "sa.p0", sa.p0);
    sa.cooling_alpha = get_double(s, "cooling_alpha", "sa.cooling_alpha", sa.cooling_alpha);
    sa.improve_threshold =
        get_double(s, "improve_threshold", "sa.improve_threshold", sa.improve_threshold);
    sa.temp_min = get_double(s, "temp_min", "sa.temp_min", sa.temp_min);
    sa.iters_per_temp =
        static_cast<int>(get_u64(s, "iters_per_temp", "sa.iters_per_temp", sa.iters_per_temp));
    sa.max_iters = static_cast<int>(get_u64(s, "max_iters", "sa.max_iters", sa.max_iters));
    sa.w_min = static_cast<int>(get_u64(s, "w_min", "sa.w_min", sa.w_min));
    sa.w_max = static_cast<int>(get_u64(s, "w_max", "sa.w_max", sa.w_max));
    sa.r_step = get_double(s, "r_step", "sa.r_step", sa.r_step);
    sa.start_w = static_cast<int>(get_u64(s, "start_w", "sa.start_w", sa.start_w));
    sa.start_r = get_double(s, "start_r", "sa.start_r", sa.start_r);
    sa.seed = get_u64(s, "seed", "sa.seed", sa.seed);
    try {
        validate_sa_config(sa);
    } catch (const validation_error& e) {
        throw validation_error(std::string("sa: ") + e.what());
    }
    return sa;
}

SweepSpec parse_sweep(const json& j) {
    SweepSpec sweep;
    if (!j.contains("sweep")) return sweep;
    const json& s = j.at("sweep");
    expect_object(s, "sweep");
    const std::string axis = get_string(s, "axis", "sweep.axis", "", true);
    if (axis == "sparsity") sweep.axis = SweepSpec::Axis::Sparsity;
    else if (axis == "churn") sweep.axis = SweepSpec::Axis::Churn;
    else fail("sweep.axis", "must be 'sparsity' or 'churn'");
    if (!s.contains("values") || !s.at("values").is_array() || s.at("values").empty())
        fail("sweep.values", "must be a non-empty array of numbers");
    for (std::size_t i = 0; i < s.at("values").size(); ++i) {
        const json& v = s.at("values")[i];
        if (!v.is_number()) fail("sweep.values[" + std::to_string(i) + "]", "must be a number");
        sweep.values.push_back(v.get<double>());
    }
    return sweep;
}

} // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw validation_error(std::string("config: invalid JSON: ") + e.what());
    }
    expect_object(j, "config");

    ExperimentConfig cfg;
    cfg.memory = parse_memory(j);
    cfg.seed = get_u64(j, "seed", "seed", 0);
    cfg.output_dir = get_string(j, "output_dir", "output_dir", "out");

    if (!j.contains("trace")) fail("trace", "missing required field");
    const json& t = j.at("trace");
    expect_object(t, "trace");
    const bool has_file = t.contains("file");
    const bool has_synth = t.contains("synth");
    if (has_file == has_synth) fail("trace", "must contain exactly one of 'file' or 'synth'");
    if (has_file) cfg.trace_file = get_string(t, "file", "trace.file", "", true);
    else cfg.synth = parse_synth(t.at("synth"), "trace.synth");

    if (!j.contains("policies") || !j.at("policies").is_array() || j.at("policies").empty())
        fail("policies", "must be a non-empty array");
    for (std::size_t i = 0; i < j.at("policies").size(); ++i)
        cfg.policies.push_back(
            parse_policy(j.at("policies")[i], "policies[" + std::to_string(i) + "]"));

    cfg.sa = parse_sa(j);
    cfg.sweep = parse_sweep(j);

    if (cfg.sweep.axis != SweepSpec::Axis::None && !cfg.synth)
        fail("sweep", "sweeping requires an inline synthetic trace ('trace.synth')");
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("config: cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_experiment_config(buf.str());
}

} // namespace kvtier
