#include "kvtier/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>

#include "kvtier/errors.hpp"
#include "kvtier/numeric.hpp"
#include "kvtier/rand_util.hpp"

namespace kvtier {

void validate_header(const TraceHeader& h) {
    if (h.num_layers < 1) throw validation_error("num_layers: must be >= 1");
    if (h.decode_len < 1) throw validation_error("decode_len: must be >= 1");
    if (h.entry_bytes == 0) throw validation_error("entry_bytes: must be > 0");
    const std::uint64_t tokens =
        static_cast<std::uint64_t>(h.prompt_len) + static_cast<std::uint64_t>(h.decode_len);
    if (tokens > UINT32_MAX) throw validation_error("prompt_len + decode_len: exceeds 2^32 tokens");
}

void validate_spec(const SynthTraceSpec& spec) {
    validate_header(spec.header);
    if (!(spec.sparsity >= 0 && spec.sparsity < 1))
        throw validation_error("sparsity: must be in [0, 1)");
    if (!(spec.churn >= 0 && spec.churn <= 1)) throw validation_error("churn: must be in [0, 1]");
}

void validate_trace(const DecodeTrace& t) {
    validate_header(t.header);
    const std::uint64_t expected = static_cast<std::uint64_t>(t.header.decode_len) * t.header.num_layers;
    if (t.steps.size() != expected) throw validation_error("steps: step count mismatch");
    std::size_t idx = 0;
    for (std::uint32_t n = 1; n <= t.header.decode_len; ++n) {
        for (std::uint32_t l = 0; l < t.header.num_layers; ++l, ++idx) {
            const StepAccess& s = t.steps[idx];
            if (s.n != n || s.l != l) throw validation_error("steps: step order mismatch");
            if (s.accessed.empty()) throw validation_error("steps: empty access set");
            std::uint32_t prev = 0;
            bool first = true;
            for (std::uint32_t tok : s.accessed) {
                if (tok >= t.header.prompt_len + n)
                    throw validation_error("steps: future token access");
                if (!first && tok <= prev)
                    throw validation_error("steps: unsorted or duplicate token index");
                prev = tok;
                first = false;
            }
        }
    }
}

namespace {

// Evolving important-token set for one generator stream. The set for step n
// lives in the universe of past tokens [0, P+n-1); replace-then-resize with
// uniform draws moves it between steps.
class SetEvolver {
public:
    SetEvolver(std::uint32_t prompt_len, std::uint32_t total_tokens, double sparsity, double churn,
               std::uint64_t seed)
        : prompt_len_(prompt_len),
          sparsity_(sparsity),
          churn_(churn),
          member_(total_tokens, 0),
          rng_(seed) {}

    const std::vector<std::uint32_t>& advance(std::uint32_t n) {
        const std::uint32_t universe = prompt_len_ + n - 1;
        if (universe == 0) {
            // No past tokens exist (P = 0, n = 1): the step reads the entry
            // written for the token being generated.
            member_[0] = 1;
            count_ = 1;
            started_ = true;
            sorted_.assign(1, 0);
            return sorted_;
        }
        const std::uint32_t k = target_size(universe);
        if (!started_) {
            started_ = true;
            std::vector<std::uint32_t> pool(universe);
            std::iota(pool.begin(), pool.end(), 0u);
            for (std::uint32_t tok : sample_without_replacement(rng_, pool, k)) member_[tok] = 1;
            count_ = k;
        } else {
            const std::uint32_t churned =
                static_cast<std::uint32_t>(std::ceil(churn_ * static_cast<double>(count_)));
            if (churned > 0) {
                remove_random(churned);
                insert_random(churned, universe);
            }
            if (count_ > k) remove_random(count_ - k);
            else if (count_ < k) insert_random(k - count_, universe);
        }
        sorted_.clear();
        sorted_.reserve(count_);
        for (std::uint32_t tok = 0; tok < universe; ++tok)
            if (member_[tok]) sorted_.push_back(tok);
        return sorted_;
    }

private:
    std::uint32_t target_size(std::uint32_t universe) const {
        const auto k = static_cast<std::uint32_t>(
            ceil_fraction((1.0 - sparsity_) * static_cast<double>(universe)));
        return std::max<std::uint32_t>(1, std::min(k, universe));
    }

    void remove_random(std::uint32_t count) {
        std::vector<std::uint32_t> members;
        members.reserve(count_);
        for (std::uint32_t tok = 0; tok < member_.size(); ++tok)
            if (member_[tok]) members.push_back(tok);
        for (std::uint32_t tok : sample_without_replacement(rng_, members, count)) member_[tok] = 0;
        count_ -= count;
    }

    void insert_random(std::uint32_t count, std::uint32_t universe) {
        std::vector<std::uint32_t> non_members;
        non_members.reserve(universe - count_);
        for (std::uint32_t tok = 0; tok < universe; ++tok)
            if (!member_[tok]) non_members.push_back(tok);
        for (std::uint32_t tok : sample_without_replacement(rng_, non_members, count)) member_[tok] = 1;
        count_ += count;
    }

    std::uint32_t prompt_len_;
    double sparsity_;
    double churn_;
    std::vector<std::uint8_t> member_;
    std::vector<std::uint32_t> sorted_;
    std::uint32_t count_ = 0;
    bool started_ = false;
    std::mt19937_64 rng_;
};

} // namespace

DecodeTrace synthesize_trace(const SynthTraceSpec& spec) {
    validate_spec(spec);
    const TraceHeader& h = spec.header;
    DecodeTrace trace;
    trace.header = h;
    trace.steps.reserve(static_cast<std::size_t>(h.decode_len) * h.num_layers);

    if (spec.per_layer_independent) {
        std::vector<SetEvolver> evolvers;
        evolvers.reserve(h.num_layers);
        for (std::uint32_t l = 0; l < h.num_layers; ++l)
            evolvers.emplace_back(h.prompt_len, h.total_tokens(), spec.sparsity, spec.churn,
                                  mix_seed(spec.seed, l + 1));
        for (std::uint32_t n = 1; n <= h.decode_len; ++n)
            for (std::uint32_t l = 0; l < h.num_layers; ++l)
                trace.steps.push_back({n, l, evolvers[l].advance(n)});
    } else {
        SetEvolver evolver(h.prompt_len, h.total_tokens(), spec.sparsity, spec.churn,
                           mix_seed(spec.seed, 0));
        for (std::uint32_t n = 1; n <= h.decode_len; ++n) {
            const std::vector<std::uint32_t>& shared = evolver.advance(n);
            for (std::uint32_t l = 0; l < h.num_layers; ++l) trace.steps.push_back({n, l, shared});
        }
    }
    return trace;
}

namespace {

std::string step_tag(std::uint32_t n, std::uint32_t l) {
    return "(n=" + std::to_string(n) + ", l=" + std::to_string(l) + ")";
}

std::uint64_t parse_u64(std::string_view text, const std::string& what) {
    std::uint64_t value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw parse_error("malformed " + what + ": '" + std::string(text) + "'");
    return value;
}

// Splits "a b rest" into the two leading fields plus the remainder.
bool split_step_line(std::string_view line, std::string_view& a, std::string_view& b,
                     std::string_view& rest) {
    const std::size_t s1 = line.find(' ');
    if (s1 == std::string_view::npos) return false;
    const std::size_t s2 = line.find(' ', s1 + 1);
    if (s2 == std::string_view::npos) return false;
    a = line.substr(0, s1);
    b = line.substr(s1 + 1, s2 - s1 - 1);
    rest = line.substr(s2 + 1);
    return true;
}

} // namespace

DecodeTrace scores_to_trace(std::istream& scores, double sparsity, const TraceHeader& header) {
    validate_header(header);
    if (!(sparsity >= 0 && sparsity <= 1)) throw validation_error("sparsity: must be in [0, 1]");

    DecodeTrace trace;
    trace.header = header;
    trace.steps.reserve(static_cast<std::size_t>(header.decode_len) * header.num_layers);

    std::string line;
    std::size_t line_no = 0;
    std::vector<double> score_buf;
    std::vector<std::uint32_t> order;
    for (std::uint32_t n = 1; n <= header.decode_len; ++n) {
        for (std::uint32_t l = 0; l < header.num_layers; ++l) {
            if (!std::getline(scores, line))
                throw parse_error("score stream ended early: missing step " + step_tag(n, l));
            ++line_no;
            std::string_view ns, ls, rest;
            if (!split_step_line(line, ns, ls, rest))
                throw parse_error("malformed score line " + std::to_string(line_no) +
                                  ": expected '<n> <l> <scores>'");
            if (parse_u64(ns, "token index") != n || parse_u64(ls, "layer index") != l)
                throw parse_error("score line " + std::to_string(line_no) +
                                  ": unexpected step, expected " + step_tag(n, l));

            const std::uint32_t universe = header.prompt_len + n - 1;
            score_buf.clear();
            if (!rest.empty()) {
                std::size_t pos = 0;
                while (pos <= rest.size()) {
                    std::size_t comma = rest.find(',', pos);
                    if (comma == std::string_view::npos) comma = rest.size();
                    const std::string field(rest.substr(pos, comma - pos));
                    char* end = nullptr;
                    const double value = std::strtod(field.c_str(), &end);
                    if (field.empty() || end != field.c_str() + field.size())
                        throw parse_error("malformed score at " + step_tag(n, l));
                    if (!std::isfinite(value))
                        throw parse_error("non-finite score at " + step_tag(n, l));
                    score_buf.push_back(value);
                    if (comma == rest.size()) break;
                    pos = comma + 1;
                }
            }
            if (score_buf.size() != universe)
                throw parse_error("score count mismatch at " + step_tag(n, l) + ": expected " +
                                  std::to_string(universe) + ", got " +
                                  std::to_string(score_buf.size()));

            StepAccess access;
            access.n = n;
            access.l = l;
            if (universe == 0) {
                // No past tokens to rank: the step reads its own new entry.
                access.accessed.push_back(header.prompt_len + n - 1);
            } else {
                const auto keep = std::max<std::uint32_t>(
                    1, std::min(static_cast<std::uint32_t>(ceil_fraction(
                           (1.0 - sparsity) * static_cast<double>(universe))),
                       universe));
                order.resize(universe);
                std::iota(order.begin(), order.end(), 0u);
                // Recency tie-break: equal scores keep the larger token index.
                std::partial_sort(order.begin(), order.begin() + keep, order.end(),
                                  [&](std::uint32_t a, std::uint32_t b) {
                                      if (score_buf[a] != score_buf[b])
                                          return score_buf[a] > score_buf[b];
                                      return a > b;
                                  });
                access.accessed.assign(order.begin(), order.begin() + keep);
                std::sort(access.accessed.begin(), access.accessed.end());
            }
            trace.steps.push_back(std::move(access));
        }
    }
    return trace;
}

DecodeTrace scores_to_trace_file(const std::string& path, double sparsity, const TraceHeader& header) {
    std::ifstream in(path);
    if (!in) throw parse_error("cannot open score file: " + path);
    return scores_to_trace(in, sparsity, header);
}

void write_trace(const DecodeTrace& trace, std::ostream& out) {
    validate_trace(trace);
    const TraceHeader& h = trace.header;
    out << "KVTRACE v1 L=" << h.num_layers << " P=" << h.prompt_len << " N=" << h.decode_len
        << " E=" << h.entry_bytes << " W=" << h.weight_bytes_per_layer << '\n';
    for (const StepAccess& s : trace.steps) {
        out << s.n << ' ' << s.l << ' ';
        for (std::size_t i = 0; i < s.accessed.size(); ++i) {
            if (i) out << ',';
            out << s.accessed[i];
        }
        out << '\n';
    }
}

void write_trace_file(const DecodeTrace& trace, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw parse_error("cannot open trace file for writing: " + path);
    write_trace(trace, out);
    out.flush();
    if (!out) throw parse_error("failed writing trace file: " + path);
}

namespace {

std::uint64_t parse_header_field(std::string_view field, std::string_view key) {
    if (field.substr(0, key.size()) != key)
        throw parse_error("malformed header at line 1: expected '" + std::string(key) + "<value>'");
    return parse_u64(field.substr(key.size()), "header field " + std::string(key));
}

} // namespace

DecodeTrace read_trace(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw parse_error("malformed header at line 1: empty input");

    std::vector<std::string_view> fields;
    {
        std::string_view view(line);
        std::size_t pos = 0;
        while (pos <= view.size()) {
            std::size_t space = view.find(' ', pos);
            if (space == std::string_view::npos) space = view.size();
            fields.push_back(view.substr(pos, space - pos));
            if (space == view.size()) break;
            pos = space + 1;
        }
    }
    if (fields.size() != 7 || fields[0] != "KVTRACE" || fields[1] != "v1")
        throw parse_error("malformed header at line 1: expected 'KVTRACE v1 L= P= N= E= W='");

    DecodeTrace trace;
    TraceHeader& h = trace.header;
    h.num_layers = static_cast<std::uint32_t>(parse_header_field(fields[2], "L="));
    h.prompt_len = static_cast<std::uint32_t>(parse_header_field(fields[3], "P="));
    h.decode_len = static_cast<std::uint32_t>(parse_header_field(fields[4], "N="));
    h.entry_bytes = parse_header_field(fields[5], "E=");
    h.weight_bytes_per_layer = parse_header_field(fields[6], "W=");
    try {
        validate_header(h);
    } catch (const validation_error& e) {
        throw parse_error("malformed header at line 1: " + std::string(e.what()));
    }

    const std::uint64_t expected =
        static_cast<std::uint64_t>(h.decode_len) * static_cast<std::uint64_t>(h.num_layers);
    trace.steps.reserve(expected);
    std::size_t line_no = 1;
    for (std::uint32_t n = 1; n <= h.decode_len; ++n) {
        for (std::uint32_t l = 0; l < h.num_layers; ++l) {
            if (!std::getline(in, line))
                throw parse_error("step count mismatch: expected " + std::to_string(expected) +
                                  " step lines, got " + std::to_string(line_no - 1));
            ++line_no;
            std::string_view ns, ls, rest;
            if (!split_step_line(line, ns, ls, rest))
                throw parse_error("malformed step at line " + std::to_string(line_no) +
                                  ": expected '<n> <l> <indices>'");
            if (parse_u64(ns, "step n") != n || parse_u64(ls, "step l") != l)
                throw parse_error("step order mismatch at line " + std::to_string(line_no) +
                                  ": expected " + step_tag(n, l));
            if (rest.empty())
                throw parse_error("empty access set at line " + std::to_string(line_no));

            StepAccess access;
            access.n = n;
            access.l = l;
            std::size_t pos = 0;
            bool first = true;
            std::uint32_t prev = 0;
            while (pos <= rest.size()) {
                std::size_t comma = rest.find(',', pos);
                if (comma == std::string_view::npos) comma = rest.size();
                const std::uint64_t tok = parse_u64(rest.substr(pos, comma - pos), "token index");
                if (tok >= static_cast<std::uint64_t>(h.prompt_len) + n)
                    throw parse_error("future token access at line " + std::to_string(line_no));
                const auto tok32 = static_cast<std::uint32_t>(tok);
                if (!first && tok32 <= prev)
                    throw parse_error("unsorted or duplicate token index at line " +
                                      std::to_string(line_no));
                access.accessed.push_back(tok32);
                prev = tok32;
                first = false;
                if (comma == rest.size()) break;
                pos = comma + 1;
            }
            trace.steps.push_back(std::move(access));
        }
    }
    if (std::getline(in, line))
        throw parse_error("step count mismatch: trailing content at line " +
                          std::to_string(line_no + 1));
    return trace;
}

DecodeTrace read_trace_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw parse_error("cannot open trace file: " + path);
    return read_trace(in);
}

double mean_access_set_size(const DecodeTrace& trace) {
    if (trace.steps.empty()) return 0;
    std::uint64_t total = 0;
    for (const StepAccess& s : trace.steps) total += s.accessed.size();
    return static_cast<double>(total) / static_cast<double>(trace.steps.size());
}

} // namespace kvtier
