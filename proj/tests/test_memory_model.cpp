#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "kvtier/errors.hpp"
#include "kvtier/memory_model.hpp"
#include "kvtier/rand_util.hpp"

using namespace kvtier;

namespace {

MemoryConfig table_defaults() { return default_memory_config(); }

StepTraffic random_traffic(std::mt19937_64& rng) {
    StepTraffic t;
    t.hbm_read = bounded_u64(rng, 1ULL << 40);
    t.hbm_write = bounded_u64(rng, 1ULL << 32);
    t.dram_read = bounded_u64(rng, 1ULL << 40);
    t.dram_write = bounded_u64(rng, 1ULL << 32);
    t.migrate_in = bounded_u64(rng, 1ULL << 36);
    t.migrate_out = bounded_u64(rng, 1ULL << 36);
    return t;
}

MemoryConfig random_config(std::mt19937_64& rng) {
    MemoryConfig cfg;
    cfg.hbm_bandwidth = 1e9 + static_cast<double>(bounded_u64(rng, 1ULL << 42));
    cfg.link_bandwidth = 1e8 + static_cast<double>(bounded_u64(rng, 1ULL << 40));
    cfg.dram_bandwidth = 1e8 + static_cast<double>(bounded_u64(rng, 1ULL << 40));
    cfg.hbm_capacity = 1 + bounded_u64(rng, 1ULL << 36);
    cfg.dram_capacity = 1 + bounded_u64(rng, 1ULL << 40);
    return cfg;
}

} // namespace

TEST_CASE("hbm_step_latency matches the bandwidth ratio") {
    MemoryConfig cfg = table_defaults();
    StepTraffic t;
    t.hbm_read = 4'900'000'000'000ULL;
    CHECK(hbm_step_latency(t, cfg) == doctest::Approx(1.0).epsilon(1e-12));

    StepTraffic zero;
    CHECK(hbm_step_latency(zero, cfg) == 0.0);

    StepTraffic mixed;
    mixed.hbm_read = 2'000'000'000ULL;
    mixed.hbm_write = 1'000'000'000ULL;
    mixed.migrate_in = 500'000'000ULL;
    mixed.migrate_out = 500'000'000ULL;
    const double expected = 4e9 / 4.9e12;
    CHECK(std::abs(hbm_step_latency(mixed, cfg) - expected) <= 1e-12 * expected);
}

TEST_CASE("dram_step_latency follows the link/channel max") {
    MemoryConfig cfg = table_defaults();
    cfg.link_bandwidth = 9e11;
    cfg.dram_bandwidth = 5e11;

    StepTraffic reads;
    reads.dram_read = 500'000'000'000ULL;
    CHECK(dram_step_latency(reads, cfg) == doctest::Approx(1.0).epsilon(1e-12));

    StepTraffic writes;
    writes.dram_write = 900'000'000'000ULL;
    CHECK(dram_step_latency(writes, cfg) == doctest::Approx(1.8).epsilon(1e-12));

    StepTraffic inbound;
    inbound.migrate_in = 900'000'000'000ULL;
    CHECK(dram_step_latency(inbound, cfg) == doctest::Approx(1.8).epsilon(1e-12));
}

TEST_CASE("step_latency is the max of the tier latencies") {
    MemoryConfig cfg = table_defaults();
    cfg.link_bandwidth = 9e11;
    cfg.dram_bandwidth = 5e11;

    StepTraffic t;
    t.dram_read = 500'000'000'000ULL;   // t_e = 1.0
    t.dram_write = 900'000'000'000ULL;  // pushes t_e to 1.0 + 1.8
    t.hbm_read = 4'900'000'000'000ULL;  // t_h = 1.0
    CHECK(step_latency(t, cfg) == doctest::Approx(2.8).epsilon(1e-12));

    StepTraffic zero;
    CHECK(step_latency(zero, cfg) == 0.0);

    StepTraffic hbm_only;
    hbm_only.hbm_read = 123'456'789ULL;
    CHECK(step_latency(hbm_only, cfg) == hbm_step_latency(hbm_only, cfg));
}

TEST_CASE("total_latency sums steps in order") {
    MemoryConfig cfg = table_defaults();
    cfg.link_bandwidth = 9e11;
    cfg.dram_bandwidth = 5e11;

    StepTraffic a;  // 1.8 s: DRAM write bound by the channel
    a.dram_write = 900'000'000'000ULL;
    StepTraffic b;  // 1.0 s
    b.hbm_read = 4'900'000'000'000ULL;
    const std::vector<StepTraffic> steps = {a, b};
    CHECK(total_latency(steps, cfg) == doctest::Approx(2.8).epsilon(1e-12));

    CHECK(total_latency({}, cfg) == 0.0);

    StepTraffic c;  // HBM-only traffic so the step latency is 4e9 / 4.9e12
    c.hbm_read = 3'000'000'000ULL;
    c.hbm_write = 1'000'000'000ULL;
    const std::vector<StepTraffic> hundred(100, c);
    CHECK(step_latency(c, cfg) == doctest::Approx(8.1633e-4).epsilon(1e-4));
    const double expected = 100.0 * (4e9 / 4.9e12);
    CHECK(std::abs(total_latency(hundred, cfg) - expected) <= 1e-12 * expected);
}

TEST_CASE("total_latency agrees with a compensated-summation oracle") {
    std::mt19937_64 rng(421);
    MemoryConfig cfg = table_defaults();
    std::vector<StepTraffic> steps;
    for (int i = 0; i < 5000; ++i) steps.push_back(random_traffic(rng));

    double sum = 0, carry = 0;
    for (const StepTraffic& t : steps) {
        const double y = step_latency(t, cfg) - carry;
        const double s = sum + y;
        carry = (s - sum) - y;
        sum = s;
    }
    const double plain = total_latency(steps, cfg);
    CHECK(std::abs(plain - sum) <= 1e-10 * sum);
}

TEST_CASE("check_capacity boundary behaviour") {
    MemoryConfig cfg = table_defaults();
    const CapacityCheck at = check_capacity(cfg.hbm_capacity, cfg);
    CHECK(at.feasible);
    CHECK(at.usage == doctest::Approx(1.0).epsilon(1e-12));

    CHECK_FALSE(check_capacity(cfg.hbm_capacity + 1, cfg).feasible);

    const CapacityCheck empty = check_capacity(0, cfg);
    CHECK(empty.feasible);
    CHECK(empty.usage == 0.0);
}

TEST_CASE("table defaults") {
    const MemoryConfig cfg = default_memory_config();
    CHECK(cfg.hbm_bandwidth == 4.9e12);
    CHECK(cfg.link_bandwidth == 900e9);
    CHECK(cfg.dram_bandwidth == 500e9);
    CHECK(cfg.hbm_capacity == 24'000'000'000ULL);
    CHECK(cfg.dram_capacity == 480'000'000'000ULL);
}

TEST_CASE("config validation names the offending field") {
    MemoryConfig cfg = default_memory_config();
    cfg.dram_bandwidth = 0;
    CHECK_THROWS_WITH_AS(validate_memory_config(cfg), "memory.dram_bandwidth: must be > 0",
                         validation_error);
    cfg = default_memory_config();
    cfg.hbm_capacity = 0;
    CHECK_THROWS_AS(validate_memory_config(cfg), validation_error);
}

TEST_CASE("property: latency is monotone in every traffic field") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 300; ++i) {
        const MemoryConfig cfg = random_config(rng);
        const StepTraffic base = random_traffic(rng);
        const double before = step_latency(base, cfg);
        StepTraffic bumped = base;
        const std::uint64_t bump = 1 + bounded_u64(rng, 1ULL << 30);
        switch (bounded_u64(rng, 6)) {
            case 0: bumped.hbm_read += bump; break;
            case 1: bumped.hbm_write += bump; break;
            case 2: bumped.dram_read += bump; break;
            case 3: bumped.dram_write += bump; break;
            case 4: bumped.migrate_in += bump; break;
            default: bumped.migrate_out += bump; break;
        }
        CHECK(step_latency(bumped, cfg) >= before);
    }
}

TEST_CASE("property: homogeneity in traffic and bandwidth") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 200; ++i) {
        const MemoryConfig cfg = random_config(rng);
        StepTraffic t = random_traffic(rng);
        const std::uint64_t c = 2 + bounded_u64(rng, 6);

        StepTraffic scaled = t;
        scaled.hbm_read *= c;
        scaled.hbm_write *= c;
        scaled.dram_read *= c;
        scaled.dram_write *= c;
        scaled.migrate_in *= c;
        scaled.migrate_out *= c;
        const double base = step_latency(t, cfg);
        if (base > 0) {
            CHECK(std::abs(step_latency(scaled, cfg) - static_cast<double>(c) * base) <=
                  1e-12 * static_cast<double>(c) * base);
        }

        MemoryConfig faster = cfg;
        faster.hbm_bandwidth *= static_cast<double>(c);
        faster.link_bandwidth *= static_cast<double>(c);
        faster.dram_bandwidth *= static_cast<double>(c);
        if (base > 0) {
            CHECK(std::abs(step_latency(t, faster) - base / static_cast<double>(c)) <=
                  1e-12 * base / static_cast<double>(c));
        }
    }
}

TEST_CASE("property: pure reads collapse the DRAM max term") {
    std::mt19937_64 rng(13);
    for (int i = 0; i < 200; ++i) {
        const MemoryConfig cfg = random_config(rng);
        StepTraffic t;
        t.dram_read = bounded_u64(rng, 1ULL << 40);
        t.hbm_read = bounded_u64(rng, 1ULL << 40);
        const double expected =
            static_cast<double>(t.dram_read) / std::min(cfg.link_bandwidth, cfg.dram_bandwidth);
        CHECK(dram_step_latency(t, cfg) == expected);
    }
}
