#include <doctest.h>

#include <random>

#include "kvtier/errors.hpp"
#include "kvtier/placement.hpp"
#include "kvtier/rand_util.hpp"

using namespace kvtier;

namespace {

TraceHeader small_header(std::uint32_t layers, std::uint32_t prompt, std::uint32_t decode,
                         std::uint64_t entry_bytes, std::uint64_t weight_bytes) {
    TraceHeader h;
    h.num_layers = layers;
    h.prompt_len = prompt;
    h.decode_len = decode;
    h.entry_bytes = entry_bytes;
    h.weight_bytes_per_layer = weight_bytes;
    return h;
}

MemoryConfig config_with_hbm(std::uint64_t hbm_capacity) {
    MemoryConfig cfg = default_memory_config();
    cfg.hbm_capacity = hbm_capacity;
    return cfg;
}

} // namespace

TEST_CASE("initial placement fills HBM then spills to DRAM") {
    // Room for the weights plus exactly 3 entries; 5 prefill entries total.
    const TraceHeader h = small_header(1, 5, 1, 100, 250);
    const PlacementState state(h, config_with_hbm(250 + 3 * 100));
    CHECK(state.tier(0, 0) == Tier::Hbm);
    CHECK(state.tier(1, 0) == Tier::Hbm);
    CHECK(state.tier(2, 0) == Tier::Hbm);
    CHECK(state.tier(3, 0) == Tier::Dram);
    CHECK(state.tier(4, 0) == Tier::Dram);
    CHECK(state.hbm_kv_bytes() == 300);
    CHECK(state.entry_count() == 5);
}

TEST_CASE("empty prompt yields an empty KV map") {
    const TraceHeader h = small_header(2, 0, 4, 64, 128);
    const PlacementState state(h, config_with_hbm(1 << 20));
    CHECK(state.entry_count() == 0);
    CHECK(state.hbm_kv_bytes() == 0);
}

TEST_CASE("weights larger than HBM are a configuration error") {
    const TraceHeader h = small_header(2, 1, 1, 64, 4096);
    CHECK_THROWS_AS(PlacementState(h, config_with_hbm(8000)), validation_error);
    // The unlimited bound ignores capacity entirely.
    CHECK_NOTHROW(PlacementState(h, config_with_hbm(8000), true));
}

TEST_CASE("empty decision writes the new entry") {
    const TraceHeader h = small_header(1, 2, 2, 100, 0);
    PlacementState state(h, config_with_hbm(1000));

    ScheduleDecision d;
    d.new_entry_tier = Tier::Hbm;
    const DecisionTraffic t = state.apply_decision(d, 1, 0);
    CHECK(t.hbm_write_bytes == 100);
    CHECK(t.dram_write_bytes == 0);
    CHECK(t.migrate_in_bytes == 0);
    CHECK(t.migrate_out_bytes == 0);
    CHECK(state.tier(2, 0) == Tier::Hbm);
    CHECK(state.entry_count() == 3);
}

TEST_CASE("swap keeps occupancy constant") {
    const TraceHeader h = small_header(1, 4, 1, 100, 0);
    PlacementState state(h, config_with_hbm(2 * 100));  // tokens 0,1 in HBM; 2,3 in DRAM
    const std::uint64_t before = state.hbm_kv_bytes();

    ScheduleDecision d;
    d.migrate_out = {{0, 0}, {1, 0}};
    d.migrate_in = {{2, 0}, {3, 0}};
    d.new_entry_tier = Tier::Dram;
    const DecisionTraffic t = state.apply_decision(d, 1, 0);
    CHECK(t.migrate_in_bytes == 200);
    CHECK(t.migrate_out_bytes == 200);
    CHECK(state.hbm_kv_bytes() == before);
    CHECK(state.tier(0, 0) == Tier::Dram);
    CHECK(state.tier(2, 0) == Tier::Hbm);
}

TEST_CASE("capacity violations are hard errors") {
    const TraceHeader h = small_header(1, 2, 1, 100, 0);
    PlacementState state(h, config_with_hbm(2 * 100));  // both prefill entries fit exactly

    ScheduleDecision d;
    d.new_entry_tier = Tier::Hbm;  // would need a third slot
    CHECK_THROWS_AS(state.apply_decision(d, 1, 0), infeasible_error);
    // Nothing was applied.
    CHECK(state.entry_count() == 2);
    d.new_entry_tier = Tier::Dram;
    CHECK_NOTHROW(state.apply_decision(d, 1, 0));
}

TEST_CASE("migrating a non-resident entry is a logic error") {
    const TraceHeader h = small_header(1, 2, 1, 100, 0);
    PlacementState state(h, config_with_hbm(1000));  // both prefill entries in HBM

    ScheduleDecision d;
    d.migrate_in = {{0, 0}};  // already in HBM
    d.new_entry_tier = Tier::Dram;
    CHECK_THROWS_AS(state.apply_decision(d, 1, 0), logic_error);

    ScheduleDecision unwritten;
    unwritten.migrate_out = {{2, 0}};  // not written yet
    CHECK_THROWS_AS(state.apply_decision(unwritten, 1, 0), logic_error);
}

TEST_CASE("read traffic counts hits and misses") {
    const TraceHeader h = small_header(1, 4, 1, 4096, 0);
    PlacementState state(h, config_with_hbm(3 * 4096));  // tokens 0..2 HBM, 3 DRAM

    StepAccess access;
    access.n = 1;
    access.l = 0;
    access.accessed = {0, 1, 2, 3};
    const ReadTraffic t = state.read_traffic(access, 0);
    CHECK(t.hbm_read_bytes == 12288);
    CHECK(t.dram_read_bytes == 4096);
    CHECK(t.hit_count == 3);
    CHECK(t.miss_count == 1);
    CHECK(state.last_touch(0, 0) == state.step_ordinal(1, 0));
}

TEST_CASE("all-HBM access yields no DRAM reads") {
    const TraceHeader h = small_header(1, 3, 1, 100, 50);
    PlacementState state(h, config_with_hbm(1 << 16));
    StepAccess access;
    access.n = 1;
    access.l = 0;
    access.accessed = {0, 1, 2};
    const ReadTraffic t = state.read_traffic(access, 50);
    CHECK(t.dram_read_bytes == 0);
    CHECK(t.miss_count == 0);
    CHECK(t.hbm_read_bytes == 50 + 300);
}

TEST_CASE("property: decisions conserve entries and replay identically") {
    std::mt19937_64 rng(99);
    for (int round = 0; round < 10; ++round) {
        const std::uint32_t layers = 1 + static_cast<std::uint32_t>(bounded_u64(rng, 3));
        const std::uint32_t prompt = static_cast<std::uint32_t>(bounded_u64(rng, 20));
        const std::uint32_t decode = 1 + static_cast<std::uint32_t>(bounded_u64(rng, 15));
        const TraceHeader h = small_header(layers, prompt, decode, 64, 0);
        const MemoryConfig cfg =
            config_with_hbm(64 * (1 + bounded_u64(rng, h.total_entries() + 4)));

        // Random feasible decision sequence, recorded for replay.
        std::vector<ScheduleDecision> decisions;
        PlacementState state(h, cfg);
        std::uint64_t expected_entries = state.entry_count();
        for (std::uint32_t n = 1; n <= decode; ++n) {
            for (std::uint32_t l = 0; l < layers; ++l) {
                ScheduleDecision d;
                // Collect residents and randomly swap a few across tiers.
                for (std::uint32_t token = 0; token < prompt + n - 1; ++token) {
                    if (!state.present(token, l)) continue;
                    if (bounded_u64(rng, 8) != 0) continue;
                    if (state.tier(token, l) == Tier::Hbm) d.migrate_out.push_back({token, l});
                    else d.migrate_in.push_back({token, l});
                }
                const std::uint64_t occupancy = state.hbm_entry_count() - d.migrate_out.size() +
                                                d.migrate_in.size();
                if (occupancy + 1 <= state.kv_slot_capacity()) d.new_entry_tier = Tier::Hbm;
                else d.new_entry_tier = Tier::Dram;
                if (occupancy > state.kv_slot_capacity()) {
                    // Drop promotions that cannot fit.
                    d.migrate_in.resize(d.migrate_in.size() -
                                        std::min<std::uint64_t>(d.migrate_in.size(),
                                                                occupancy - state.kv_slot_capacity()));
                }
                state.apply_decision(d, n, l);
                decisions.push_back(d);
                ++expected_entries;
                CHECK(state.entry_count() == expected_entries);
                CHECK(state.hbm_resident_bytes() <= cfg.hbm_capacity);
            }
        }
        state.audit();

        // Replay is bit-identical.
        PlacementState replay(h, cfg);
        std::size_t i = 0;
        for (std::uint32_t n = 1; n <= decode; ++n)
            for (std::uint32_t l = 0; l < layers; ++l) {
                const DecisionTraffic t = replay.apply_decision(decisions[i++], n, l);
                (void)t;
            }
        for (std::uint32_t token = 0; token < h.total_tokens(); ++token)
            for (std::uint32_t l = 0; l < layers; ++l) {
                REQUIRE(replay.present(token, l) == state.present(token, l));
                if (state.present(token, l)) REQUIRE(replay.tier(token, l) == state.tier(token, l));
            }
    }
}
