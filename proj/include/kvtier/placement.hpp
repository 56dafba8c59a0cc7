#ifndef KVTIER_PLACEMENT_HPP
#define KVTIER_PLACEMENT_HPP

#include <cstdint>
#include <vector>

#include "kvtier/memory_model.hpp"
#include "kvtier/trace.hpp"

namespace kvtier {

enum class Tier : std::uint8_t { Hbm = 0, Dram = 1 };

struct EntryId {
    std::uint32_t token = 0;
    std::uint32_t layer = 0;

    bool operator==(const EntryId&) const = default;
};

// One step's migration/write choice. Members must be disjoint and resident
// on the tier they leave; the new entry for step (n, l) is (P+n-1, l).
struct ScheduleDecision {
    std::vector<EntryId> migrate_out;  // HBM -> DRAM
    std::vector<EntryId> migrate_in;   // DRAM -> HBM
    Tier new_entry_tier = Tier::Hbm;
};

// Migration/write byte volumes produced by applying one decision.
struct DecisionTraffic {
    std::uint64_t migrate_out_bytes = 0;
    std::uint64_t migrate_in_bytes = 0;
    std::uint64_t hbm_write_bytes = 0;
    std::uint64_t dram_write_bytes = 0;
};

// Read-side byte volumes plus hit/miss entry counts for one step.
struct ReadTraffic {
    std::uint64_t hbm_read_bytes = 0;   // weights + KV hits
    std::uint64_t dram_read_bytes = 0;  // KV misses
    std::uint64_t hit_count = 0;
    std::uint64_t miss_count = 0;
};

// Tier-residency state machine. Tracks where every written KV entry lives,
// applies schedule decisions under the HBM capacity constraint, and derives
// per-step traffic from access sets. Entries are never discarded.
class PlacementState {
public:
    static constexpr std::int64_t kNeverTouched = 0;

    // Prefill entries (tokens 0..P-1, all layers, (token, layer) order) fill
    // HBM until weights + KV would exceed capacity, then spill to DRAM.
    // With unlimited_hbm the fill and all later capacity checks are skipped.
    // Throws validation_error if the weights alone exceed HBM capacity.
    PlacementState(const TraceHeader& header, const MemoryConfig& cfg, bool unlimited_hbm = false);

    // Applies migrations then writes the step's new entry (P+n-1, l).
    // Migrations take effect before the step's reads are accounted. Throws
    // infeasible_error when the post-decision occupancy violates capacity
    // (never silently repairs) and logic_error for non-resident migrations.
    DecisionTraffic apply_decision(const ScheduleDecision& decision, std::uint32_t n, std::uint32_t l);

    // Read accounting for one access set; bumps last_touch of the accessed
    // entries to the step ordinal.
    ReadTraffic read_traffic(const StepAccess& access, std::uint64_t weight_bytes_per_layer);

    // True when the entry has been written (prefill or decode).
    bool present(std::uint32_t token, std::uint32_t layer) const {
        return slot_[index(token, layer)] != kAbsent;
    }
    Tier tier(std::uint32_t token, std::uint32_t layer) const {
        return static_cast<Tier>(slot_[index(token, layer)]);
    }
    std::int64_t last_touch(std::uint32_t token, std::uint32_t layer) const {
        return touch_[index(token, layer)];
    }

    std::uint64_t entry_count() const { return entry_count_; }
    std::uint64_t hbm_entry_count() const { return hbm_entries_; }
    std::uint64_t hbm_kv_bytes() const { return hbm_entries_ * entry_bytes_; }
    std::uint64_t weights_bytes() const { return weights_bytes_; }
    std::uint64_t hbm_resident_bytes() const { return weights_bytes_ + hbm_kv_bytes(); }
    std::uint64_t entry_bytes() const { return entry_bytes_; }
    std::uint32_t num_layers() const { return num_layers_; }
    std::uint32_t total_tokens() const { return total_tokens_; }
    bool capacity_enforced() const { return enforce_capacity_; }

    // Total KV slots HBM can hold next to the weights, and how many are free.
    std::uint64_t kv_slot_capacity() const { return kv_slot_capacity_; }
    std::uint64_t free_kv_slots() const { return kv_slot_capacity_ - hbm_entries_; }

    // Step ordinal used for last_touch (total order across (n, l)).
    std::int64_t step_ordinal(std::uint32_t n, std::uint32_t l) const {
        return static_cast<std::int64_t>(n) * num_layers_ + l;
    }

    // Recomputes hbm entry count from scratch and compares with the
    // incrementally maintained value; throws logic_error on mismatch.
    void audit() const;

private:
    static constexpr std::uint8_t kAbsent = 2;

    std::size_t index(std::uint32_t token, std::uint32_t layer) const {
        return static_cast<std::size_t>(token) * num_layers_ + layer;
    }
    void check_resident(const EntryId& e, Tier expected, const char* action) const;

    std::uint32_t num_layers_;
    std::uint32_t prompt_len_;
    std::uint32_t total_tokens_;
    std::uint64_t entry_bytes_;
    std::uint64_t weights_bytes_;
    std::uint64_t hbm_capacity_;
    std::uint64_t kv_slot_capacity_;
    bool enforce_capacity_;

    std::vector<std::uint8_t> slot_;   // Tier or kAbsent, token-major
    std::vector<std::int64_t> touch_;  // step ordinal of last access
    std::uint64_t entry_count_ = 0;
    std::uint64_t hbm_entries_ = 0;
};

} // namespace kvtier

#endif
