#include "kvtier/placement.hpp"

#include <limits>
#include <string>

#include "kvtier/errors.hpp"

namespace kvtier {

namespace {

std::string entry_tag(const EntryId& e) {
    return "(token=" + std::to_string(e.token) + ", layer=" + std::to_string(e.layer) + ")";
}

} // namespace

PlacementState::PlacementState(const TraceHeader& header, const MemoryConfig& cfg, bool unlimited_hbm)
    : num_layers_(header.num_layers),
      prompt_len_(header.prompt_len),
      total_tokens_(header.total_tokens()),
      entry_bytes_(header.entry_bytes),
      weights_bytes_(header.weights_bytes()),
      hbm_capacity_(cfg.hbm_capacity),
      enforce_capacity_(!unlimited_hbm) {
    if (enforce_capacity_ && weights_bytes_ > hbm_capacity_)
        throw validation_error("model weights (" + std::to_string(weights_bytes_) +
                               " B) exceed HBM capacity (" + std::to_string(hbm_capacity_) + " B)");
    kv_slot_capacity_ = enforce_capacity_
                            ? (hbm_capacity_ - weights_bytes_) / entry_bytes_
                            : std::numeric_limits<std::uint64_t>::max() / entry_bytes_;

    slot_.assign(static_cast<std::size_t>(total_tokens_) * num_layers_, kAbsent);
    touch_.assign(slot_.size(), kNeverTouched);

    for (std::uint32_t token = 0; token < prompt_len_; ++token) {
        for (std::uint32_t layer = 0; layer < num_layers_; ++layer) {
            const bool to_hbm = hbm_entries_ < kv_slot_capacity_;
            slot_[index(token, layer)] = static_cast<std::uint8_t>(to_hbm ? Tier::Hbm : Tier::Dram);
            ++entry_count_;
            if (to_hbm) ++hbm_entries_;
        }
    }
}

void PlacementState::check_resident(const EntryId& e, Tier expected, const char* action) const {
    if (e.token >= total_tokens_ || e.layer >= num_layers_)
        throw logic_error(std::string(action) + " out-of-range entry " + entry_tag(e));
    const std::uint8_t s = slot_[index(e.token, e.layer)];
    if (s == kAbsent) throw logic_error(std::string(action) + " unwritten entry " + entry_tag(e));
    if (static_cast<Tier>(s) != expected)
        throw logic_error(std::string(action) + " non-resident entry " + entry_tag(e));
}

DecisionTraffic PlacementState::apply_decision(const ScheduleDecision& decision, std::uint32_t n,
                                               std::uint32_t l) {
    for (const EntryId& e : decision.migrate_out) check_resident(e, Tier::Hbm, "migrate-out of");
    for (const EntryId& e : decision.migrate_in) check_resident(e, Tier::Dram, "migrate-in of");

    const EntryId fresh{prompt_len_ + n - 1, l};
    if (slot_[index(fresh.token, fresh.layer)] != kAbsent)
        throw logic_error("entry written twice: " + entry_tag(fresh));

    // Feasibility is checked on the final occupancy before any mutation.
    const std::uint64_t new_hbm = hbm_entries_ - decision.migrate_out.size() +
                                  decision.migrate_in.size() +
                                  (decision.new_entry_tier == Tier::Hbm ? 1 : 0);
    if (enforce_capacity_ && new_hbm > kv_slot_capacity_)
        throw infeasible_error("decision at (n=" + std::to_string(n) + ", l=" + std::to_string(l) +
                               ") would occupy " + std::to_string(new_hbm) + " HBM KV slots of " +
                               std::to_string(kv_slot_capacity_));

    DecisionTraffic traffic;
    for (const EntryId& e : decision.migrate_out) {
        slot_[index(e.token, e.layer)] = static_cast<std::uint8_t>(Tier::Dram);
    }
    for (const EntryId& e : decision.migrate_in) {
        slot_[index(e.token, e.layer)] = static_cast<std::uint8_t>(Tier::Hbm);
    }
    traffic.migrate_out_bytes = decision.migrate_out.size() * entry_bytes_;
    traffic.migrate_in_bytes = decision.migrate_in.size() * entry_bytes_;

    slot_[index(fresh.token, fresh.layer)] = static_cast<std::uint8_t>(decision.new_entry_tier);
    touch_[index(fresh.token, fresh.layer)] = step_ordinal(n, l);
    ++entry_count_;
    hbm_entries_ = new_hbm;
    if (decision.new_entry_tier == Tier::Hbm) traffic.hbm_write_bytes = entry_bytes_;
    else traffic.dram_write_bytes = entry_bytes_;
    return traffic;
}

ReadTraffic PlacementState::read_traffic(const StepAccess& access, std::uint64_t weight_bytes_per_layer) {
    ReadTraffic traffic;
    const std::int64_t ordinal = step_ordinal(access.n, access.l);
    for (std::uint32_t token : access.accessed) {
        const std::size_t i = index(token, access.l);
        if (slot_[i] == kAbsent)
            throw logic_error("read of unwritten entry (token=" + std::to_string(token) +
                              ", layer=" + std::to_string(access.l) + ")");
        if (static_cast<Tier>(slot_[i]) == Tier::Hbm) ++traffic.hit_count;
        else ++traffic.miss_count;
        touch_[i] = ordinal;
    }
    traffic.hbm_read_bytes = weight_bytes_per_layer + traffic.hit_count * entry_bytes_;
    traffic.dram_read_bytes = traffic.miss_count * entry_bytes_;
    return traffic;
}

void PlacementState::audit() const {
    std::uint64_t present = 0;
    std::uint64_t in_hbm = 0;
    for (std::uint8_t s : slot_) {
        if (s == kAbsent) continue;
        ++present;
        if (static_cast<Tier>(s) == Tier::Hbm) ++in_hbm;
    }
    if (present != entry_count_ || in_hbm != hbm_entries_)
        throw logic_error("placement audit mismatch: counted " + std::to_string(in_hbm) + "/" +
                          std::to_string(present) + " vs tracked " + std::to_string(hbm_entries_) +
                          "/" + std::to_string(entry_count_));
}

} // namespace kvtier
