#ifndef KVTIER_POLICIES_HPP
#define KVTIER_POLICIES_HPP

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "kvtier/placement.hpp"
#include "kvtier/trace.hpp"

namespace kvtier {

enum class PolicyType : std::uint8_t {
    UnlimitedHbm,     // idealized bound: everything in HBM, capacity ignored
    Static,           // fill HBM once, never migrate
    ReactiveLru,      // promote on miss, evict LRU
    PageGranularity,  // lookahead at page granularity
    Lookahead,        // per-entry lookahead over the next W tokens
};

struct PolicySpec {
    PolicyType type = PolicyType::Static;
    std::uint32_t window = 8;  // W: future tokens examined (lookahead/page)
    double ratio = 1.0;        // R: fraction of qualified candidates migrated
    std::uint32_t page_size = 16;
};

std::string policy_label(const PolicySpec& spec);

// Access frequency of layer-l entries over the W tokens after step n.
// Only tokens that appear in the window are present; frequency() returns 0
// for the rest.
struct LookaheadIndex {
    std::uint32_t layer = 0;
    std::unordered_map<std::uint32_t, std::uint32_t> counts;

    std::uint32_t frequency(std::uint32_t token) const {
        const auto it = counts.find(token);
        return it == counts.end() ? 0 : it->second;
    }
};

// Reference construction: scans steps (n+1 .. min(n+W, N)) at layer l.
LookaheadIndex build_lookahead_index(const DecodeTrace& trace, std::uint32_t n, std::uint32_t l,
                                     std::uint32_t window);

// Incrementally maintained window indexes for all layers, advanced once per
// generated token. Contents match build_lookahead_index at every position;
// the simulation driver uses this to avoid rescanning W steps per decision.
class SlidingLookahead {
public:
    SlidingLookahead(const DecodeTrace& trace, std::uint32_t window);

    // Positions the indexes for deciding step n (windows cover n+1..n+W).
    // n must not decrease between calls.
    void position(std::uint32_t n);

    const LookaheadIndex& layer(std::uint32_t l) const { return indexes_[l]; }

private:
    void add_step(std::uint32_t n, std::uint32_t l);
    void remove_step(std::uint32_t n, std::uint32_t l);

    const DecodeTrace& trace_;
    std::uint32_t window_;
    std::vector<LookaheadIndex> indexes_;
    std::uint32_t positioned_at_ = 0;  // 0 = not yet positioned
};

// No migrations, new entry to HBM, capacity ignored.
ScheduleDecision decide_unlimited(const PlacementState& state, std::uint32_t n, std::uint32_t l);

// No migrations; new entry to HBM while it fits, DRAM afterwards.
ScheduleDecision decide_static(const PlacementState& state, std::uint32_t n, std::uint32_t l);

// Promotes every accessed DRAM entry, evicting the least recently used
// non-accessed entries to make room; the new entry goes to HBM under the
// same eviction rule. If the step's working set alone exceeds HBM KV space,
// only the most recently indexed accessed entries that fit are promoted.
ScheduleDecision decide_reactive(const PlacementState& state, const StepAccess& access,
                                 std::uint32_t n, std::uint32_t l);

// Promotes the top-ceil(R * |candidates|) DRAM entries ranked by window
// frequency (ties to the more recent token), demoting zero-frequency HBM
// entries (oldest last_touch first) just enough to fit; trims promotions
// from the tail when HBM room is insufficient. The new entry takes a free
// slot when one is left, without forcing demotions.
ScheduleDecision decide_lookahead(const PlacementState& state, const LookaheadIndex& index,
                                  std::uint32_t n, std::uint32_t l, double ratio);

// Same ranking and fitting as decide_lookahead, but the migration unit is a
// page of page_size consecutive tokens within one layer. A page's frequency
// is the sum of its resident members'; moving a page moves every member
// resident on the source tier.
ScheduleDecision decide_page(const PlacementState& state, const LookaheadIndex& index,
                             std::uint32_t n, std::uint32_t l, std::uint32_t page_size,
                             double ratio);

} // namespace kvtier

#endif
