#include "kvtier/policies.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "kvtier/errors.hpp"
#include "kvtier/numeric.hpp"

namespace kvtier {

std::string policy_label(const PolicySpec& spec) {
    char buf[96];
    switch (spec.type) {
        case PolicyType::UnlimitedHbm: return "unlimited_hbm";
        case PolicyType::Static: return "static";
        case PolicyType::ReactiveLru: return "reactive_lru";
        case PolicyType::PageGranularity:
            std::snprintf(buf, sizeof buf, "page(size=%u;W=%u;R=%g)", spec.page_size, spec.window,
                          spec.ratio);
            return buf;
        case PolicyType::Lookahead:
            std::snprintf(buf, sizeof buf, "lookahead(W=%u;R=%g)", spec.window, spec.ratio);
            return buf;
    }
    return "unknown";
}

LookaheadIndex build_lookahead_index(const DecodeTrace& trace, std::uint32_t n, std::uint32_t l,
                                     std::uint32_t window) {
    LookaheadIndex index;
    index.layer = l;
    const std::uint32_t last = std::min<std::uint64_t>(
        static_cast<std::uint64_t>(n) + window, trace.header.decode_len);
    for (std::uint32_t m = n + 1; m <= last; ++m)
        for (std::uint32_t token : trace.step(m, l).accessed) ++index.counts[token];
    return index;
}

SlidingLookahead::SlidingLookahead(const DecodeTrace& trace, std::uint32_t window)
    : trace_(trace), window_(window), indexes_(trace.header.num_layers) {
    for (std::uint32_t l = 0; l < trace.header.num_layers; ++l) indexes_[l].layer = l;
}

void SlidingLookahead::add_step(std::uint32_t n, std::uint32_t l) {
    if (n > trace_.header.decode_len) return;
    for (std::uint32_t token : trace_.step(n, l).accessed) ++indexes_[l].counts[token];
}

void SlidingLookahead::remove_step(std::uint32_t n, std::uint32_t l) {
    if (n > trace_.header.decode_len) return;
    auto& counts = indexes_[l].counts;
    for (std::uint32_t token : trace_.step(n, l).accessed) {
        const auto it = counts.find(token);
        if (it == counts.end()) throw logic_error("sliding window underflow");
        if (--it->second == 0) counts.erase(it);
    }
}

void SlidingLookahead::position(std::uint32_t n) {
    if (positioned_at_ == 0) {
        const std::uint32_t last = std::min<std::uint64_t>(
            static_cast<std::uint64_t>(n) + window_, trace_.header.decode_len);
        for (std::uint32_t l = 0; l < trace_.header.num_layers; ++l)
            for (std::uint32_t m = n + 1; m <= last; ++m) add_step(m, l);
        positioned_at_ = n;
        return;
    }
    if (n < positioned_at_) throw logic_error("sliding window cannot move backwards");
    while (positioned_at_ < n) {
        ++positioned_at_;
        for (std::uint32_t l = 0; l < trace_.header.num_layers; ++l) {
            remove_step(positioned_at_, l);
            add_step(positioned_at_ + window_, l);
        }
    }
}

ScheduleDecision decide_unlimited(const PlacementState&, std::uint32_t, std::uint32_t) {
    ScheduleDecision d;
    d.new_entry_tier = Tier::Hbm;
    return d;
}

ScheduleDecision decide_static(const PlacementState& state, std::uint32_t, std::uint32_t) {
    ScheduleDecision d;
    d.new_entry_tier = state.free_kv_slots() >= 1 ? Tier::Hbm : Tier::Dram;
    return d;
}

namespace {

struct Victim {
    std::int64_t touch;
    std::uint32_t token;
    std::uint32_t layer;

    bool operator<(const Victim& other) const {
        if (touch != other.touch) return touch < other.touch;
        if (token != other.token) return token < other.token;
        return layer < other.layer;
    }
};

} // namespace

ScheduleDecision decide_reactive(const PlacementState& state, const StepAccess& access,
                                 std::uint32_t n, std::uint32_t l) {
    ScheduleDecision d;

    // Promotion wants, most recent token index first; the new entry (the
    // highest index of all) is served before any promotion.
    std::vector<std::uint32_t> wants;
    for (auto it = access.accessed.rbegin(); it != access.accessed.rend(); ++it)
        if (state.present(*it, l) && state.tier(*it, l) == Tier::Dram) wants.push_back(*it);

    const std::uint64_t free = state.free_kv_slots();
    const std::uint64_t demand = wants.size() + 1;
    std::uint64_t evictions_needed = demand > free ? demand - free : 0;

    std::vector<Victim> pool;
    if (evictions_needed > 0) {
        // LRU pool: every HBM-resident entry not accessed at this step.
        for (std::uint32_t token = 0; token < state.total_tokens(); ++token) {
            for (std::uint32_t layer = 0; layer < state.num_layers(); ++layer) {
                if (!state.present(token, layer) || state.tier(token, layer) != Tier::Hbm) continue;
                if (layer == l &&
                    std::binary_search(access.accessed.begin(), access.accessed.end(), token))
                    continue;
                pool.push_back({state.last_touch(token, layer), token, layer});
            }
        }
        evictions_needed = std::min<std::uint64_t>(evictions_needed, pool.size());
        std::partial_sort(pool.begin(), pool.begin() + evictions_needed, pool.end());
        for (std::uint64_t i = 0; i < evictions_needed; ++i)
            d.migrate_out.push_back({pool[i].token, pool[i].layer});
    }

    std::uint64_t slots = free + evictions_needed;
    if (slots >= 1) {
        d.new_entry_tier = Tier::Hbm;
        --slots;
    } else {
        d.new_entry_tier = Tier::Dram;
    }
    for (std::uint32_t token : wants) {
        if (slots == 0) break;  // remainder is read from DRAM this step
        d.migrate_in.push_back({token, l});
        --slots;
    }
    (void)n;
    return d;
}

ScheduleDecision decide_lookahead(const PlacementState& state, const LookaheadIndex& index,
                                  std::uint32_t n, std::uint32_t l, double ratio) {
    ScheduleDecision d;

    struct Candidate {
        std::uint32_t freq;
        std::uint32_t token;
    };
    std::vector<Candidate> candidates;
    for (const auto& [token, freq] : index.counts)
        if (state.present(token, l) && state.tier(token, l) == Tier::Dram)
            candidates.push_back({freq, token});
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.freq != b.freq) return a.freq > b.freq;
        return a.token > b.token;
    });

    const std::uint64_t promote_target =
        ceil_fraction(ratio * static_cast<double>(candidates.size()));

    // Demotion pool: layer-l HBM residents the window never touches.
    std::vector<Victim> pool;
    const std::uint32_t written_tokens = state.total_tokens();
    if (promote_target > state.free_kv_slots()) {
        for (std::uint32_t token = 0; token < written_tokens; ++token) {
            if (!state.present(token, l) || state.tier(token, l) != Tier::Hbm) continue;
            if (index.frequency(token) != 0) continue;
            pool.push_back({state.last_touch(token, l), token, l});
        }
    }

    const std::uint64_t free = state.free_kv_slots();
    const std::uint64_t kept = std::min<std::uint64_t>(promote_target, free + pool.size());
    const std::uint64_t demotions = kept > free ? kept - free : 0;
    if (demotions > 0) {
        std::partial_sort(pool.begin(), pool.begin() + demotions, pool.end());
        for (std::uint64_t i = 0; i < demotions; ++i)
            d.migrate_out.push_back({pool[i].token, pool[i].layer});
    }
    for (std::uint64_t i = 0; i < kept; ++i) d.migrate_in.push_back({candidates[i].token, l});

    const std::uint64_t free_after = free + demotions - kept;
    d.new_entry_tier = free_after >= 1 ? Tier::Hbm : Tier::Dram;
    (void)n;
    return d;
}

ScheduleDecision decide_page(const PlacementState& state, const LookaheadIndex& index,
                             std::uint32_t n, std::uint32_t l, std::uint32_t page_size,
                             double ratio) {
    if (page_size == 0) throw validation_error("page_size: must be >= 1");
    ScheduleDecision d;

    // Per-page aggregates over written layer-l entries. Pages partition the
    // token range; the tail page may be partial.
    const std::uint32_t written_tokens = state.total_tokens();
    const std::uint32_t page_count = (written_tokens + page_size - 1) / page_size;

    struct PageInfo {
        std::uint64_t freq = 0;
        std::uint32_t dram_members = 0;
        std::uint32_t hbm_members = 0;
        std::int64_t touch = PlacementState::kNeverTouched;
    };
    std::vector<PageInfo> pages(page_count);
    for (std::uint32_t token = 0; token < written_tokens; ++token) {
        if (!state.present(token, l)) continue;
        PageInfo& page = pages[token / page_size];
        page.freq += index.frequency(token);
        if (state.tier(token, l) == Tier::Hbm) {
            ++page.hbm_members;
            page.touch = std::max(page.touch, state.last_touch(token, l));
        } else {
            ++page.dram_members;
        }
    }

    struct PageCandidate {
        std::uint64_t freq;
        std::uint32_t page;
    };
    std::vector<PageCandidate> candidates;
    std::vector<Victim> pool;  // token field holds the page index
    for (std::uint32_t p = 0; p < page_count; ++p) {
        if (pages[p].freq > 0 && pages[p].dram_members > 0) candidates.push_back({pages[p].freq, p});
        if (pages[p].freq == 0 && pages[p].hbm_members > 0) pool.push_back({pages[p].touch, p, l});
    }
    std::sort(candidates.begin(), candidates.end(),
              [](const PageCandidate& a, const PageCandidate& b) {
                  if (a.freq != b.freq) return a.freq > b.freq;
                  return a.page > b.page;
              });
    std::sort(pool.begin(), pool.end());

    const std::uint64_t promote_target =
        ceil_fraction(ratio * static_cast<double>(candidates.size()));

    const auto page_tokens = [&](std::uint32_t p, Tier tier, std::vector<EntryId>& out) {
        const std::uint32_t begin = p * page_size;
        const std::uint32_t end = std::min(begin + page_size, written_tokens);
        for (std::uint32_t token = begin; token < end; ++token)
            if (state.present(token, l) && state.tier(token, l) == tier) out.push_back({token, l});
    };

    std::uint64_t free = state.free_kv_slots();
    std::size_t pool_next = 0;
    for (std::uint64_t i = 0; i < promote_target; ++i) {
        const PageCandidate& cand = candidates[i];
        const std::uint32_t needed = pages[cand.page].dram_members;
        while (free < needed && pool_next < pool.size()) {
            const std::uint32_t victim_page = pool[pool_next++].token;
            page_tokens(victim_page, Tier::Hbm, d.migrate_out);
            free += pages[victim_page].hbm_members;
        }
        if (free < needed) break;  // trim remaining candidates from the tail
        page_tokens(cand.page, Tier::Dram, d.migrate_in);
        free -= needed;
    }

    d.new_entry_tier = free >= 1 ? Tier::Hbm : Tier::Dram;
    (void)n;
    return d;
}

} // namespace kvtier
