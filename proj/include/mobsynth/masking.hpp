#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "mobsynth/activity.hpp"
#include "mobsynth/rng.hpp"

namespace mobsynth {

/// Masks whole activity runs: a uniformly random subset of
/// ceil(fraction * run_count) maximal non-empty runs becomes kMasked.
/// Models GPS signal loss at specific locations.
inline SlotGrid mask_activity_based(const SlotGrid &grid, double fraction, uint64_t rng_seed) {
    require(fraction >= 0.0 && fraction <= 1.0, "mask fraction must be in [0,1]");
    SlotGrid out = grid;
    std::vector<SlotRun> runs = slot_runs(grid);
    if (runs.empty() || fraction == 0.0) {
        return out;
    }
    auto k = static_cast<size_t>(std::ceil(fraction * static_cast<double>(runs.size())));
    Rng rng(rng_seed);
    for (size_t ri : rng.sample_indices(runs.size(), k)) {
        for (int s = runs[ri].begin; s < runs[ri].end; ++s) {
            out.slots[static_cast<size_t>(s)] = SlotGrid::kMasked;
        }
    }
    return out;
}

/// Masks contiguous segments until at least coverage*96 slots are masked or
/// max_segments is reached. Each segment is anchored at a uniformly chosen
/// unmasked slot and grows forward (spilling backward at the day's edge)
/// until it has hidden its sampled length of new slots, so segments stay
/// contiguous while coverage targets remain reachable. Models extended
/// offline periods.
inline SlotGrid mask_period(const SlotGrid &grid, int min_segment_slots, int max_segment_slots,
                            int max_segments, double coverage, uint64_t rng_seed) {
    require(coverage >= 0.0 && coverage <= 1.0, "coverage must be in [0,1]");
    require(min_segment_slots >= 1 && max_segment_slots <= SlotGrid::kSlots &&
                min_segment_slots <= max_segment_slots,
            "segment length range must be within [1,96]");
    require(max_segments >= 0, "max_segments must be non-negative");

    SlotGrid out = grid;
    const double target = coverage * SlotGrid::kSlots;
    Rng rng(rng_seed);
    int segments = 0;
    while (out.masked_count() < target && segments < max_segments) {
        std::vector<int> unmasked;
        unmasked.reserve(SlotGrid::kSlots);
        for (int s = 0; s < SlotGrid::kSlots; ++s) {
            if (out.slots[static_cast<size_t>(s)] != SlotGrid::kMasked) {
                unmasked.push_back(s);
            }
        }
        if (unmasked.empty()) {
            break;
        }
        int len = rng.uniform_int(min_segment_slots, max_segment_slots);
        int anchor = unmasked[rng.bounded(static_cast<uint32_t>(unmasked.size()))];
        out.slots[static_cast<size_t>(anchor)] = SlotGrid::kMasked;
        int got = 1;
        int lo = anchor;
        int hi = anchor;
        while (got < len) {
            if (hi + 1 < SlotGrid::kSlots) {
                ++hi;
                if (out.slots[static_cast<size_t>(hi)] != SlotGrid::kMasked) {
                    out.slots[static_cast<size_t>(hi)] = SlotGrid::kMasked;
                    ++got;
                }
            } else if (lo - 1 >= 0) {
                --lo;
                if (out.slots[static_cast<size_t>(lo)] != SlotGrid::kMasked) {
                    out.slots[static_cast<size_t>(lo)] = SlotGrid::kMasked;
                    ++got;
                }
            } else {
                break;
            }
        }
        ++segments;
    }
    return out;
}

/// Masks exactly round(fraction * 96) uniformly chosen slots. Models
/// sporadic, intermittent signal loss.
inline SlotGrid mask_slot_based(const SlotGrid &grid, double fraction, uint64_t rng_seed) {
    require(fraction >= 0.0 && fraction <= 1.0, "mask fraction must be in [0,1]");
    SlotGrid out = grid;
    auto m = static_cast<size_t>(std::lround(fraction * SlotGrid::kSlots));
    if (m == 0) {
        return out;
    }
    Rng rng(rng_seed);
    for (size_t s : rng.sample_indices(SlotGrid::kSlots, m)) {
        out.slots[s] = SlotGrid::kMasked;
    }
    return out;
}

} // namespace mobsynth
