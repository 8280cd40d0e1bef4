#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mobsynth/common.hpp"

namespace mobsynth {

/// The 15-category activity taxonomy used throughout the pipeline.
enum class ActivityCode : uint8_t {
    Home = 1,
    Work = 2,
    School = 3,
    Caregiving = 4,
    ShopGoods = 5,
    ShopServices = 6,
    MealsOut = 7,
    Errands = 8,
    Leisure = 9,
    Exercise = 10,
    Social = 11,
    Healthcare = 12,
    Worship = 13,
    Other = 14,
    PickupDrop = 15,
};

inline constexpr int kNumActivityCodes = 15;
inline constexpr int kMinutesPerDay = 1440;
inline constexpr int kSlotMinutes = 15;

inline constexpr std::array<std::string_view, kNumActivityCodes> kActivityNames = {
    "Home",     "Work",     "School",    "Caregiving", "Shop goods",
    "Shop services", "Meals out", "Errands", "Leisure",  "Exercise",
    "Social",   "Healthcare", "Worship",  "Other",      "Pickup/Drop",
};

inline std::string_view activity_name(ActivityCode c) {
    return kActivityNames[static_cast<size_t>(c) - 1];
}

inline ActivityCode activity_from_int(int code) {
    require(code >= 1 && code <= kNumActivityCodes,
            "activity code out of range 1..15: " + std::to_string(code));
    return static_cast<ActivityCode>(code);
}

inline std::optional<ActivityCode> activity_from_name(std::string_view name) {
    for (int i = 0; i < kNumActivityCodes; ++i) {
        if (kActivityNames[static_cast<size_t>(i)] == name) {
            return static_cast<ActivityCode>(i + 1);
        }
    }
    return std::nullopt;
}

/// One typed activity episode within a day, minutes since midnight.
struct Activity {
    ActivityCode type = ActivityCode::Home;
    int start = 0; // [0, 1440)
    int end = 0;   // (0, 1440]

    bool operator==(const Activity &) const = default;

    void validate() const {
        require(start >= 0 && start < kMinutesPerDay, "activity start out of [0,1440)");
        require(end > 0 && end <= kMinutesPerDay, "activity end out of (0,1440]");
        require(start < end, "activity start must precede end");
    }
};

/// One agent-day as an ordered, non-overlapping sequence of activities.
struct ActivityChain {
    std::string agent_id;
    int day_of_week = 0; // 0 = Monday .. 6 = Sunday
    std::vector<Activity> activities;

    bool operator==(const ActivityChain &) const = default;

    void validate() const {
        require(day_of_week >= 0 && day_of_week <= 6, "day_of_week out of 0..6");
        for (size_t i = 0; i < activities.size(); ++i) {
            activities[i].validate();
            if (i > 0) {
                require(activities[i - 1].start <= activities[i].start,
                        "activities not sorted by start time");
                require(activities[i - 1].end <= activities[i].start,
                        "overlapping activities: [" + std::string(activity_name(activities[i - 1].type)) +
                            " " + std::to_string(activities[i - 1].start) + "-" +
                            std::to_string(activities[i - 1].end) + "] and [" +
                            std::string(activity_name(activities[i].type)) + " " +
                            std::to_string(activities[i].start) + "-" +
                            std::to_string(activities[i].end) + "]");
            }
        }
    }
};

/// A day quantized into 96 fifteen-minute slots. Slot values are activity
/// codes 1..15 plus two sentinels: kEmpty (no recorded activity) and
/// kMasked (hidden, to be reconstructed). The two are distinct on purpose,
/// the losses and the reconstruction path treat them differently.
struct SlotGrid {
    static constexpr int kSlots = 96;
    static constexpr uint8_t kEmpty = 0;
    static constexpr uint8_t kMasked = 16;

    std::array<uint8_t, kSlots> slots{};
    int day_of_week = 0;

    bool operator==(const SlotGrid &) const = default;

    static bool is_code(uint8_t v) { return v >= 1 && v <= kNumActivityCodes; }

    int count(uint8_t value) const {
        int n = 0;
        for (uint8_t s : slots) {
            n += (s == value) ? 1 : 0;
        }
        return n;
    }

    int masked_count() const { return count(kMasked); }

    int observed_count() const {
        int n = 0;
        for (uint8_t s : slots) {
            n += (s != kMasked) ? 1 : 0;
        }
        return n;
    }
};

/// Maximal run of identical slot values.
struct SlotRun {
    int begin = 0; // first slot
    int end = 0;   // one past last slot
    uint8_t value = SlotGrid::kEmpty;
};

inline std::vector<SlotRun> slot_runs(const SlotGrid &grid, bool codes_only = true) {
    std::vector<SlotRun> runs;
    int i = 0;
    while (i < SlotGrid::kSlots) {
        int j = i + 1;
        while (j < SlotGrid::kSlots && grid.slots[static_cast<size_t>(j)] == grid.slots[static_cast<size_t>(i)]) {
            ++j;
        }
        uint8_t v = grid.slots[static_cast<size_t>(i)];
        if (!codes_only || SlotGrid::is_code(v)) {
            runs.push_back({i, j, v});
        }
        i = j;
    }
    return runs;
}

/// Quantizes a chain onto the slot grid. Slot k holds the activity covering
/// minute 15k; an activity ending exactly on a boundary does not occupy the
/// next slot. Slots covered by no activity stay kEmpty. Activities shorter
/// than one slot that cover no slot-start minute vanish; this lossiness is
/// inherent to the 15-minute grid.
inline SlotGrid encode_chain(const ActivityChain &chain) {
    chain.validate();
    SlotGrid grid;
    grid.day_of_week = chain.day_of_week;
    for (const Activity &act : chain.activities) {
        int first = (act.start + kSlotMinutes - 1) / kSlotMinutes; // first slot whose start >= act.start
        int last = (act.end - 1) / kSlotMinutes;                   // last slot whose start < act.end
        for (int k = first; k <= last && k < SlotGrid::kSlots; ++k) {
            grid.slots[static_cast<size_t>(k)] = static_cast<uint8_t>(act.type);
        }
    }
    return grid;
}

/// Inverse of encode_chain for grids without masked slots: maximal runs of
/// one code become one activity, empty runs none.
inline ActivityChain decode_grid(const SlotGrid &grid, std::string agent_id = {}) {
    require(grid.masked_count() == 0, "decode_grid: grid contains masked slots");
    ActivityChain chain;
    chain.agent_id = std::move(agent_id);
    chain.day_of_week = grid.day_of_week;
    for (const SlotRun &run : slot_runs(grid)) {
        chain.activities.push_back(Activity{static_cast<ActivityCode>(run.value),
                                            run.begin * kSlotMinutes, run.end * kSlotMinutes});
    }
    return chain;
}

} // namespace mobsynth
