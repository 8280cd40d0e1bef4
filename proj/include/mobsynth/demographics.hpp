#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mobsynth/common.hpp"

namespace mobsynth {

enum class AgeBand : uint8_t { Young = 0, MidAged = 1, Elderly = 2 };
enum class Sex : uint8_t { Male = 0, Female = 1 };
enum class Employment : uint8_t { Worker = 0, NonWorker = 1 };

inline constexpr std::array<std::string_view, 3> kAgeBandNames = {"young", "mid_aged", "elderly"};
inline constexpr std::array<std::string_view, 2> kSexNames = {"male", "female"};
inline constexpr std::array<std::string_view, 2> kEmploymentNames = {"worker", "non_worker"};

/// One cell of the age x sex x employment demographic space (12 groups).
struct DemographicGroup {
    AgeBand age = AgeBand::Young;
    Sex sex = Sex::Male;
    Employment employment = Employment::Worker;

    bool operator==(const DemographicGroup &) const = default;

    /// Lexicographic index over (age, sex, employment), 0..11.
    int index() const {
        return static_cast<int>(age) * 4 + static_cast<int>(sex) * 2 + static_cast<int>(employment);
    }

    static DemographicGroup from_index(int idx) {
        require(idx >= 0 && idx < 12, "demographic group index out of 0..11");
        return DemographicGroup{static_cast<AgeBand>(idx / 4), static_cast<Sex>((idx / 2) % 2),
                                static_cast<Employment>(idx % 2)};
    }

    std::string key() const {
        return std::string(kAgeBandNames[static_cast<size_t>(age)]) + "_" +
               std::string(kSexNames[static_cast<size_t>(sex)]) + "_" +
               std::string(kEmploymentNames[static_cast<size_t>(employment)]);
    }

    static DemographicGroup from_key(const std::string &key) {
        for (int i = 0; i < 12; ++i) {
            DemographicGroup g = from_index(i);
            if (g.key() == key) {
                return g;
            }
        }
        fail("unknown demographic group key: " + key);
    }
};

inline constexpr int kNumDemographicGroups = 12;

/// Cartesian enumeration of category index tuples, lexicographic, for an
/// arbitrary dimension vector. The group count is the product of the
/// per-dimension category counts.
inline std::vector<std::vector<int>> enumerate_groups(const std::vector<int> &category_counts) {
    require(!category_counts.empty(), "enumerate_groups: empty dimension list");
    size_t total = 1;
    for (int c : category_counts) {
        require(c >= 1, "enumerate_groups: category count must be >= 1");
        total *= static_cast<size_t>(c);
    }
    std::vector<std::vector<int>> out;
    out.reserve(total);
    std::vector<int> cur(category_counts.size(), 0);
    for (size_t n = 0; n < total; ++n) {
        out.push_back(cur);
        for (size_t d = category_counts.size(); d-- > 0;) {
            if (++cur[d] < category_counts[d]) {
                break;
            }
            cur[d] = 0;
        }
    }
    return out;
}

/// The concrete 12-group demographic space, in index order.
inline std::vector<DemographicGroup> all_demographic_groups() {
    std::vector<DemographicGroup> groups;
    groups.reserve(kNumDemographicGroups);
    for (const auto &tuple : enumerate_groups({3, 2, 2})) {
        groups.push_back(DemographicGroup{static_cast<AgeBand>(tuple[0]),
                                          static_cast<Sex>(tuple[1]),
                                          static_cast<Employment>(tuple[2])});
    }
    return groups;
}

} // namespace mobsynth
