#pragma once

#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "mobsynth/activity.hpp"

namespace mobsynth {

enum class MarginalKind { ChainLength, Duration, Type, StartTime, EndTime };

inline const char *marginal_kind_name(MarginalKind k) {
    switch (k) {
    case MarginalKind::ChainLength:
        return "chain_length";
    case MarginalKind::Duration:
        return "duration";
    case MarginalKind::Type:
        return "type";
    case MarginalKind::StartTime:
        return "start_time";
    case MarginalKind::EndTime:
        return "end_time";
    }
    return "?";
}

inline constexpr std::array<MarginalKind, 5> kAllMarginalKinds = {
    MarginalKind::ChainLength, MarginalKind::Duration, MarginalKind::Type,
    MarginalKind::StartTime, MarginalKind::EndTime};

/// A normalized histogram over one activity-chain attribute.
/// Bin specs: chain_length 12 bins (1..11, 12+); duration 96 fifteen-minute
/// bins; type 15 codes; start/end time 96 slots.
struct Marginal {
    MarginalKind kind = MarginalKind::Type;
    std::vector<double> bins;

    void normalize() {
        double total = 0;
        for (double b : bins) {
            total += b;
        }
        require(total > 0, "cannot normalize an all-zero marginal");
        for (double &b : bins) {
            b /= total;
        }
    }
};

inline int marginal_bin_count(MarginalKind k) {
    switch (k) {
    case MarginalKind::ChainLength:
        return 12;
    case MarginalKind::Duration:
        return 96;
    case MarginalKind::Type:
        return kNumActivityCodes;
    case MarginalKind::StartTime:
    case MarginalKind::EndTime:
        return SlotGrid::kSlots;
    }
    return 0;
}

/// Jensen-Shannon divergence with natural log: in [0, ln 2], symmetric,
/// zero iff the distributions coincide. Zero-probability bins contribute
/// nothing (0 log 0 := 0).
inline double jsd(const Marginal &p, const Marginal &q) {
    require(p.kind == q.kind, "jsd: marginal kinds differ");
    require(p.bins.size() == q.bins.size(), "jsd: bin specs differ");
    double d = 0.0;
    for (size_t i = 0; i < p.bins.size(); ++i) {
        double m = 0.5 * (p.bins[i] + q.bins[i]);
        if (p.bins[i] > 0) {
            d += 0.5 * p.bins[i] * std::log(p.bins[i] / m);
        }
        if (q.bins[i] > 0) {
            d += 0.5 * q.bins[i] * std::log(q.bins[i] / m);
        }
    }
    return d;
}

/// The five attribute marginals of a chain set.
inline std::map<MarginalKind, Marginal> marginals_from_chains(const std::vector<ActivityChain> &chains) {
    require(!chains.empty(), "marginals_from_chains: empty input");
    std::map<MarginalKind, Marginal> out;
    for (MarginalKind k : kAllMarginalKinds) {
        out[k] = Marginal{k, std::vector<double>(static_cast<size_t>(marginal_bin_count(k)), 0.0)};
    }
    for (const ActivityChain &c : chains) {
        if (!c.activities.empty()) {
            int len = std::min<int>(static_cast<int>(c.activities.size()), 12);
            out[MarginalKind::ChainLength].bins[static_cast<size_t>(len - 1)] += 1;
        }
        for (const Activity &a : c.activities) {
            int dur_bin = (a.end - a.start - 1) / kSlotMinutes; // duration 1..1440 -> 0..95
            out[MarginalKind::Duration].bins[static_cast<size_t>(dur_bin)] += 1;
            out[MarginalKind::Type].bins[static_cast<size_t>(a.type) - 1] += 1;
            out[MarginalKind::StartTime].bins[static_cast<size_t>(a.start / kSlotMinutes)] += 1;
            out[MarginalKind::EndTime].bins[static_cast<size_t>((a.end - 1) / kSlotMinutes)] += 1;
        }
    }
    for (auto &[k, m] : out) {
        m.normalize();
    }
    return out;
}

/// Cosine similarity of two equal-shape matrices, flattened.
inline double cosine_sim(const std::vector<std::vector<double>> &a,
                         const std::vector<std::vector<double>> &b) {
    require(a.size() == b.size(), "cosine_sim: shape mismatch");
    double dot = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        require(a[i].size() == b[i].size(), "cosine_sim: shape mismatch");
        for (size_t j = 0; j < a[i].size(); ++j) {
            dot += a[i][j] * b[i][j];
            na += a[i][j] * a[i][j];
            nb += b[i][j] * b[i][j];
        }
    }
    require(na > 0 && nb > 0, "cosine_sim: zero matrix");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

struct MapeResult {
    double percent = 0.0;
    int skipped_zero_observed = 0;
};

/// Mean absolute percentage error; zero-valued observations are skipped and
/// counted, an all-zero observed series is rejected.
inline MapeResult mape(const std::vector<double> &observed, const std::vector<double> &simulated) {
    require(observed.size() == simulated.size(), "mape: length mismatch");
    require(!observed.empty(), "mape: empty series");
    double total = 0;
    int used = 0;
    int skipped = 0;
    for (size_t i = 0; i < observed.size(); ++i) {
        if (observed[i] == 0.0) {
            ++skipped;
            continue;
        }
        total += std::abs(observed[i] - simulated[i]) / std::abs(observed[i]);
        ++used;
    }
    require(used > 0, "mape: all observed entries are zero");
    return MapeResult{100.0 * total / used, skipped};
}

} // namespace mobsynth
