#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "mobsynth/geo.hpp"

namespace mobsynth {

struct GpsPoint {
    std::string agent_id;
    int64_t timestamp = 0; // UTC seconds
    double lat = 0.0;
    double lon = 0.0;

    void validate() const {
        require(lat >= -90.0 && lat <= 90.0, "latitude out of range");
        require(lon >= -180.0 && lon <= 180.0, "longitude out of range");
    }
};

struct StayPoint {
    std::string agent_id;
    double centroid_lat = 0.0;
    double centroid_lon = 0.0;
    int64_t arrive = 0;
    int64_t depart = 0;
    int point_count = 0;
    uint64_t cell_id = 0;

    int64_t duration_s() const { return depart - arrive; }
};

struct ExtractConfig {
    double temporal_threshold_s = 300.0;
    double spatial_threshold_m = 300.0;
    double speed_threshold_kmh = 30.0;
    double min_coverage = 0.33;
    int min_daily_activities = 2;
    double lat_min = 33.5;
    double lat_max = 34.5;
    double lon_min = -118.8;
    double lon_max = -118.0;
    int cell_resolution = 10;
    int utc_offset_s = -8 * 3600; // local-day boundary for agent-day grouping

    void validate() const {
        require(temporal_threshold_s > 0 && spatial_threshold_m > 0 && speed_threshold_kmh > 0,
                "extraction thresholds must be strictly positive");
        require(min_coverage > 0 && min_coverage <= 1, "min_coverage must be in (0,1]");
        require(min_daily_activities >= 1, "min_daily_activities must be >= 1");
        require(lat_min < lat_max && lon_min < lon_max, "bounds must be well-ordered");
    }

    bool in_bounds(double lat, double lon) const {
        return lat >= lat_min && lat <= lat_max && lon >= lon_min && lon <= lon_max;
    }
};

/// Sequential dual-threshold clustering of one agent's time-sorted points.
/// A point joins the open cluster iff its haversine distance to the running
/// centroid (mean of member coordinates) is within the spatial threshold;
/// a closed cluster becomes a stay iff it spans the temporal threshold.
/// Candidates implying travel faster than the speed threshold from the
/// previous emitted stay are passing trajectories and dropped, as are stays
/// outside the configured bounds.
inline std::vector<StayPoint> detect_stays(std::span<const GpsPoint> points,
                                           const ExtractConfig &cfg) {
    cfg.validate();
    std::vector<StayPoint> stays;
    if (points.empty()) {
        return stays;
    }
    for (size_t i = 1; i < points.size(); ++i) {
        require(points[i].timestamp >= points[i - 1].timestamp,
                "detect_stays: input not sorted by timestamp");
        require(points[i].agent_id == points[0].agent_id,
                "detect_stays: mixed agent ids in one stream");
    }

    double sum_lat = 0.0;
    double sum_lon = 0.0;
    int n = 0;
    int64_t first_ts = 0;
    int64_t last_ts = 0;

    StayPoint prev;
    bool has_prev = false;
    auto close_cluster = [&]() {
        if (n == 0) {
            return;
        }
        double clat = sum_lat / n;
        double clon = sum_lon / n;
        int64_t duration = last_ts - first_ts;
        if (static_cast<double>(duration) >= cfg.temporal_threshold_s && cfg.in_bounds(clat, clon)) {
            bool passing = false;
            if (has_prev) {
                double gap_s = static_cast<double>(first_ts - prev.depart);
                if (gap_s > 0) {
                    double d_m = haversine_m(prev.centroid_lat, prev.centroid_lon, clat, clon);
                    double speed_kmh = (d_m / 1000.0) / (gap_s / 3600.0);
                    passing = speed_kmh > cfg.speed_threshold_kmh;
                } else {
                    passing = true; // zero elapsed time between stays
                }
            }
            if (!passing) {
                StayPoint sp;
                sp.agent_id = points[0].agent_id;
                sp.centroid_lat = clat;
                sp.centroid_lon = clon;
                sp.arrive = first_ts;
                sp.depart = last_ts;
                sp.point_count = n;
                sp.cell_id = cell_index(clat, clon, cfg.cell_resolution);
                prev = sp;
                has_prev = true;
                stays.push_back(std::move(sp));
            }
        }
        n = 0;
    };

    for (const GpsPoint &p : points) {
        if (n == 0) {
            sum_lat = p.lat;
            sum_lon = p.lon;
            n = 1;
            first_ts = p.timestamp;
            last_ts = p.timestamp;
            continue;
        }
        double clat = sum_lat / n;
        double clon = sum_lon / n;
        if (haversine_m(p.lat, p.lon, clat, clon) <= cfg.spatial_threshold_m) {
            sum_lat += p.lat;
            sum_lon += p.lon;
            ++n;
            last_ts = p.timestamp;
        } else {
            close_cluster();
            sum_lat = p.lat;
            sum_lon = p.lon;
            n = 1;
            first_ts = p.timestamp;
            last_ts = p.timestamp;
        }
    }
    close_cluster();
    return stays;
}

inline int64_t local_day(int64_t utc_seconds, int utc_offset_s) {
    int64_t t = utc_seconds + utc_offset_s;
    // floor division
    return (t >= 0) ? t / 86400 : -((-t + 86399) / 86400);
}

/// Keeps agent-days with enough coverage (total stay time relative to 24 h)
/// and more than one activity. Input order is preserved for kept stays.
inline std::vector<StayPoint> quality_filter(const std::vector<StayPoint> &stays,
                                             const ExtractConfig &cfg) {
    struct DayStats {
        int64_t total_s = 0;
        int count = 0;
    };
    std::map<std::pair<std::string, int64_t>, DayStats> days;
    for (const StayPoint &sp : stays) {
        auto &d = days[{sp.agent_id, local_day(sp.arrive, cfg.utc_offset_s)}];
        d.total_s += sp.duration_s();
        d.count += 1;
    }
    std::vector<StayPoint> kept;
    kept.reserve(stays.size());
    for (const StayPoint &sp : stays) {
        const DayStats &d = days[{sp.agent_id, local_day(sp.arrive, cfg.utc_offset_s)}];
        double coverage = static_cast<double>(d.total_s) / 86400.0;
        if (coverage >= cfg.min_coverage && d.count >= cfg.min_daily_activities) {
            kept.push_back(sp);
        }
    }
    return kept;
}

/// Full extraction over a multi-agent point set: sorts per agent, clusters,
/// then applies the agent-day quality filter. Agents are independent, so
/// the clustering stage can run across threads; output order is by agent id
/// then time regardless of the job count.
inline std::vector<StayPoint> extract_stays(std::vector<GpsPoint> points, const ExtractConfig &cfg,
                                            int jobs = 1) {
    cfg.validate();
    std::stable_sort(points.begin(), points.end(), [](const GpsPoint &a, const GpsPoint &b) {
        if (a.agent_id != b.agent_id) {
            return a.agent_id < b.agent_id;
        }
        return a.timestamp < b.timestamp;
    });
    // deduplicate equal timestamps per agent so streams are strictly increasing
    points.erase(std::unique(points.begin(), points.end(),
                             [](const GpsPoint &a, const GpsPoint &b) {
                                 return a.agent_id == b.agent_id && a.timestamp == b.timestamp;
                             }),
                 points.end());

    std::vector<std::pair<size_t, size_t>> agent_ranges;
    size_t i = 0;
    while (i < points.size()) {
        size_t j = i + 1;
        while (j < points.size() && points[j].agent_id == points[i].agent_id) {
            ++j;
        }
        agent_ranges.emplace_back(i, j);
        i = j;
    }

    std::vector<std::vector<StayPoint>> per_agent(agent_ranges.size());
    auto worker = [&](size_t begin, size_t end) {
        for (size_t a = begin; a < end; ++a) {
            auto [lo, hi] = agent_ranges[a];
            per_agent[a] = detect_stays(std::span(points).subspan(lo, hi - lo), cfg);
        }
    };
    if (jobs <= 1 || agent_ranges.size() <= 1) {
        worker(0, agent_ranges.size());
    } else {
        size_t nthreads = std::min<size_t>(static_cast<size_t>(jobs), agent_ranges.size());
        std::vector<std::thread> threads;
        size_t chunk = (agent_ranges.size() + nthreads - 1) / nthreads;
        for (size_t t = 0; t < nthreads; ++t) {
            size_t lo = t * chunk;
            size_t hi = std::min(agent_ranges.size(), lo + chunk);
            if (lo < hi) {
                threads.emplace_back(worker, lo, hi);
            }
        }
        for (auto &th : threads) {
            th.join();
        }
    }

    std::vector<StayPoint> all;
    for (auto &v : per_agent) {
        all.insert(all.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
    }
    return quality_filter(all, cfg);
}

} // namespace mobsynth
