#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <zlib.h>

#include <nlohmann/json.hpp>

#include "mobsynth/activity.hpp"
#include "mobsynth/staypoint.hpp"

namespace mobsynth {

using json = nlohmann::json;

/// Line reader over plain or gzip files (zlib's gz layer reads both).
class LineReader {
  public:
    explicit LineReader(const std::string &path) : path_(path) {
        file_ = gzopen(path.c_str(), "rb");
        require(file_ != nullptr, "cannot open input file: " + path);
    }
    ~LineReader() {
        if (file_ != nullptr) {
            gzclose(file_);
        }
    }
    LineReader(const LineReader &) = delete;
    LineReader &operator=(const LineReader &) = delete;

    bool next(std::string &line) {
        line.clear();
        char buf[4096];
        for (;;) {
            if (gzgets(file_, buf, sizeof(buf)) == nullptr) {
                return !line.empty();
            }
            line += buf;
            if (!line.empty() && line.back() == '\n') {
                line.pop_back();
                if (!line.empty() && line.back() == '\r') {
                    line.pop_back();
                }
                return true;
            }
        }
    }

    const std::string &path() const { return path_; }

  private:
    std::string path_;
    gzFile file_ = nullptr;
};

inline void for_each_line(const std::string &path, const std::function<void(const std::string &)> &fn) {
    LineReader reader(path);
    std::string line;
    while (reader.next(line)) {
        if (!line.empty()) {
            fn(line);
        }
    }
}

// ---- ActivityChain <-> JSON ----
// One chain per line: {"agent_id":..., "day_of_week":..., "activities":[{"type","start","end"},...]}

inline json chain_to_json(const ActivityChain &chain) {
    json acts = json::array();
    for (const Activity &a : chain.activities) {
        acts.push_back({{"type", static_cast<int>(a.type)}, {"start", a.start}, {"end", a.end}});
    }
    return json{{"agent_id", chain.agent_id}, {"day_of_week", chain.day_of_week}, {"activities", acts}};
}

inline ActivityChain chain_from_json(const json &j) {
    ActivityChain chain;
    chain.agent_id = j.at("agent_id").get<std::string>();
    chain.day_of_week = j.at("day_of_week").get<int>();
    for (const json &a : j.at("activities")) {
        chain.activities.push_back(Activity{activity_from_int(a.at("type").get<int>()),
                                            a.at("start").get<int>(), a.at("end").get<int>()});
    }
    return chain;
}

inline std::vector<ActivityChain> read_chains(const std::string &path) {
    std::vector<ActivityChain> chains;
    for_each_line(path, [&](const std::string &line) {
        chains.push_back(chain_from_json(json::parse(line)));
    });
    return chains;
}

inline void write_chains(const std::string &path, const std::vector<ActivityChain> &chains) {
    std::ofstream out(path);
    require(out.good(), "cannot open output file: " + path);
    for (const ActivityChain &c : chains) {
        out << chain_to_json(c).dump() << "\n";
    }
}

// ---- StayPoint <-> JSON ----

inline json stay_to_json(const StayPoint &sp) {
    return json{{"agent_id", sp.agent_id},     {"lat", sp.centroid_lat}, {"lon", sp.centroid_lon},
                {"arrive", sp.arrive},         {"depart", sp.depart},    {"point_count", sp.point_count},
                {"cell_id", cell_to_string(sp.cell_id)}};
}

inline StayPoint stay_from_json(const json &j) {
    StayPoint sp;
    sp.agent_id = j.at("agent_id").get<std::string>();
    sp.centroid_lat = j.at("lat").get<double>();
    sp.centroid_lon = j.at("lon").get<double>();
    sp.arrive = j.at("arrive").get<int64_t>();
    sp.depart = j.at("depart").get<int64_t>();
    sp.point_count = j.at("point_count").get<int>();
    sp.cell_id = cell_from_string(j.at("cell_id").get<std::string>());
    return sp;
}

inline std::vector<StayPoint> read_stays(const std::string &path) {
    std::vector<StayPoint> stays;
    for_each_line(path, [&](const std::string &line) { stays.push_back(stay_from_json(json::parse(line))); });
    return stays;
}

inline void write_stays(const std::string &path, const std::vector<StayPoint> &stays) {
    std::ofstream out(path);
    require(out.good(), "cannot open output file: " + path);
    for (const StayPoint &sp : stays) {
        out << stay_to_json(sp).dump() << "\n";
    }
}

// ---- GPS points: CSV (agent_id,timestamp,lat,lon) or JSON-lines ----

inline std::vector<GpsPoint> read_gps_points(const std::string &path) {
    std::vector<GpsPoint> points;
    bool csv = path.find(".csv") != std::string::npos;
    bool header_checked = false;
    for_each_line(path, [&](const std::string &line) {
        if (csv) {
            if (!header_checked) {
                header_checked = true;
                if (line.rfind("agent_id", 0) == 0) {
                    return; // header row
                }
            }
            GpsPoint p;
            size_t a = line.find(',');
            size_t b = line.find(',', a + 1);
            size_t c = line.find(',', b + 1);
            require(a != std::string::npos && b != std::string::npos && c != std::string::npos,
                    "malformed GPS CSV line: " + line);
            p.agent_id = line.substr(0, a);
            p.timestamp = std::stoll(line.substr(a + 1, b - a - 1));
            p.lat = std::stod(line.substr(b + 1, c - b - 1));
            p.lon = std::stod(line.substr(c + 1));
            p.validate();
            points.push_back(std::move(p));
        } else {
            json j = json::parse(line);
            GpsPoint p;
            p.agent_id = j.at("agent_id").get<std::string>();
            p.timestamp = j.at("timestamp").get<int64_t>();
            p.lat = j.at("lat").get<double>();
            p.lon = j.at("lon").get<double>();
            p.validate();
            points.push_back(std::move(p));
        }
    });
    return points;
}

inline void write_gps_csv(const std::string &path, const std::vector<GpsPoint> &points) {
    std::ofstream out(path);
    require(out.good(), "cannot open output file: " + path);
    out << "agent_id,timestamp,lat,lon\n";
    char buf[64];
    for (const GpsPoint &p : points) {
        std::snprintf(buf, sizeof(buf), "%.7f,%.7f", p.lat, p.lon);
        out << p.agent_id << "," << p.timestamp << "," << buf << "\n";
    }
}

inline json load_json_file(const std::string &path) {
    std::ifstream in(path);
    require(in.good(), "cannot open file: " + path);
    return json::parse(in);
}

inline void save_json_file(const std::string &path, const json &j, int indent = 2) {
    std::ofstream out(path);
    require(out.good(), "cannot open output file: " + path);
    out << j.dump(indent) << "\n";
}

} // namespace mobsynth
