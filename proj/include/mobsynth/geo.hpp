#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include "mobsynth/common.hpp"

namespace mobsynth {

inline constexpr double kEarthRadiusM = 6371000.0;

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

/// Great-circle distance in meters on a spherical earth.
inline double haversine_m(double lat1, double lon1, double lat2, double lon2) {
    double dlat = deg2rad(lat2 - lat1);
    double dlon = deg2rad(lon2 - lon1);
    double a = std::sin(dlat / 2) * std::sin(dlat / 2) +
               std::cos(deg2rad(lat1)) * std::cos(deg2rad(lat2)) * std::sin(dlon / 2) *
                   std::sin(dlon / 2);
    return kEarthRadiusM * 2.0 * std::asin(std::min(1.0, std::sqrt(a)));
}

/// Initial bearing from a to b, degrees in [0, 360).
inline double bearing_deg(double lat1, double lon1, double lat2, double lon2) {
    double phi1 = deg2rad(lat1);
    double phi2 = deg2rad(lat2);
    double dlon = deg2rad(lon2 - lon1);
    double y = std::sin(dlon) * std::cos(phi2);
    double x = std::cos(phi1) * std::sin(phi2) - std::sin(phi1) * std::cos(phi2) * std::cos(dlon);
    double b = rad2deg(std::atan2(y, x));
    return b < 0 ? b + 360.0 : b;
}

// Hexagonal spatial index. A deterministic internal scheme whose
// resolution-10 cells have ~66 m edges (matching the public H3 scale at
// that level, with cell areas shrinking 7x per level). Cells are used only
// to group nearby stay points, so ids do not need to interoperate with H3
// libraries. Coordinates are projected sinusoidally (x scaled by cos(lat)),
// then snapped to a pointy-top hex lattice in axial coordinates.
inline constexpr double kHexEdgeRes10M = 66.0;

inline double hex_edge_m(int resolution) {
    return kHexEdgeRes10M * std::pow(std::sqrt(7.0), 10 - resolution);
}

inline uint64_t cell_index(double lat, double lon, int resolution) {
    require(resolution >= 0 && resolution <= 15, "cell resolution out of 0..15");
    double a = hex_edge_m(resolution);
    double x = kEarthRadiusM * deg2rad(lon) * std::cos(deg2rad(lat));
    double y = kEarthRadiusM * deg2rad(lat);

    double qf = (std::sqrt(3.0) / 3.0 * x - 1.0 / 3.0 * y) / a;
    double rf = (2.0 / 3.0 * y) / a;

    // cube rounding
    double xf = qf;
    double zf = rf;
    double yf = -xf - zf;
    double rx = std::round(xf);
    double ry = std::round(yf);
    double rz = std::round(zf);
    double dx = std::abs(rx - xf);
    double dy = std::abs(ry - yf);
    double dz = std::abs(rz - zf);
    if (dx > dy && dx > dz) {
        rx = -ry - rz;
    } else if (dy > dz) {
        ry = -rx - rz;
    } else {
        rz = -rx - ry;
    }
    auto q = static_cast<int64_t>(rx);
    auto r = static_cast<int64_t>(rz);

    auto zig = [](int64_t v) -> uint64_t {
        return static_cast<uint64_t>((v << 1) ^ (v >> 63)) & ((1ULL << 30) - 1);
    };
    return (static_cast<uint64_t>(resolution) << 60) | (zig(q) << 30) | zig(r);
}

inline std::string cell_to_string(uint64_t cell) { return "x" + to_hex(cell); }

inline uint64_t cell_from_string(const std::string &s) {
    require(!s.empty() && s[0] == 'x', "malformed cell id: " + s);
    return std::stoull(s.substr(1), nullptr, 16);
}

} // namespace mobsynth
