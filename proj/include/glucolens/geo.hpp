#pragma once

#include "glucolens/time.hpp"

namespace glucolens {

inline constexpr double kEarthRadiusM = 6371000.0;

struct GeoPoint {
    double lat = 0.0;  // degrees, [-90, 90]
    double lon = 0.0;  // degrees, [-180, 180]
};

struct GeoFix {
    Timestamp t;
    double lat = 0.0;
    double lon = 0.0;
    double accuracy_m = 0.0;

    GeoPoint point() const { return {lat, lon}; }
};

// Great-circle distance in meters on the reference sphere.
double haversine_m(double lat1, double lon1, double lat2, double lon2);

inline double haversine_m(const GeoPoint& p, const GeoPoint& q) {
    return haversine_m(p.lat, p.lon, q.lat, q.lon);
}

inline double haversine_m(const GeoFix& p, const GeoFix& q) {
    return haversine_m(p.lat, p.lon, q.lat, q.lon);
}

bool valid_coordinates(double lat, double lon);

}  // namespace glucolens
