#include "glucolens/geo.hpp"

#include <cmath>

namespace glucolens {

namespace {
constexpr double kDegToRad = 0.017453292519943295;
}

bool valid_coordinates(double lat, double lon) {
    return std::isfinite(lat) && std::isfinite(lon) && lat >= -90.0 && lat <= 90.0 &&
           lon >= -180.0 && lon <= 180.0;
}

double haversine_m(double lat1, double lon1, double lat2, double lon2) {
    double phi1 = lat1 * kDegToRad;
    double phi2 = lat2 * kDegToRad;
    double dphi = (lat2 - lat1) * kDegToRad;
    double dlam = (lon2 - lon1) * kDegToRad;
    double sp = std::sin(dphi / 2.0);
    double sl = std::sin(dlam / 2.0);
    double a = sp * sp + std::cos(phi1) * std::cos(phi2) * sl * sl;
    if (a > 1.0) a = 1.0;
    return 2.0 * kEarthRadiusM * std::asin(std::sqrt(a));
}

}  // namespace glucolens
