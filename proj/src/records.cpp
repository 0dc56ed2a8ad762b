#include "glucolens/records.hpp"

#include <cmath>

namespace glucolens {

std::string validate(const GlucoseReading& r) {
    if (r.t.seconds_utc < 0) return "negative timestamp";
    if (!std::isfinite(r.mgdl)) return "non-finite glucose value";
    if (r.mgdl < kGlucoseMinMgdl || r.mgdl > kGlucoseMaxMgdl)
        return "glucose value outside physiological range [20, 600]";
    return {};
}

std::string validate(const GeoFix& f) {
    if (f.t.seconds_utc < 0) return "negative timestamp";
    if (!valid_coordinates(f.lat, f.lon)) return "coordinates outside valid ranges";
    if (!std::isfinite(f.accuracy_m) || f.accuracy_m < 0) return "invalid accuracy";
    return {};
}

std::string validate(const PurchaseRecord& p) {
    if (p.t.seconds_utc < 0) return "negative timestamp";
    if (!std::isfinite(p.amount) || p.amount < 0) return "negative purchase amount";
    if (p.loc) {
        std::string e = validate(*p.loc);
        if (!e.empty()) return "purchase location: " + e;
    }
    return {};
}

}  // namespace glucolens
