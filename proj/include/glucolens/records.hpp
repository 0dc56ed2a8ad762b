#pragma once

#include <optional>
#include <string>

#include "glucolens/geo.hpp"
#include "glucolens/time.hpp"

namespace glucolens {

inline constexpr double kGlucoseMinMgdl = 20.0;
inline constexpr double kGlucoseMaxMgdl = 600.0;

// CGM sensors report every 5 minutes; lagged features, aligned windows and
// correlation curves all work at this cadence.
inline constexpr std::int64_t kCgmIntervalSeconds = 300;

struct GlucoseReading {
    Timestamp t;
    double mgdl = 0.0;
};

struct PurchaseRecord {
    Timestamp t;
    std::string merchant_tag;
    double amount = 0.0;
    std::optional<GeoFix> loc;
};

// Each returns an empty string when the record is acceptable, otherwise a
// human-readable reason. Ingestion rejects bad records loudly instead of
// clamping them.
std::string validate(const GlucoseReading& r);
std::string validate(const GeoFix& f);
std::string validate(const PurchaseRecord& p);

}  // namespace glucolens
