#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

#include "glucolens/time.hpp"

namespace glucolens {

// Closed 7-value alphabet of motion classifications. The enumerator order
// is the fixed alphabet order used for deterministic tie-breaking.
enum class ActivityClass : std::uint8_t {
    walking = 0,
    running = 1,
    cycling = 2,
    stationary = 3,
    automotive = 4,
    stationary_automotive = 5,
    unknown = 6,
};

inline constexpr std::size_t kActivityClassCount = 7;

inline constexpr std::array<ActivityClass, kActivityClassCount> kActivityAlphabet = {
    ActivityClass::walking,       ActivityClass::running,
    ActivityClass::cycling,       ActivityClass::stationary,
    ActivityClass::automotive,    ActivityClass::stationary_automotive,
    ActivityClass::unknown,
};

const char* to_string(ActivityClass a);

// True for classes that indicate motion (everything except stationary and
// unknown).
inline bool is_moving(ActivityClass a) {
    return a != ActivityClass::stationary && a != ActivityClass::unknown;
}

// Parses the canonical token ("stationary_automotive") and the squashed
// legacy form ("stationaryautomotive"). Returns nullopt for anything else.
std::optional<ActivityClass> parse_activity(std::string_view text);

struct ActivityMeasurement {
    Timestamp t;
    ActivityClass label = ActivityClass::unknown;
};

}  // namespace glucolens
