#include "glucolens/activity.hpp"

namespace glucolens {

const char* to_string(ActivityClass a) {
    switch (a) {
        case ActivityClass::walking: return "walking";
        case ActivityClass::running: return "running";
        case ActivityClass::cycling: return "cycling";
        case ActivityClass::stationary: return "stationary";
        case ActivityClass::automotive: return "automotive";
        case ActivityClass::stationary_automotive: return "stationary_automotive";
        case ActivityClass::unknown: return "unknown";
    }
    return "unknown";
}

std::optional<ActivityClass> parse_activity(std::string_view text) {
    for (ActivityClass a : kActivityAlphabet) {
        if (text == to_string(a)) return a;
    }
    if (text == "stationaryautomotive") return ActivityClass::stationary_automotive;
    return std::nullopt;
}

}  // namespace glucolens
