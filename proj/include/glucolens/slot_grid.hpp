#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glucolens/activity.hpp"
#include "glucolens/records.hpp"
#include "glucolens/time.hpp"

namespace glucolens {

// Standard channel names used by the fused grid.
inline constexpr const char* kChActivity = "activity";
inline constexpr const char* kChGlucose = "glucose";
inline constexpr const char* kChLat = "lat";
inline constexpr const char* kChLon = "lon";
inline constexpr const char* kChAccuracy = "accuracy_m";
inline constexpr const char* kChPurchase = "purchase";

struct TimedValue {
    Timestamp t;
    double value = 0.0;
};

struct Channel {
    std::vector<double> values;       // undefined where mask == 0
    std::vector<std::uint8_t> mask;   // 1 = observed
};

struct WindowView {
    std::vector<double> values;       // length 2k+1
    std::vector<std::uint8_t> mask;   // out-of-range slots padded with 0
};

// Uniform time grid. Immutable after construction; safe to share across
// concurrent readers. A measurement at time t lands in slot
// floor((t - t0) / slot_width_s); collisions keep the latest-timestamped
// value (ties keep the later input record).
class SlotGrid {
public:
    SlotGrid(Timestamp t0, std::int64_t slot_width_s, std::size_t n_slots,
             std::map<std::string, Channel> channels);

    Timestamp t0() const { return t0_; }
    std::int64_t slot_width_s() const { return slot_width_s_; }
    std::size_t n_slots() const { return n_slots_; }
    Timestamp slot_time(std::size_t i) const {
        return t0_ + static_cast<std::int64_t>(i) * slot_width_s_;
    }
    Timestamp t_end() const { return slot_time(n_slots_); }

    // nullopt when t is outside [t0, t_end).
    std::optional<std::size_t> slot_of(Timestamp t) const;

    bool has_channel(const std::string& name) const;
    const Channel& channel(const std::string& name) const;  // throws on unknown name
    std::vector<std::string> channel_names() const;

    // Convenience for the categorical activity channel.
    std::optional<ActivityClass> activity_at(std::size_t slot) const;

private:
    Timestamp t0_;
    std::int64_t slot_width_s_;
    std::size_t n_slots_;
    std::map<std::string, Channel> channels_;
};

// Coerces per-channel timestamped measurements onto the grid. All
// measurements must fall within [t0, t_end); violations throw with the
// channel name and the index of the offending record.
SlotGrid build_grid(const std::map<std::string, std::vector<TimedValue>>& measurements,
                    Timestamp t0, Timestamp t_end, std::int64_t slot_width_s);

// Assembles the standard multi-channel grid from raw measurement streams.
// lat/lon/accuracy_m share one observation pattern by construction.
SlotGrid build_standard_grid(std::span<const ActivityMeasurement> activities,
                             std::span<const GeoFix> fixes,
                             std::span<const GlucoseReading> glucose,
                             std::span<const PurchaseRecord> purchases,
                             Timestamp t0, Timestamp t_end, std::int64_t slot_width_s);

// Window of width 2k+1 centered at `center`; out-of-range slots are padded
// as unobserved.
WindowView window(const SlotGrid& grid, const std::string& channel,
                  std::size_t center, std::size_t k);

}  // namespace glucolens
